// Micro-benchmark for the pre-training step: reports per-sample and
// per-step wall time for the configured model so desk configs can be sized
// to the available hardware.
#include <chrono>
#include <cstdio>

#include "pgwm/train/pretrain.hpp"

using namespace pgwm;

namespace {

template <class S>
double bench_config(const char *label, int image, int patch, int enc_dim, int enc_depth,
                    int pred_dim, int pred_depth, int m_targets, int steps, int workers,
                    double aspect_lo = 0.75, double aspect_hi = 1.5) {
  RunConfig cfg;
  cfg.data.image_h = cfg.data.image_w = image;
  cfg.data.frames_per_scan = 96;
  cfg.data.train_scans = 2;
  cfg.data.test_scans = 1;
  cfg.encoder.image_size = image;
  cfg.encoder.patch_size = patch;
  cfg.encoder.hidden_dim = enc_dim;
  cfg.encoder.depth = enc_depth;
  cfg.predictor.hidden_dim = pred_dim;
  cfg.predictor.depth = pred_depth;
  cfg.masks.num_targets = m_targets;
  cfg.masks.target_scale_min = 0.12;
  cfg.masks.target_scale_max = 0.2;
  cfg.masks.target_aspect_min = aspect_lo;
  cfg.masks.target_aspect_max = aspect_hi;
  cfg.pretrain.batch_size = 64;
  cfg.pretrain.epochs = 4;
  cfg.pretrain.num_workers = workers;

  Volume vol = generate_phantom(cfg.data.volume_seed, cfg.data.volume_size);
  auto dir = std::filesystem::temp_directory_path() / "pgwm_bench_data";
  std::filesystem::remove_all(dir);
  DatasetMeta meta;
  meta.image_h = image;
  meta.image_w = image;
  meta.pixel_spacing = cfg.data.pixel_spacing;
  meta.volume_seed = vol.seed;
  meta.volume_size = vol.size;
  DatasetWriter writer(dir, meta);
  for (int k = 0; k < 3; ++k)
    writer.add_scan(generate_scan(vol, cfg.data.full_trajectory(), k, k), k < 2 ? "train" : "test");
  writer.finalize();
  Dataset ds = Dataset::open(dir);
  ds.preload_images();

  PretrainRunner<S> runner(cfg, ds);
  // warm-up step
  runner.train_step(runner.make_batch(0), 0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int s = 1; s <= steps; ++s) runner.train_step(runner.make_batch(s), s);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double per_step = dt / steps;
  std::printf("%-28s img=%d p=%d C=%d d=%d D=%d pd=%d M=%d W=%d  %7.1f ms/step  %6.2f ms/sample\n",
              label, image, patch, enc_dim, enc_depth, pred_dim, pred_depth, m_targets, workers,
              per_step * 1e3, per_step * 1e3 / cfg.pretrain.batch_size);
  std::filesystem::remove_all(dir);
  return per_step;
}

} // namespace

int main(int argc, char **argv) {
  const int steps = argc > 1 ? std::atoi(argv[1]) : 4;
  std::printf("benchmarking pre-training step (batch 64, %d timed steps)\n", steps);
  bench_config<float>("grid4 C64 d3", 64, 16, 64, 3, 64, 2, 2, steps, 2, 0.5, 2.0);
  bench_config<float>("grid8 C32 d3", 64, 8, 32, 3, 32, 2, 2, steps, 2);
  bench_config<float>("grid8 C32 d2", 64, 8, 32, 2, 32, 2, 2, steps, 2);
  bench_config<float>("grid8 C48 d3", 64, 8, 48, 3, 48, 2, 2, steps, 2);
  bench_config<float>("grid8 C32 d3 W1", 64, 8, 32, 3, 32, 2, 2, steps, 1);
  bench_config<float>("grid8 C32 d3 M4", 64, 8, 32, 3, 32, 2, 4, steps, 2);
  return 0;
}
