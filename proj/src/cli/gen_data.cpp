#include "pgwm/cli/gen_data.hpp"

#include "pgwm/phantom/dataset.hpp"

namespace pgwm {

std::filesystem::path generate_dataset(const RunConfig &cfg, const std::filesystem::path &out_dir,
                                       bool force, std::ostream *log) {
  const DataConfig &d = cfg.data;
  PGWM_CHECK(d.train_scans >= 1 && d.test_scans >= 1, InvalidArgument,
             "dataset generation needs at least one train and one test scan");

  if (log) *log << "[gen-data] generating phantom volume (seed " << d.volume_seed << ")\n";
  Volume vol = generate_phantom(d.volume_seed, d.volume_size, d.voxel_spacing);

  DatasetMeta meta;
  meta.image_h = d.image_h;
  meta.image_w = d.image_w;
  meta.pixel_spacing = d.pixel_spacing;
  meta.voxel_spacing = d.voxel_spacing;
  meta.volume_seed = d.volume_seed;
  meta.volume_size = d.volume_size;
  meta.lossless = d.lossless;

  DatasetWriter writer(out_dir, meta, force);
  const TrajectoryConfig traj = d.full_trajectory();
  const int total = d.train_scans + d.test_scans;
  for (int k = 0; k < total; ++k) {
    const std::string split = k < d.train_scans ? "train" : "test";
    const uint64_t traj_seed = mix_seed(d.volume_seed, hash_label("scan"), k);
    if (log)
      *log << "[gen-data] scan " << k << " (" << split << ", " << traj.frames << " frames)\n";
    writer.add_scan(generate_scan(vol, traj, traj_seed, k), split);
  }
  writer.finalize();

  if (log) {
    Dataset ds = Dataset::open(out_dir);
    *log << "[gen-data] wrote " << ds.scans().size() << " scans, " << ds.total_frames()
         << " frames (" << d.train_scans << " train / " << d.test_scans << " test) to "
         << out_dir.string() << "\n";
  }
  return out_dir;
}

} // namespace pgwm
