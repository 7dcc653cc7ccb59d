// Experiment driver: dataset generation, self-supervised pre-training,
// probe-guidance fine-tuning, MAE evaluation, objective ablations and plot
// rendering. Flags override config-file values (file < flags).
#include <CLI11.hpp>
#include <iostream>

#include "pgwm/cli/ablate.hpp"
#include "pgwm/cli/gen_data.hpp"
#include "pgwm/train/pretrain.hpp"

using namespace pgwm;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

void add_common(CLI::App *cmd, CommonArgs &args, bool need_config = true) {
  auto *c = cmd->add_option("--config", args.config_path, "run configuration file (json)");
  if (need_config) c->required();
  cmd->add_option("--out", args.out, "output directory (default: config out_root)");
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string &) { args.seed_set = true; });
  cmd->add_flag("--force", args.force, "overwrite existing outputs");
}

RunConfig load_config(const CommonArgs &args) {
  RunConfig cfg = load_run_config(args.config_path);
  if (args.seed_set) {
    cfg.pretrain.seed = args.seed;
    cfg.guidance.seed = args.seed;
  }
  if (!args.out.empty()) cfg.out_root = args.out;
  return cfg;
}

fs::path dataset_dir_of(const RunConfig &cfg, const std::string &data_flag) {
  return data_flag.empty() ? fs::path(cfg.out_root) / "dataset" : fs::path(data_flag);
}

Dataset open_dataset(const RunConfig &cfg, const std::string &data_flag, bool preload = true) {
  Dataset ds = Dataset::open(dataset_dir_of(cfg, data_flag));
  if (preload) ds.preload_images();
  return ds;
}

void write_config_echo(const RunConfig &cfg, const fs::path &dir) {
  fs::create_directories(dir);
  save_run_config(cfg, (dir / "config.json").string());
  std::ofstream h(dir / "config_hash.txt");
  h << config_hash(cfg) << "\n";
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"synthetic-phantom world-model pre-training and probe guidance"};
  app.require_subcommand(1);

  // ---- gen-data ----
  CommonArgs gen_args;
  auto *gen = app.add_subcommand("gen-data", "generate the synthetic scan dataset");
  add_common(gen, gen_args);

  // ---- pretrain ----
  CommonArgs pre_args;
  std::string pre_data, pre_mode, pre_resume, pre_name;
  auto *pre = app.add_subcommand("pretrain", "run self-supervised pre-training");
  add_common(pre, pre_args);
  pre->add_option("--data", pre_data, "dataset directory (default <out_root>/dataset)");
  pre->add_option("--mode", pre_mode, "objective mode: joint | 2d | 3d");
  pre->add_option("--resume", pre_resume, "checkpoint directory to resume from");
  pre->add_option("--name", pre_name, "run directory name (default pretrain_<mode>_seed<k>)");

  // ---- finetune ----
  CommonArgs ft_args;
  std::string ft_data, ft_from, ft_name;
  auto *ft = app.add_subcommand("finetune", "fine-tune the probe-guidance model");
  add_common(ft, ft_args);
  ft->add_option("--data", ft_data, "dataset directory (default <out_root>/dataset)");
  ft->add_option("--from", ft_from, "pre-training checkpoint (omit for from-scratch baseline)");
  ft->add_option("--name", ft_name, "run directory name (default finetune_<tag>_seed<k>)");

  // ---- eval ----
  CommonArgs ev_args;
  std::string ev_data, ev_model, ev_report;
  std::vector<std::string> ev_compare;
  bool ev_oracle = false, ev_zero = false;
  auto *ev = app.add_subcommand("eval", "evaluate guidance MAE on the test split");
  add_common(ev, ev_args, /*need_config=*/false);
  ev->add_option("--data", ev_data, "dataset directory (default <out_root>/dataset)");
  ev->add_option("--model", ev_model, "fine-tuned guidance model directory");
  ev->add_option("--report", ev_report, "report file prefix (writes .json and .csv)");
  ev->add_option("--compare", ev_compare, "two report.json files: baseline variant")
      ->expected(2);
  ev->add_flag("--oracle", ev_oracle, "harness self-test: predictor returns the labels");
  ev->add_flag("--zero", ev_zero, "baseline: constant-zero predictor");

  // ---- ablate ----
  CommonArgs ab_args;
  std::string ab_data;
  int ab_seeds = 3;
  auto *ab = app.add_subcommand("ablate", "pre-training objective ablation sweep");
  add_common(ab, ab_args);
  ab->add_option("--data", ab_data, "dataset directory (default <out_root>/dataset)");
  ab->add_option("--seeds", ab_seeds, "number of seeds to sweep (default 3)");

  // ---- plot ----
  std::string plot_summary, plot_out;
  auto *pl = app.add_subcommand("plot", "render the ablation figure from a summary csv");
  pl->add_option("--summary", plot_summary, "ablation summary.csv")->required();
  pl->add_option("--out", plot_out, "output svg path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config(gen_args);
      if (gen_args.seed_set) cfg.data.volume_seed = gen_args.seed;
      const fs::path dir = fs::path(cfg.out_root) / "dataset";
      generate_dataset(cfg, dir, gen_args.force, &std::cout);
      write_config_echo(cfg, fs::path(cfg.out_root));
    } else if (pre->parsed()) {
      RunConfig cfg = load_config(pre_args);
      if (!pre_mode.empty()) cfg.pretrain.mode = pretrain_mode_from_string(pre_mode);
      Dataset ds = open_dataset(cfg, pre_data);
      PretrainRunner<float> runner(cfg, ds);
      const std::string name = pre_name.empty()
                                   ? "pretrain_" + to_string(cfg.pretrain.mode) + "_seed" +
                                         std::to_string(cfg.pretrain.seed)
                                   : pre_name;
      const fs::path run_dir = fs::path(cfg.out_root) / name;
      if (fs::exists(run_dir) && !fs::is_empty(run_dir) && pre_resume.empty()) {
        if (!pre_args.force)
          throw IoError("run directory exists (use --force): " + run_dir.string());
        fs::remove_all(run_dir);
      }
      write_config_echo(cfg, run_dir);
      std::cout << "[pretrain] mode " << to_string(cfg.pretrain.mode) << ", "
                << runner.total_steps() << " steps (" << runner.steps_per_epoch()
                << "/epoch), min_gap " << runner.min_gap() << "\n";
      fs::path resume = pre_resume;
      const fs::path ckpt = runner.run(run_dir, pre_resume.empty() ? nullptr : &resume);
      std::cout << "[pretrain] final checkpoint: " << ckpt.string() << "\n";
    } else if (ft->parsed()) {
      RunConfig cfg = load_config(ft_args);
      Dataset ds = open_dataset(cfg, ft_data);
      const std::string tag = ft_from.empty() ? "scratch" : "pretrained";
      const std::string name = ft_name.empty()
                                   ? "finetune_" + tag + "_seed" +
                                         std::to_string(cfg.guidance.seed)
                                   : ft_name;
      const fs::path run_dir = fs::path(cfg.out_root) / name;
      if (fs::exists(run_dir) && !fs::is_empty(run_dir)) {
        if (!ft_args.force)
          throw IoError("run directory exists (use --force): " + run_dir.string());
        fs::remove_all(run_dir);
      }
      write_config_echo(cfg, run_dir);
      fs::path from = ft_from;
      std::vector<double> trace;
      std::cout << "[finetune] " << (ft_from.empty() ? "from scratch" : "from " + ft_from)
                << "\n";
      auto model = finetune<float>(cfg, ds, ft_from.empty() ? nullptr : &from,
                                   cfg.guidance.seed, &trace);
      save_guidance_model(run_dir / "model", model);
      std::ofstream tr(run_dir / "loss_trace.csv");
      tr << "step,loss\n";
      for (size_t i = 0; i < trace.size(); ++i) tr << i << "," << trace[i] << "\n";
      std::cout << "[finetune] saved model (" << model.mode_tag << " init) to "
                << (run_dir / "model").string() << ", final loss "
                << (trace.empty() ? 0.0 : trace.back()) << "\n";
    } else if (ev->parsed()) {
      if (!ev_compare.empty()) {
        MaeReport base = MaeReport::read_json(ev_compare[0]);
        MaeReport variant = MaeReport::read_json(ev_compare[1]);
        auto cmp = MaeComparison::between(base, variant);
        std::cout << cmp.format_table();
        return 0;
      }
      if (ev_args.config_path.empty())
        throw InvalidArgument("eval: --config is required unless --compare is used");
      RunConfig cfg = load_config(ev_args);
      Dataset ds = open_dataset(cfg, ev_data);
      auto test_set =
          build_guidance_samples(ds, "test", cfg.guidance.planes, cfg.guidance.eval_stride);

      MaeReport report;
      if (ev_oracle) {
        report = evaluate_mae_with(test_set.samples, cfg.guidance.planes,
                                   [](const GuidanceSample &s) {
                                     std::array<double, 6> out;
                                     for (int i = 0; i < 6; ++i) out[i] = s.label.a[i];
                                     return out;
                                   });
        report.mode_tag = "oracle";
      } else if (ev_zero) {
        report = evaluate_mae_with(test_set.samples, cfg.guidance.planes,
                                   [](const GuidanceSample &) { return std::array<double, 6>{}; });
        report.mode_tag = "zero";
      } else {
        if (ev_model.empty())
          throw InvalidArgument("eval: --model is required (or --oracle / --zero / --compare)");
        auto model = load_guidance_model<float>(ev_model);
        report = evaluate_mae<float>(model, ds, test_set.samples, cfg.guidance.planes,
                                     cfg.guidance.num_workers);
      }

      const fs::path prefix = ev_report.empty()
                                  ? fs::path(cfg.out_root) / ("report_" + report.mode_tag)
                                  : fs::path(ev_report);
      fs::create_directories(prefix.parent_path().empty() ? "." : prefix.parent_path());
      report.write_json(prefix.string() + ".json");
      report.write_csv(prefix.string() + ".csv");
      char buf[240];
      std::snprintf(buf, sizeof(buf),
                    "[eval] %s: n=%d  trans (mm) x %.3f y %.3f z %.3f | rot (deg) rx %.3f ry "
                    "%.3f rz %.3f\n",
                    report.mode_tag.c_str(), report.total, report.overall[0], report.overall[1],
                    report.overall[2], report.overall[3], report.overall[4], report.overall[5]);
      std::cout << buf << "[eval] wrote " << prefix.string() << ".{json,csv}\n";
    } else if (ab->parsed()) {
      RunConfig cfg = load_config(ab_args);
      Dataset ds = open_dataset(cfg, ab_data);
      AblationOptions opts;
      opts.num_seeds = ab_seeds;
      opts.reuse_existing = !ab_args.force;
      const fs::path dir = fs::path(cfg.out_root) / "ablation";
      write_config_echo(cfg, dir);
      auto result = run_ablation(cfg, ds, dir, opts, &std::cout);
      std::cout << "[ablate] summary: " << (dir / "summary.csv").string() << "\n[ablate] figure: "
                << (dir / "ablation_report.svg").string() << "\n";
    } else if (pl->parsed()) {
      auto result = read_ablation_csv(plot_summary);
      render_ablation_svg(plot_out, result);
      std::cout << "[plot] wrote " << plot_out << "\n";
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
