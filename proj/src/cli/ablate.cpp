#include "pgwm/cli/ablate.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pgwm/train/pretrain.hpp"

namespace pgwm {

namespace fs = std::filesystem;

std::array<double, 6> AblationResult::averaged(const std::string &variant) const {
  std::array<double, 6> acc{};
  std::array<int, 6> counts{};
  for (const auto &r : rows)
    if (r.variant == variant && r.plane == "all") {
      acc[r.axis] += r.mae;
      ++counts[r.axis];
    }
  for (int a = 0; a < 6; ++a)
    if (counts[a]) acc[a] /= counts[a];
  return acc;
}

double AblationResult::rotation_mae(const std::string &variant) const {
  const auto avg = averaged(variant);
  return (avg[3] + avg[4] + avg[5]) / 3.0;
}

double AblationResult::translation_mae(const std::string &variant) const {
  const auto avg = averaged(variant);
  return (avg[0] + avg[1] + avg[2]) / 3.0;
}

std::vector<uint64_t> AblationResult::seeds() const {
  std::set<uint64_t> s;
  for (const auto &r : rows) s.insert(r.seed);
  return {s.begin(), s.end()};
}

fs::path ablation_pretrain(const RunConfig &base, PretrainMode mode, uint64_t seed,
                           const Dataset &dataset, const fs::path &dir, bool reuse,
                           std::ostream *log) {
  RunConfig cfg = base;
  cfg.pretrain.mode = mode;
  cfg.pretrain.seed = seed;

  PretrainRunner<float> runner(cfg, dataset);
  const fs::path final_ckpt = dir / ("ckpt_" + std::to_string(runner.total_steps() - 1));
  if (reuse && fs::exists(final_ckpt / "params.bin") && fs::exists(dir / "run_summary.json")) {
    if (log) *log << "[ablate] reusing pretrain " << dir.filename().string() << "\n";
    return final_ckpt;
  }
  if (log)
    *log << "[ablate] pretraining " << to_string(mode) << " seed " << seed << " ("
         << runner.total_steps() << " steps)\n";
  fs::remove_all(dir);
  return runner.run(dir);
}

MaeReport ablation_finetune_eval(const RunConfig &base, const std::string &variant,
                                 const fs::path *ckpt, uint64_t seed, const Dataset &dataset,
                                 const fs::path &dir, bool reuse, std::ostream *log) {
  const fs::path report_path = dir / "report.json";
  if (reuse && fs::exists(report_path)) {
    if (log) *log << "[ablate] reusing finetune " << dir.filename().string() << "\n";
    return MaeReport::read_json(report_path);
  }
  if (log) *log << "[ablate] finetuning " << variant << " seed " << seed << "\n";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig cfg = base;
  cfg.guidance.seed = seed;
  save_run_config(cfg, (dir / "config.json").string());
  std::ofstream(dir / "config_hash.txt") << config_hash(cfg) << "\n";
  std::vector<double> trace;
  auto model = finetune<float>(cfg, dataset, ckpt, seed, &trace);
  if (variant == "none") model.mode_tag = "scratch";

  auto test_set =
      build_guidance_samples(dataset, "test", cfg.guidance.planes, cfg.guidance.eval_stride);
  MaeReport report = evaluate_mae<float>(model, dataset, test_set.samples, cfg.guidance.planes,
                                         cfg.guidance.num_workers);
  report.write_json(report_path);
  report.write_csv(dir / "report.csv");
  {
    std::ofstream tr(dir / "loss_trace.csv");
    tr << "step,loss\n";
    for (size_t i = 0; i < trace.size(); ++i) tr << i << "," << trace[i] << "\n";
  }
  save_param_sections<float>(dir / "model.bin", {{"guidance", &model.params}});
  return report;
}

AblationResult run_ablation(const RunConfig &cfg, const Dataset &dataset, const fs::path &out_dir,
                            const AblationOptions &opts, std::ostream *log) {
  PGWM_CHECK(opts.num_seeds >= 1, InvalidArgument, "ablation: need at least one seed");
  fs::create_directories(out_dir);

  AblationResult result;
  for (int k = 0; k < opts.num_seeds; ++k) {
    const uint64_t seed = cfg.pretrain.seed + static_cast<uint64_t>(k);

    std::map<std::string, fs::path> ckpts;
    for (PretrainMode mode : {PretrainMode::Joint, PretrainMode::TwoD, PretrainMode::ThreeD}) {
      const std::string name = to_string(mode);
      const fs::path dir = out_dir / ("pretrain_" + name + "_seed" + std::to_string(seed));
      ckpts[name] = ablation_pretrain(cfg, mode, seed, dataset, dir, opts.reuse_existing, log);
    }

    for (const std::string &variant : kAblationVariants) {
      const fs::path dir = out_dir / ("finetune_" + variant + "_seed" + std::to_string(seed));
      const fs::path *ckpt = variant == "none" ? nullptr : &ckpts.at(variant);
      MaeReport report = ablation_finetune_eval(cfg, variant, ckpt, seed, dataset, dir,
                                                opts.reuse_existing, log);
      for (const auto &plane : report.planes)
        for (int a = 0; a < 6; ++a)
          result.rows.push_back({variant, seed, plane.plane, a, plane.mae[a], plane.count});
      for (int a = 0; a < 6; ++a)
        result.rows.push_back({variant, seed, "all", a, report.overall[a], report.total});
    }
  }

  write_ablation_csv(out_dir / "summary.csv", result);
  render_ablation_svg(out_dir / "ablation_report.svg", result);
  if (log) {
    *log << "[ablate] seed-averaged overall MAE (mm / deg):\n";
    for (const auto &variant : kAblationVariants) {
      const auto avg = result.averaged(variant);
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "  %-6s x %.3f y %.3f z %.3f | rx %.3f ry %.3f rz %.3f | rot-mean %.3f\n",
                    variant.c_str(), avg[0], avg[1], avg[2], avg[3], avg[4], avg[5],
                    result.rotation_mae(variant));
      *log << buf;
    }
  }
  return result;
}

void write_ablation_csv(const fs::path &path, const AblationResult &result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ablation summary: " + path.string());
  out << "variant,seed,plane,axis,unit,mae,n\n";
  char buf[200];
  for (const auto &r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%s,%s,%s,%.9g,%d\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.plane.c_str(), kAxisNames[r.axis],
                  axis_unit(r.axis), r.mae, r.n);
    out << buf;
  }
}

AblationResult read_ablation_csv(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read ablation summary: " + path.string());
  AblationResult result;
  std::string line;
  std::getline(in, line);
  PGWM_CHECK(line == "variant,seed,plane,axis,unit,mae,n", FormatError,
             "unexpected ablation summary header in " + path.string());
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t pos = 0;
    while (true) {
      size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    PGWM_CHECK(cells.size() == 7, FormatError,
               "bad ablation summary row " + std::to_string(line_no) + " in " + path.string());
    AblationRow r;
    r.variant = cells[0];
    r.seed = std::stoull(cells[1]);
    r.plane = cells[2];
    r.axis = static_cast<int>(
        std::find(kAxisNames.begin(), kAxisNames.end(), cells[3]) - kAxisNames.begin());
    PGWM_CHECK(r.axis < 6, FormatError, "unknown axis in " + path.string());
    r.mae = std::stod(cells[5]);
    r.n = std::stoi(cells[6]);
    result.rows.push_back(std::move(r));
  }
  return result;
}

namespace {

struct SvgWriter {
  std::string body;
  void rect(double x, double y, double w, double h, const char *fill) {
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "<rect x='%.1f' y='%.1f' width='%.1f' height='%.1f' fill='%s'/>\n", x, y, w, h,
                  fill);
    body += buf;
  }
  void line(double x1, double y1, double x2, double y2, const char *stroke) {
    char buf[220];
    std::snprintf(buf, sizeof(buf),
                  "<line x1='%.1f' y1='%.1f' x2='%.1f' y2='%.1f' stroke='%s' "
                  "stroke-width='1'/>\n",
                  x1, y1, x2, y2, stroke);
    body += buf;
  }
  void text(double x, double y, const std::string &s, int size = 11,
            const char *anchor = "middle") {
    char buf[300];
    std::snprintf(buf, sizeof(buf),
                  "<text x='%.1f' y='%.1f' font-size='%d' font-family='sans-serif' "
                  "text-anchor='%s'>%s</text>\n",
                  x, y, size, anchor, s.c_str());
    body += buf;
  }
};

} // namespace

void render_ablation_svg(const fs::path &path, const AblationResult &result) {
  // per-variant panels of seed-averaged relative change vs the baseline,
  // grouped by axis, one bar per plane
  std::vector<std::string> planes;
  for (const auto &r : result.rows)
    if (r.plane != "all" && std::find(planes.begin(), planes.end(), r.plane) == planes.end())
      planes.push_back(r.plane);
  if (planes.empty()) planes.push_back("all");

  auto plane_avg = [&](const std::string &variant, const std::string &plane, int axis) {
    double acc = 0;
    int n = 0;
    for (const auto &r : result.rows)
      if (r.variant == variant && r.plane == plane && r.axis == axis) {
        acc += r.mae;
        ++n;
      }
    return n ? acc / n : 0.0;
  };

  const std::vector<std::string> variants = {"joint", "2d", "3d"};
  const char *colors[] = {"#4878cf", "#6acc65", "#d65f5f", "#b47cc7"};

  const double panel_w = 760, panel_h = 150, margin = 50, top = 34;
  const double width = panel_w + 2 * margin;
  const double height = top + variants.size() * (panel_h + 38) + 30;

  SvgWriter svg;
  svg.text(width / 2, 20, "Relative change in guidance MAE vs no-pretrain baseline (%)", 14);

  double max_abs = 10.0;
  for (const auto &variant : variants)
    for (const auto &plane : planes)
      for (int a = 0; a < 6; ++a) {
        const double base = plane_avg("none", plane, a);
        if (base <= 0) continue;
        const double pct = (plane_avg(variant, plane, a) - base) / base * 100.0;
        max_abs = std::max(max_abs, std::abs(pct));
      }
  max_abs = std::min(max_abs, 80.0);

  for (size_t v = 0; v < variants.size(); ++v) {
    const double y0 = top + v * (panel_h + 38);
    const double mid = y0 + panel_h / 2;
    svg.text(margin, y0 - 4, variants[v] + " pre-training", 12, "start");
    svg.line(margin, mid, margin + panel_w, mid, "#444444");
    const double group_w = panel_w / 6.0;
    const double bar_w = std::max(2.0, group_w / (planes.size() + 1.5));
    for (int a = 0; a < 6; ++a) {
      const double gx = margin + a * group_w;
      svg.text(gx + group_w / 2, y0 + panel_h + 14, kAxisNames[a], 11);
      if (a > 0) svg.line(gx, y0, gx, y0 + panel_h, "#dddddd");
      for (size_t p = 0; p < planes.size(); ++p) {
        const double base = plane_avg("none", planes[p], a);
        if (base <= 0) continue;
        double pct = (plane_avg(variants[v], planes[p], a) - base) / base * 100.0;
        pct = std::clamp(pct, -max_abs, max_abs);
        const double bar_h = std::abs(pct) / max_abs * (panel_h / 2 - 4);
        const double x = gx + (p + 0.75) * bar_w;
        if (pct <= 0)
          svg.rect(x, mid - bar_h, bar_w * 0.85, bar_h, colors[p % 4]);
        else
          svg.rect(x, mid, bar_w * 0.85, bar_h, colors[p % 4]);
      }
    }
    char lim[64];
    std::snprintf(lim, sizeof(lim), "+/-%.0f%%", max_abs);
    svg.text(margin - 6, y0 + 10, lim, 10, "end");
  }
  // plane legend
  double lx = margin;
  for (size_t p = 0; p < planes.size(); ++p) {
    const double y = height - 12;
    svg.rect(lx, y - 9, 10, 10, colors[p % 4]);
    svg.text(lx + 14, y, planes[p], 11, "start");
    lx += 120;
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write figure: " + path.string());
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << svg.body << "</svg>\n";
}

} // namespace pgwm
