#pragma once

#include <map>
#include <ostream>

#include "pgwm/guidance/finetune.hpp"

namespace pgwm {

// Pre-training objective ablation: joint / 2d-only / 3d-only pre-training
// plus a no-pretrain baseline, each fine-tuned and evaluated on the held-out
// split, swept over seeds and averaged.
inline const std::vector<std::string> kAblationVariants = {"none", "joint", "2d", "3d"};

struct AblationRow {
  std::string variant;
  uint64_t seed = 0;
  std::string plane; // plane name or "all"
  int axis = 0;
  double mae = 0;
  int n = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;

  // seed-averaged overall MAE per axis for one variant
  std::array<double, 6> averaged(const std::string &variant) const;
  // seed-averaged mean over the three rotation axes (degrees)
  double rotation_mae(const std::string &variant) const;
  double translation_mae(const std::string &variant) const;
  std::vector<uint64_t> seeds() const;
};

struct AblationOptions {
  int num_seeds = 3;
  bool reuse_existing = true; // partial-run resume: skip completed sub-runs
};

// Runs the full sweep under out_dir:
//   pretrain_<mode>_seed<k>/   checkpoints + metrics
//   finetune_<variant>_seed<k>/ report.json + report.csv
//   summary.csv, ablation_report.svg
// Completed sub-runs are detected via their final artifacts and reused.
AblationResult run_ablation(const RunConfig &cfg, const Dataset &dataset,
                            const std::filesystem::path &out_dir, const AblationOptions &opts,
                            std::ostream *log = nullptr);

void write_ablation_csv(const std::filesystem::path &path, const AblationResult &result);
AblationResult read_ablation_csv(const std::filesystem::path &path);

// Fig-style bar chart: per variant, the seed-averaged relative change in MAE
// vs the no-pretrain baseline across the six axes of every plane.
void render_ablation_svg(const std::filesystem::path &path, const AblationResult &result);

// One pretrain sub-run (artifacts under dir); returns the final checkpoint.
std::filesystem::path ablation_pretrain(const RunConfig &base, PretrainMode mode, uint64_t seed,
                                        const Dataset &dataset,
                                        const std::filesystem::path &dir, bool reuse,
                                        std::ostream *log);

// One finetune+eval sub-run; returns the report (written to dir).
MaeReport ablation_finetune_eval(const RunConfig &base, const std::string &variant,
                                 const std::filesystem::path *ckpt, uint64_t seed,
                                 const Dataset &dataset, const std::filesystem::path &dir,
                                 bool reuse, std::ostream *log);

} // namespace pgwm
