#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace pgwm {

inline const std::array<const char *, 6> kAxisNames = {"x", "y", "z", "rx", "ry", "rz"};
inline const char *axis_unit(int axis) { return axis < 3 ? "mm" : "deg"; }

// Per-plane, per-axis mean absolute guidance error (mm / degrees), plus
// std-normalized aggregates used for cross-unit comparisons.
struct MaeReport {
  struct PlaneStats {
    std::string plane;
    std::array<double, 6> mae{};
    int count = 0;
  };
  std::vector<PlaneStats> planes;
  std::array<double, 6> overall{};   // over all samples
  std::array<double, 6> label_std{}; // per-axis label stddev of the eval set
  int total = 0;
  std::string mode_tag; // provenance of the evaluated model

  // mean over axes of mae/label_std
  double aggregate_translation() const;
  double aggregate_rotation() const;
  double aggregate_overall() const;
  // plain mean over the three rotation axes, degrees
  double mean_rotation_mae() const;

  void write_csv(const std::filesystem::path &path) const;
  void write_json(const std::filesystem::path &path) const;
  static MaeReport read_json(const std::filesystem::path &path);
};

// Per-axis relative change (variant - baseline) / baseline * 100; negative
// means the variant improves on the baseline.
struct MaeComparison {
  struct Row {
    std::string plane;
    int axis;
    double baseline;
    double variant;
    double percent_change;
  };
  std::vector<Row> rows;

  static MaeComparison between(const MaeReport &baseline, const MaeReport &variant);
  std::string format_table() const;
};

} // namespace pgwm
