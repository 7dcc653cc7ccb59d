#include "pgwm/guidance/report.hpp"

#include <fstream>
#include <json.hpp>

#include "pgwm/error.hpp"

namespace pgwm {

using nlohmann::json;

namespace {
double safe_ratio(double mae, double sd) { return sd > 0 ? mae / sd : mae; }
} // namespace

double MaeReport::aggregate_translation() const {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += safe_ratio(overall[i], label_std[i]);
  return s / 3.0;
}

double MaeReport::aggregate_rotation() const {
  double s = 0;
  for (int i = 3; i < 6; ++i) s += safe_ratio(overall[i], label_std[i]);
  return s / 3.0;
}

double MaeReport::aggregate_overall() const {
  double s = 0;
  for (int i = 0; i < 6; ++i) s += safe_ratio(overall[i], label_std[i]);
  return s / 6.0;
}

double MaeReport::mean_rotation_mae() const {
  return (overall[3] + overall[4] + overall[5]) / 3.0;
}

void MaeReport::write_csv(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << "plane,axis,unit,mae,n\n";
  char buf[160];
  for (const auto &p : planes)
    for (int a = 0; a < 6; ++a) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%d\n", p.plane.c_str(), kAxisNames[a],
                    axis_unit(a), p.mae[a], p.count);
      out << buf;
    }
  for (int a = 0; a < 6; ++a) {
    std::snprintf(buf, sizeof(buf), "all,%s,%s,%.9g,%d\n", kAxisNames[a], axis_unit(a),
                  overall[a], total);
    out << buf;
  }
}

void MaeReport::write_json(const std::filesystem::path &path) const {
  json j;
  j["mode"] = mode_tag;
  j["total"] = total;
  j["overall"] = overall;
  j["label_std"] = label_std;
  j["aggregate_translation"] = aggregate_translation();
  j["aggregate_rotation"] = aggregate_rotation();
  j["aggregate_overall"] = aggregate_overall();
  j["mean_rotation_mae"] = mean_rotation_mae();
  json planes_j = json::array();
  for (const auto &p : planes)
    planes_j.push_back(json{{"plane", p.plane}, {"mae", p.mae}, {"n", p.count}});
  j["planes"] = planes_j;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << j.dump(2) << "\n";
}

MaeReport MaeReport::read_json(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception &e) {
    throw FormatError("corrupt MAE report " + path.string() + ": " + e.what());
  }
  MaeReport r;
  try {
    r.mode_tag = j.value("mode", "");
    r.total = j.at("total").get<int>();
    for (int i = 0; i < 6; ++i) r.overall[i] = j.at("overall")[i].get<double>();
    for (int i = 0; i < 6; ++i) r.label_std[i] = j.at("label_std")[i].get<double>();
    for (const auto &pj : j.at("planes")) {
      MaeReport::PlaneStats p;
      p.plane = pj.at("plane").get<std::string>();
      for (int i = 0; i < 6; ++i) p.mae[i] = pj.at("mae")[i].get<double>();
      p.count = pj.at("n").get<int>();
      r.planes.push_back(std::move(p));
    }
  } catch (const json::exception &e) {
    throw FormatError("corrupt MAE report " + path.string() + ": " + e.what());
  }
  return r;
}

MaeComparison MaeComparison::between(const MaeReport &baseline, const MaeReport &variant) {
  MaeComparison cmp;
  auto add_rows = [&cmp](const std::string &plane, const std::array<double, 6> &base,
                         const std::array<double, 6> &var) {
    for (int a = 0; a < 6; ++a) {
      MaeComparison::Row row;
      row.plane = plane;
      row.axis = a;
      row.baseline = base[a];
      row.variant = var[a];
      row.percent_change = base[a] != 0 ? (var[a] - base[a]) / base[a] * 100.0 : 0.0;
      cmp.rows.push_back(row);
    }
  };
  for (const auto &bp : baseline.planes) {
    for (const auto &vp : variant.planes)
      if (vp.plane == bp.plane) {
        add_rows(bp.plane, bp.mae, vp.mae);
        break;
      }
  }
  add_rows("all", baseline.overall, variant.overall);
  return cmp;
}

std::string MaeComparison::format_table() const {
  std::string out = "plane     axis  unit  baseline   variant    change\n";
  char buf[160];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof(buf), "%-9s %-5s %-5s %9.4f %9.4f  %+7.2f%%\n", r.plane.c_str(),
                  kAxisNames[r.axis], axis_unit(r.axis), r.baseline, r.variant,
                  r.percent_change);
    out += buf;
  }
  return out;
}

} // namespace pgwm
