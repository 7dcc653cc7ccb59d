#include "pgwm/guidance/finetune.hpp"

namespace pgwm {

MaeReport evaluate_mae_with(const std::vector<GuidanceSample> &samples,
                            const std::vector<StandardPlane> &planes,
                            const GuidancePredictFn &predict) {
  PGWM_CHECK(!samples.empty(), InvalidArgument, "evaluate_mae: empty test set");
  MaeReport report;
  report.planes.resize(planes.size());
  for (size_t p = 0; p < planes.size(); ++p) report.planes[p].plane = planes[p].name;

  for (const auto &s : samples) {
    const std::array<double, 6> pred = predict(s);
    auto &plane = report.planes[s.plane_id];
    for (int a = 0; a < 6; ++a) {
      const double err = std::abs(pred[a] - s.label.a[a]);
      plane.mae[a] += err;
      report.overall[a] += err;
    }
    ++plane.count;
    ++report.total;
  }
  for (auto &p : report.planes) {
    if (p.count == 0) continue;
    for (int a = 0; a < 6; ++a) p.mae[a] /= p.count;
  }
  for (int a = 0; a < 6; ++a) report.overall[a] /= report.total;

  const LabelStats stats = label_stats(samples);
  report.label_std = stats.stddev;
  return report;
}

} // namespace pgwm
