#include "pgwm/guidance/samples.hpp"

#include <cmath>

namespace pgwm {

GuidanceSampleSet build_guidance_samples(const Dataset &dataset, const std::string &split,
                                         const std::vector<StandardPlane> &planes, int stride) {
  PGWM_CHECK(stride >= 1, InvalidArgument, "guidance samples: stride must be >= 1");
  PGWM_CHECK(!planes.empty(), InvalidArgument, "guidance samples: no standard planes");
  GuidanceSampleSet out;
  for (int scan_idx : dataset.scan_indices_for_split(split)) {
    const ScanInfo &scan = dataset.scans()[scan_idx];
    for (int f = 0; f < scan.frames; f += stride) {
      for (int p = 0; p < static_cast<int>(planes.size()); ++p) {
        GuidanceSample s;
        s.scan_idx = scan_idx;
        s.frame_idx = f;
        s.plane_id = p;
        try {
          s.label = relative_pose(scan.poses[f], planes[p].pose);
        } catch (const DegeneratePose &) {
          ++out.skipped_degenerate;
          continue;
        }
        out.samples.push_back(s);
      }
    }
  }
  PGWM_CHECK(!out.samples.empty(), InvalidArgument,
             "guidance samples: split '" + split + "' produced no samples");
  return out;
}

LabelStats label_stats(const std::vector<GuidanceSample> &samples) {
  PGWM_CHECK(!samples.empty(), InvalidArgument, "label_stats: empty sample list");
  LabelStats st;
  std::array<double, 6> mean{};
  for (const auto &s : samples)
    for (int i = 0; i < 6; ++i) {
      mean[i] += s.label.a[i];
      st.mean_abs[i] += std::abs(s.label.a[i]);
    }
  for (int i = 0; i < 6; ++i) {
    mean[i] /= samples.size();
    st.mean_abs[i] /= samples.size();
  }
  for (const auto &s : samples)
    for (int i = 0; i < 6; ++i) {
      const double d = s.label.a[i] - mean[i];
      st.stddev[i] += d * d;
    }
  for (int i = 0; i < 6; ++i) st.stddev[i] = std::sqrt(st.stddev[i] / samples.size());
  return st;
}

} // namespace pgwm
