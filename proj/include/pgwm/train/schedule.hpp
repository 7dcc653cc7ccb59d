#pragma once

#include <cmath>
#include <cstdint>

#include "pgwm/error.hpp"
#include "pgwm/geometry/pose.hpp"

namespace pgwm {

// Linear warmup from start to peak over warmup_steps, then cosine decay from
// peak to final over the remaining steps. Endpoints are returned exactly.
struct LrSchedule {
  double start = 1e-4;
  double peak = 5e-4;
  double final_lr = 5e-7;
  int64_t warmup_steps = 0;
  int64_t total_steps = 1;

  double at(int64_t step) const {
    PGWM_CHECK(step >= 0 && step <= total_steps, InvalidArgument,
               "lr schedule: step " + std::to_string(step) + " outside [0, " +
                   std::to_string(total_steps) + "]");
    if (step == 0 && warmup_steps > 0) return start;
    if (step <= warmup_steps) {
      if (step == warmup_steps) return peak;
      return start + (peak - start) * static_cast<double>(step) / warmup_steps;
    }
    if (step == total_steps) return final_lr;
    const double progress =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return final_lr + (peak - final_lr) * 0.5 * (1.0 + std::cos(kPi * progress));
  }
};

// EMA teacher momentum, linear from start to end over the run.
struct EmaSchedule {
  double start = 0.996;
  double end = 1.0;
  int64_t total_steps = 1;

  double at(int64_t step) const {
    if (total_steps <= 1) return end;
    const double f = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return start + (end - start) * std::min(1.0, f);
  }
};

} // namespace pgwm
