#pragma once

#include <ostream>

#include "pgwm/train/config.hpp"

namespace pgwm {

// Generate the synthetic dataset described by the config: one procedural
// volume, train+test scans along smooth random trajectories, persisted in
// the standard dataset layout. Scan trajectory seeds derive from the config
// seed and the scan index, so generation is reproducible.
std::filesystem::path generate_dataset(const RunConfig &cfg, const std::filesystem::path &out_dir,
                                       bool force, std::ostream *log = nullptr);

} // namespace pgwm
