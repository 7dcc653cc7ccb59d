#pragma once

#include <cstdint>
#include <vector>

#include "pgwm/error.hpp"

namespace pgwm {

// Procedural 3D scalar field standing in for scanned anatomy. Voxel
// intensities live in [0, 1]. World coordinates are millimetres with the
// origin at the center voxel index floor(D/2) on each axis.
struct Volume {
  int size = 0;                // D, voxels per side
  double voxel_spacing = 1.0;  // mm per voxel
  uint64_t seed = 0;           // requested generator seed (provenance)
  std::vector<float> data;     // size^3, index = (z * D + y) * D + x

  float at(int x, int y, int z) const {
    return data[(static_cast<size_t>(z) * size + y) * size + x];
  }
  // World position of voxel (x,y,z) in mm.
  double world_of_index(int i) const {
    return (i - size / 2) * voxel_spacing;
  }
  double extent_mm() const { return size * voxel_spacing; }

  // Trilinear sample at world position (mm); out-of-volume reads 0.
  double sample_world(double wx, double wy, double wz) const;
};

// Deterministic per seed. The result contains several nested ellipsoidal
// shells plus asymmetric off-center structures, and is checked at generation
// time to be rotationally asymmetric (so a plane's content identifies its
// pose). On an asymmetry-check failure the internal seed is advanced and the
// volume regenerated, still deterministically.
Volume generate_phantom(uint64_t seed, int size, double voxel_spacing = 1.0);

} // namespace pgwm
