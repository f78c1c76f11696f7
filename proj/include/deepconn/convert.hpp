#pragma once

#include <cstdint>

#include "deepconn/volume.hpp"

namespace deepconn {

struct Window {
  double lo = 0.0;
  double hi = 255.0;
};

/// out = round_half_up(255 * clamp((v - lo) / (hi - lo), 0, 1)).
/// Throws BadWindow unless lo < hi.
VoxelGrid convert_to_8bit(const VoxelGrid& grid, Window window);
std::uint8_t window_value(double v, Window window);

/// 0.5th / 99.5th nearest-rank percentiles of the voxels inside the mask.
/// A degenerate window (all masked voxels equal) is widened to [v, v + 1].
Window default_window(const VoxelGrid& grid, const BodyMask& mask);

}  // namespace deepconn
