#include "deepconn/convert.hpp"

#include <algorithm>
#include <cmath>

#include "deepconn/error.hpp"

namespace deepconn {

std::uint8_t window_value(double v, Window window) {
  const double t = std::clamp((v - window.lo) / (window.hi - window.lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(255.0 * t + 0.5));
}

VoxelGrid convert_to_8bit(const VoxelGrid& grid, Window window) {
  if (!(window.lo < window.hi)) throw Error(ErrorCode::BadWindow, "window requires lo < hi");
  // One lookup per possible input value keeps the per-voxel work trivial.
  std::vector<std::uint8_t> table(max_value(grid.depth()) + 1);
  for (std::size_t v = 0; v < table.size(); ++v) table[v] = window_value(static_cast<double>(v), window);
  std::vector<std::uint16_t> out(grid.values().size());
  std::transform(grid.values().begin(), grid.values().end(), out.begin(),
                 [&table](std::uint16_t v) { return table[v]; });
  return VoxelGrid(grid.dims(), grid.spacing(), grid.origin(), Depth::U8, std::move(out));
}

Window default_window(const VoxelGrid& grid, const BodyMask& mask) {
  if (!(mask.dims == grid.dims())) throw Error(ErrorCode::GeometryMismatch, "mask dims differ from grid");
  std::vector<std::uint16_t> inside;
  for (std::size_t i = 0; i < mask.occupied.size(); ++i) {
    if (mask.occupied[i]) inside.push_back(grid.values()[i]);
  }
  if (inside.empty()) throw Error(ErrorCode::EmptyMask, "window from an empty mask");
  Window w{static_cast<double>(percentile(inside, 0.5)), static_cast<double>(percentile(inside, 99.5))};
  if (w.hi <= w.lo) w.hi = w.lo + 1.0;
  return w;
}

}  // namespace deepconn
