#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "deepconn/volume.hpp"

namespace deepconn {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Closed polyline: the last vertex repeats the first.
using Polyline = std::vector<Vec2>;

/// 2D boolean image, x-fastest.
struct Mask2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  bool at(std::size_t x, std::size_t y) const { return pixels[x + width * y] != 0; }
  std::size_t count() const;
};

enum class Axis { X, Y, Z };

/// Cross-section of the mask at `index` along `axis`. The image axes are
/// the remaining two volume axes in x, y, z order. Throws OutOfBounds.
Mask2D extract_layer_mask(const BodyMask& mask, Axis axis, std::size_t index);

/// Iso-contours at 0.5 around true pixels. Pixel (i, j) sits at
/// (i * spacing.x, j * spacing.y); the image is treated as surrounded by
/// false pixels so every contour closes. Saddle cells use the corner
/// average (0.5, counted as inside), which joins diagonal true pixels.
std::vector<Polyline> marching_squares_contours(const Mask2D& image, Vec2 spacing);

/// Signed shoelace area (positive for counter-clockwise in x-right, y-up).
double signed_area(const Polyline& polyline);
double perimeter(const Polyline& polyline);
bool is_closed(const Polyline& polyline);
/// No two non-adjacent edges intersect.
bool is_simple(const Polyline& polyline);
/// Even-odd test against a set of closed polylines.
bool point_inside(const std::vector<Polyline>& polylines, Vec2 p);
/// Pixel (i, j) is true when its centre lies inside the contours (even-odd).
Mask2D rasterize_contours(const std::vector<Polyline>& polylines, std::size_t width, std::size_t height,
                          Vec2 spacing);

/// Moves every vertex along the averaged edge normal by `distance` (outward
/// for positive values). Approximate: sharp corners are not mitred.
Polyline offset_polyline(const Polyline& polyline, double distance);

}  // namespace deepconn
