#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "deepconn/contours.hpp"
#include "deepconn/volume.hpp"

namespace deepconn {

struct LayerContours {
  std::size_t index = 0;
  /// Plane position along the sectioning axis, in mm.
  double plane_mm = 0.0;
  std::vector<Polyline> contours;
};

struct SheetSize {
  double width_mm = 600.0;
  double height_mm = 400.0;
};

struct SectionOptions {
  Axis axis = Axis::Z;
  double pitch_mm = 4.0;
  /// Uniform outward offset of every contour (approximate kerf compensation).
  double kerf_offset_mm = 0.0;
};

/// Occupied index range along an axis; empty optional-like result when the
/// mask is empty is signalled by first > last.
struct MaskExtent {
  std::size_t first = 1;
  std::size_t last = 0;
  bool empty() const { return first > last; }
};

MaskExtent mask_extent(const BodyMask& mask, Axis axis);

/// Number of layers for an occupied extent: ceil(extent_mm / pitch).
std::size_t layer_count(const MaskExtent& extent, double spacing_mm, double pitch_mm);

/// Cuts the mask every `pitch_mm` through its occupied extent. Layer k lies
/// at the nearest slice to first + k * pitch. Contour coordinates are mm in
/// the remaining two axes, measured from voxel 0.
std::vector<LayerContours> section_mask(const BodyMask& mask, Vec3 spacing, Vec3 origin,
                                        const SectionOptions& options);

/// Translation that centres the union bounding box of all layers on the
/// sheet. Throws ContourExceedsSheet if the box is larger than the sheet.
Vec2 sheet_offset(const std::vector<LayerContours>& layers, SheetSize sheet);

/// SVG 1.1 text for one layer, translated by `offset`.
std::string format_svg_layer(const LayerContours& layer, SheetSize sheet, Vec2 offset);

/// Writes layer_NNNN.svg per layer plus layers.txt (index and plane
/// position). Returns the SVG paths in layer order.
std::vector<std::filesystem::path> write_svg_layers(const std::vector<LayerContours>& layers, SheetSize sheet,
                                                    double pitch_mm, const std::filesystem::path& dir);

}  // namespace deepconn
