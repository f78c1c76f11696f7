#include "deepconn/fabricate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "deepconn/error.hpp"
#include "deepconn/metaimage.hpp"

namespace deepconn {

namespace {

std::size_t axis_size(const Dims& d, Axis axis) { return axis == Axis::X ? d.nx : (axis == Axis::Y ? d.ny : d.nz); }
std::size_t axis_slot(Axis axis) { return axis == Axis::X ? 0 : (axis == Axis::Y ? 1 : 2); }

// In-plane spacing of the two axes left after removing `axis`.
Vec2 plane_spacing(Vec3 spacing, Axis axis) {
  switch (axis) {
    case Axis::X: return {spacing.y, spacing.z};
    case Axis::Y: return {spacing.x, spacing.z};
    case Axis::Z: break;
  }
  return {spacing.x, spacing.y};
}

}  // namespace

MaskExtent mask_extent(const BodyMask& mask, Axis axis) {
  MaskExtent extent;
  const auto& d = mask.dims;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        const std::size_t i = axis == Axis::X ? x : (axis == Axis::Y ? y : z);
        if (extent.empty()) {
          extent = {i, i};
        } else {
          extent.first = std::min(extent.first, i);
          extent.last = std::max(extent.last, i);
        }
      }
    }
  }
  return extent;
}

std::size_t layer_count(const MaskExtent& extent, double spacing_mm, double pitch_mm) {
  if (!(pitch_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "layer pitch must be positive");
  if (extent.empty()) return 0;
  const double mm = static_cast<double>(extent.last - extent.first + 1) * spacing_mm;
  // Guard against 12.000000001 / 4 style round-up.
  return static_cast<std::size_t>(std::ceil(mm / pitch_mm - 1e-9));
}

std::vector<LayerContours> section_mask(const BodyMask& mask, Vec3 spacing, Vec3 origin,
                                        const SectionOptions& options) {
  const MaskExtent extent = mask_extent(mask, options.axis);
  const double step = spacing[axis_slot(options.axis)];
  const std::size_t count = layer_count(extent, step, options.pitch_mm);
  const Vec2 in_plane = plane_spacing(spacing, options.axis);
  const std::size_t size = axis_size(mask.dims, options.axis);

  std::vector<LayerContours> layers(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double offset_slices = static_cast<double>(k) * options.pitch_mm / step;
    std::size_t index = extent.first + static_cast<std::size_t>(std::lround(offset_slices));
    index = std::min({index, extent.last, size - 1});
    auto contours = marching_squares_contours(extract_layer_mask(mask, options.axis, index), in_plane);
    if (options.kerf_offset_mm != 0.0) {
      for (auto& c : contours) c = offset_polyline(c, options.kerf_offset_mm);
    }
    layers[k] = {k, origin[axis_slot(options.axis)] + static_cast<double>(index) * step, std::move(contours)};
  }
  return layers;
}

Vec2 sheet_offset(const std::vector<LayerContours>& layers, SheetSize sheet) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (const auto& layer : layers) {
    for (const auto& c : layer.contours) {
      for (const auto& p : c) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
      }
    }
  }
  if (x0 > x1) return {};
  if (x1 - x0 > sheet.width_mm || y1 - y0 > sheet.height_mm) {
    throw Error(ErrorCode::ContourExceedsSheet,
                fmt::format("contours span {:.3f} x {:.3f} mm, sheet is {:.3f} x {:.3f} mm", x1 - x0, y1 - y0,
                            sheet.width_mm, sheet.height_mm));
  }
  return {0.5 * (sheet.width_mm - (x0 + x1)), 0.5 * (sheet.height_mm - (y0 + y1))};
}

std::string format_svg_layer(const LayerContours& layer, SheetSize sheet, Vec2 offset) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0:.3f}mm\" height=\"{1:.3f}mm\" "
      "viewBox=\"0 0 {0:.3f} {1:.3f}\">\n",
      sheet.width_mm, sheet.height_mm);
  out << fmt::format("  <title>layer {} at {:.3f} mm</title>\n", layer.index, layer.plane_mm);
  for (const auto& c : layer.contours) {
    if (!is_closed(c)) throw Error(ErrorCode::InvalidArgument, "layer contour is not closed");
    std::string d;
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      d += fmt::format("{}{:.3f} {:.3f} ", k == 0 ? "M " : "L ", c[k].x + offset.x, c[k].y + offset.y);
    }
    d += "Z";
    out << "  <path d=\"" << d << "\" fill=\"none\" stroke=\"#ff0000\" stroke-width=\"0.1\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::filesystem::path> write_svg_layers(const std::vector<LayerContours>& layers, SheetSize sheet,
                                                    double pitch_mm, const std::filesystem::path& dir) {
  if (!(sheet.width_mm > 0.0) || !(sheet.height_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "empty sheet");
  const Vec2 offset = sheet_offset(layers, sheet);
  std::vector<std::filesystem::path> paths;
  std::string manifest = fmt::format("# pitch_mm {:.3f}\n# layer plane_mm contours file\n", pitch_mm);
  for (const auto& layer : layers) {
    const auto name = fmt::format("layer_{:04d}.svg", layer.index);
    write_text_file(dir / name, format_svg_layer(layer, sheet, offset));
    paths.push_back(dir / name);
    manifest += fmt::format("{} {:.3f} {} {}\n", layer.index, layer.plane_mm, layer.contours.size(), name);
  }
  write_text_file(dir / "layers.txt", manifest);
  return paths;
}

}  // namespace deepconn
