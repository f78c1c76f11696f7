#include "deepconn/cine.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "deepconn/error.hpp"

namespace deepconn {

Roi default_roi(std::size_t width, std::size_t height) {
  const std::size_t x0 = width / 3;
  const std::size_t x1 = 2 * width / 3;
  const std::size_t y0 = 2 * height / 3;
  return {x0, y0, x1 - x0, height - y0};
}

double breath_metric(const Image2D& image, const Roi& roi) {
  if (roi.width == 0 || roi.height == 0) throw Error(ErrorCode::EmptyRoi, "ROI has zero area");
  if (roi.x + roi.width > image.width || roi.y + roi.height > image.height) {
    throw Error(ErrorCode::OutOfBounds, "ROI extends beyond the image");
  }
  std::uint64_t sum = 0;
  for (std::size_t y = roi.y; y < roi.y + roi.height; ++y) {
    for (std::size_t x = roi.x; x < roi.x + roi.width; ++x) sum += image.at(x, y);
  }
  return static_cast<double>(sum) / static_cast<double>(roi.width * roi.height);
}

std::size_t resample_index(std::size_t t, std::size_t source_length, std::size_t target_length) {
  return t * source_length / target_length;
}

CineNormalization normalize_cine(const std::vector<CineLocationSeries>& series, std::size_t frames, const Roi& roi,
                                 const CineGeometry& geometry) {
  if (series.empty()) throw Error(ErrorCode::EmptySeries, "no cine locations");
  if (frames < 2) throw Error(ErrorCode::InvalidArgument, "target frame count must be >= 2");

  std::vector<const CineLocationSeries*> ordered;
  for (const auto& s : series) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->location < b->location; });

  const Image2D* reference = nullptr;
  for (const auto* s : ordered) {
    if (s->frames.size() < 2) {
      throw Error(ErrorCode::EmptySeries, fmt::format("location {} has {} frame(s)", s->location, s->frames.size()));
    }
    for (const auto& f : s->frames) {
      if (reference == nullptr) reference = &f;
      if (f.width != reference->width || f.height != reference->height) {
        throw Error(ErrorCode::GeometryMismatch, fmt::format("location {} image size differs", s->location));
      }
    }
  }

  const std::size_t width = reference->width;
  const std::size_t height = reference->height;
  const std::size_t plane = width * height;
  std::vector<std::vector<std::uint16_t>> volumes(frames, std::vector<std::uint16_t>(plane * ordered.size()));
  std::vector<std::size_t> peaks;
  std::vector<std::string> warnings;

  for (std::size_t loc = 0; loc < ordered.size(); ++loc) {
    const auto& source = ordered[loc]->frames;
    const std::size_t length = source.size();
    std::vector<double> metric(length);
    for (std::size_t j = 0; j < length; ++j) metric[j] = breath_metric(source[j], roi);

    const auto peak = static_cast<std::size_t>(std::max_element(metric.begin(), metric.end()) - metric.begin());
    peaks.push_back(peak);

    // Position of the minimum after rotating the peak to the front; for odd
    // lengths the middle frame counts as second half.
    const auto trough = static_cast<std::size_t>(std::min_element(metric.begin(), metric.end()) - metric.begin());
    const std::size_t trough_rotated = (trough + length - peak) % length;
    if (trough_rotated < length / 2) {
      warnings.push_back(fmt::format("location {}: breath minimum at rotated frame {} of {} (expected second half)",
                                     ordered[loc]->location, trough_rotated, length));
    }

    for (std::size_t t = 0; t < frames; ++t) {
      const Image2D& img = source[(peak + resample_index(t, length, frames)) % length];
      std::copy(img.pixels.begin(), img.pixels.end(),
                volumes[t].begin() + static_cast<std::ptrdiff_t>(plane * loc));
    }
  }

  std::vector<VoxelGrid> grids;
  grids.reserve(frames);
  for (auto& v : volumes) {
    grids.emplace_back(Dims{width, height, ordered.size()}, geometry.spacing, geometry.origin, geometry.depth,
                       std::move(v));
  }
  return {CineStack(std::move(grids), geometry.cycle_duration), std::move(peaks), std::move(warnings)};
}

}  // namespace deepconn
