#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deepconn/volume.hpp"

namespace deepconn {

/// Time-ordered images acquired at one slice location.
struct CineLocationSeries {
  std::size_t location = 0;
  std::vector<Image2D> frames;
};

struct Roi {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Centre-bottom third of the image: the middle third of columns, the last
/// third of rows.
Roi default_roi(std::size_t width, std::size_t height);

/// Mean intensity over the ROI. Throws EmptyRoi for zero area, OutOfBounds if
/// the ROI leaves the image.
double breath_metric(const Image2D& image, const Roi& roi);

/// Geometry of the assembled cine volumes (location index maps to z).
struct CineGeometry {
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{};
  Depth depth = Depth::U16;
  double cycle_duration = 1.0;
};

struct CineNormalization {
  CineStack stack;
  /// Per location (in ascending location order): index of the original
  /// frame that became frame 0.
  std::vector<std::size_t> peak_index;
  std::vector<std::string> warnings;
};

/// Source index for output frame t when resampling L frames to T.
std::size_t resample_index(std::size_t t, std::size_t source_length, std::size_t target_length);

/// Rotates each series so its maximal breath metric is first, resamples to
/// `frames` by nearest index and stacks frame t across locations.
CineNormalization normalize_cine(const std::vector<CineLocationSeries>& series, std::size_t frames, const Roi& roi,
                                 const CineGeometry& geometry);

}  // namespace deepconn
