#include "deepconn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include "json.hpp"

#include "deepconn/dicom.hpp"
#include "deepconn/error.hpp"
#include "deepconn/metaimage.hpp"

namespace deepconn {

namespace {

using namespace layout;

double sq(double v) { return v * v; }

bool in_ellipsoid(double u, double v, double w, const double (&semi)[3]) {
  return sq(u / semi[0]) + sq(v / semi[1]) + sq(w / semi[2]) <= 1.0;
}

void validate(const PhantomSpec& spec) {
  if (spec.dims.nx < 32 || spec.dims.ny < 32 || spec.dims.nz < 32) {
    throw Error(ErrorCode::BadSpec, "phantom dims must be >= 32 per axis");
  }
  if (!(spec.spacing.x > 0 && spec.spacing.y > 0 && spec.spacing.z > 0)) {
    throw Error(ErrorCode::BadSpec, "phantom spacing must be > 0");
  }
  const auto& t = spec.tissue;
  if (!(t.background < t.lung && t.lung < t.fat && t.fat < t.muscle && t.muscle < t.bone)) {
    throw Error(ErrorCode::BadSpec, "tissue intensities must be strictly increasing background < lung < fat < muscle < bone");
  }
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::BadSpec, "noise sigma must be >= 0");
}

std::uint16_t tissue_at(const PhantomSpec& spec, std::size_t x, std::size_t y, std::size_t z, double heart_radius) {
  const double u = normalized_coordinate(x, spec.dims.nx);
  const double v = normalized_coordinate(y, spec.dims.ny);
  const double w = normalized_coordinate(z, spec.dims.nz);
  const auto& t = spec.tissue;

  std::uint16_t value = t.background;
  if (in_ellipsoid(u, v, w, kFatSemi)) value = t.fat;
  if (in_ellipsoid(u, v, w, kMuscleSemi)) value = t.muscle;
  for (double side : {-1.0, 1.0}) {
    if (in_ellipsoid(u - side * kLungCenterX, v - kLungCenter[0], w - kLungCenter[1], kLungSemi)) value = t.lung;
  }
  const double rho = std::sqrt(sq(u / kMuscleSemi[0]) + sq(v / kMuscleSemi[1]));
  const double z_mm = static_cast<double>(z) * spec.spacing.z;
  if (rho >= kRibRadius[0] && rho <= kRibRadius[1] && w >= kRibZ[0] && w <= kRibZ[1] &&
      std::fmod(z_mm, kRibPeriodMm) < kRibThicknessMm) {
    value = t.bone;
  }
  if (sq(u - kHeartCenter[0]) + sq(v - kHeartCenter[1]) + sq(w - kHeartCenter[2]) <= sq(heart_radius)) {
    value = t.muscle;
  }
  if (sq(u) + sq(v - kSpineY) <= sq(kSpineRadius) && std::abs(w) <= kMuscleSemi[2]) value = t.bone;
  return value;
}

}  // namespace

double normalized_coordinate(std::size_t index, std::size_t count) {
  return 2.0 * (static_cast<double>(index) + 0.5) / static_cast<double>(count) - 1.0;
}

VoxelGrid make_phantom_body(const PhantomSpec& spec) {
  validate(spec);
  const auto& d = spec.dims;
  std::vector<std::uint16_t> values(d.count());
  std::size_t i = 0;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) values[i++] = tissue_at(spec, x, y, z, kHeartRadius);
    }
  }
  VoxelGrid body(d, spec.spacing, spec.origin, Depth::U16, std::move(values));
  if (spec.noise_sigma > 0.0) return add_uniform_noise(body, spec.noise_sigma, spec.seed);
  return body;
}

VoxelGrid add_uniform_noise(const VoxelGrid& grid, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::BadSpec, "noise sigma must be >= 0");
  Lcg64 rng(seed);
  const double half_width = sigma * std::sqrt(3.0);
  const double limit = max_value(grid.depth());
  std::vector<std::uint16_t> out(grid.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = grid.values()[i] + rng.uniform(-half_width, half_width);
    out[i] = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, limit));
  }
  return VoxelGrid(grid.dims(), grid.spacing(), grid.origin(), grid.depth(), std::move(out));
}

SplitResult split_blocks(const VoxelGrid& grid, std::size_t n, const std::vector<std::size_t>& overlaps,
                         const std::vector<Shift2>& shifts) {
  const auto& d = grid.dims();
  if (n == 0 || n > d.nz) throw Error(ErrorCode::InvalidArgument, "block count must be in 1..nz");
  if (overlaps.size() + 1 != n || shifts.size() + 1 != n) {
    throw Error(ErrorCode::InvalidArgument, "need n-1 overlaps and n-1 shifts");
  }

  std::vector<std::size_t> bounds(n + 1);
  for (std::size_t k = 0; k <= n; ++k) bounds[k] = k * d.nz / n;

  SplitResult result;
  result.truth.overlaps = overlaps;
  result.truth.shifts = shifts;
  std::size_t previous_depth = 0;
  Shift2 accumulated;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t o = k == 0 ? 0 : overlaps[k - 1];
    if (k > 0) {
      if (o >= previous_depth) {
        throw Error(ErrorCode::OverlapTooLarge,
                    fmt::format("junction {}: overlap {} >= block depth {}", k - 1, o, previous_depth));
      }
      accumulated.dx += shifts[k - 1].dx;
      accumulated.dy += shifts[k - 1].dy;
    }
    const std::size_t start = bounds[k] - o;
    const std::size_t depth = bounds[k + 1] - start;
    std::vector<std::uint16_t> values(d.nx * d.ny * depth, 0);
    for (std::size_t z = 0; z < depth; ++z) {
      for (std::size_t y = 0; y < d.ny; ++y) {
        for (std::size_t x = 0; x < d.nx; ++x) {
          const auto sx = static_cast<std::int64_t>(x) + accumulated.dx;
          const auto sy = static_cast<std::int64_t>(y) + accumulated.dy;
          if (sx < 0 || sy < 0 || sx >= static_cast<std::int64_t>(d.nx) || sy >= static_cast<std::int64_t>(d.ny)) {
            continue;
          }
          values[x + d.nx * (y + d.ny * z)] =
              grid.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), start + z);
        }
      }
    }
    const Vec3 origin = voxel_to_world(grid, {0.0, 0.0, static_cast<double>(start)});
    result.blocks.emplace_back(Dims{d.nx, d.ny, depth}, grid.spacing(), origin, grid.depth(), std::move(values));
    result.truth.block_start.push_back(start);
    previous_depth = depth;
  }
  return result;
}

std::size_t default_cine_first_slice(const PhantomSpec& spec, std::size_t locations) {
  // Voxel index of the heart centre along z.
  const double centre = (kHeartCenter[2] + 1.0) * 0.5 * static_cast<double>(spec.dims.nz) - 0.5;
  const auto first = static_cast<std::int64_t>(std::llround(centre)) - static_cast<std::int64_t>(locations / 2);
  return static_cast<std::size_t>(std::clamp<std::int64_t>(
      first, 0, static_cast<std::int64_t>(spec.dims.nz) - static_cast<std::int64_t>(locations)));
}

double breath_phase_value(double phase) { return std::cos(2.0 * std::numbers::pi * phase); }

CinePhantom make_phantom_cine(const PhantomSpec& spec, const CinePhantomSpec& cine) {
  validate(spec);
  const std::size_t locations = cine.frame_counts.size();
  if (locations == 0 || cine.phase_offsets.size() != locations) {
    throw Error(ErrorCode::BadSpec, "need one frame count and one phase offset per location");
  }
  if (cine.first_slice + locations > spec.dims.nz) throw Error(ErrorCode::BadSpec, "cine locations exceed the body");
  if (!(cine.amplitude >= 0.0 && cine.amplitude <= 1.0)) throw Error(ErrorCode::BadSpec, "amplitude must be in [0,1]");
  for (auto count : cine.frame_counts) {
    if (count < 2) throw Error(ErrorCode::BadSpec, "each location needs >= 2 frames");
  }

  const auto& d = spec.dims;
  const Roi roi = default_roi(d.nx, d.ny);
  const double band_bottom = static_cast<double>(roi.y) + 0.9 * static_cast<double>(roi.height);
  const double band_value = spec.tissue.bone;

  CinePhantom out;
  out.offset = {0, 0, static_cast<std::int64_t>(cine.first_slice)};
  out.origin = spec.origin + Vec3{0.0, 0.0, static_cast<double>(cine.first_slice) * spec.spacing.z};
  for (std::size_t loc = 0; loc < locations; ++loc) {
    const std::size_t z = cine.first_slice + loc;
    const std::size_t length = cine.frame_counts[loc];
    CineLocationSeries series{loc, {}};
    std::size_t peak = 0;
    double best_distance = 2.0;
    for (std::size_t j = 0; j < length; ++j) {
      double phase = cine.phase_offsets[loc] + static_cast<double>(j) / static_cast<double>(length);
      phase -= std::floor(phase);
      const double distance = std::min(phase, 1.0 - phase);
      if (distance < best_distance) {
        best_distance = distance;
        peak = j;
      }
      const double breath = cine.amplitude * breath_phase_value(phase);
      const double heart = kHeartRadius * (1.0 + 0.15 * breath);
      // Top edge moves within [0.05, 0.30] of the ROI height, which stays
      // inside the body outline, so the ROI mean is strictly monotone in breath.
      const double band_top =
          static_cast<double>(roi.y) + static_cast<double>(roi.height) * (0.175 - 0.125 * breath);

      Image2D image{d.nx, d.ny, std::vector<std::uint16_t>(d.nx * d.ny)};
      for (std::size_t y = 0; y < d.ny; ++y) {
        const double yf = static_cast<double>(y);
        const double coverage = std::clamp(std::min(yf + 1.0, band_bottom) - std::max(yf, band_top), 0.0, 1.0);
        for (std::size_t x = 0; x < d.nx; ++x) {
          double value = tissue_at(spec, x, y, z, heart);
          if (x >= roi.x && x < roi.x + roi.width && coverage > 0.0 && value != spec.tissue.background) {
            value = std::round(value * (1.0 - coverage) + band_value * coverage);
          }
          image.pixels[x + d.nx * y] = static_cast<std::uint16_t>(value);
        }
      }
      series.frames.push_back(std::move(image));
    }
    out.series.push_back(std::move(series));
    out.peak_index.push_back(peak);
  }
  return out;
}

std::vector<std::filesystem::path> write_phantom_dicom_series(const VoxelGrid& block,
                                                              const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (std::size_t z = 0; z < block.dims().nz; ++z) {
    const auto path = dir / fmt::format("slice_{:04d}.dcm", z);
    write_file_bytes(path, encode_dicom(dicom_slice_from_grid(block, z)));
    paths.push_back(path);
  }
  return paths;
}

void write_phantom_cine_dicom(const CinePhantom& cine, const PhantomSpec& spec, const std::filesystem::path& dir) {
  for (const auto& series : cine.series) {
    const auto folder = dir / fmt::format("loc_{:02d}", series.location);
    for (std::size_t j = 0; j < series.frames.size(); ++j) {
      const Image2D& image = series.frames[j];
      DicomSlice slice;
      slice.rows = image.height;
      slice.columns = image.width;
      slice.row_spacing = spec.spacing.y;
      slice.column_spacing = spec.spacing.x;
      slice.slice_thickness = spec.spacing.z;
      slice.image_position = cine.origin + Vec3{0.0, 0.0, static_cast<double>(series.location) * spec.spacing.z};
      slice.bits_allocated = 16;
      slice.instance_number = static_cast<std::int64_t>(j) + 1;
      slice.pixels.assign(image.pixels.begin(), image.pixels.end());
      write_file_bytes(folder / fmt::format("frame_{:03d}.dcm", j), encode_dicom(slice));
    }
  }
}

std::string split_truth_json(const SplitGroundTruth& truth) {
  nlohmann::ordered_json j;
  j["junctions"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < truth.overlaps.size(); ++k) {
    j["junctions"].push_back({{"overlap", truth.overlaps[k]},
                              {"dx", truth.shifts[k].dx},
                              {"dy", truth.shifts[k].dy}});
  }
  j["block_start"] = truth.block_start;
  return j.dump(2) + "\n";
}

std::string cine_truth_json(const CinePhantom& cine) {
  nlohmann::ordered_json j;
  j["offset"] = {cine.offset.x, cine.offset.y, cine.offset.z};
  j["locations"] = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < cine.series.size(); ++l) {
    j["locations"].push_back({{"location", cine.series[l].location},
                              {"frames", cine.series[l].frames.size()},
                              {"peak_index", cine.peak_index[l]}});
  }
  return j.dump(2) + "\n";
}

}  // namespace deepconn
