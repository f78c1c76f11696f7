#include "deepconn/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deepconn/error.hpp"

namespace deepconn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::SpacingMismatch: return "SpacingMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NotDicom: return "NotDicom";
    case ErrorCode::UnsupportedTransferSyntax: return "UnsupportedTransferSyntax";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::UnsupportedPixelFormat: return "UnsupportedPixelFormat";
    case ErrorCode::UnsupportedOrientation: return "UnsupportedOrientation";
    case ErrorCode::InconsistentGeometry: return "InconsistentGeometry";
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::NonUniformGap: return "NonUniformGap";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnsupportedElementType: return "UnsupportedElementType";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::EmptyRoi: return "EmptyRoi";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::OverlapTooLarge: return "OverlapTooLarge";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateCamera: return "DegenerateCamera";
    case ErrorCode::ContourExceedsSheet: return "ContourExceedsSheet";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ManifestError: return "ManifestError";
  }
  return "Unknown";
}

double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : a;
}

std::uint32_t max_value(Depth depth) { return depth == Depth::U8 ? 255u : 65535u; }

std::size_t bytes_per_voxel(Depth depth) { return depth == Depth::U8 ? 1 : 2; }

VoxelGrid::VoxelGrid(Dims dims, Vec3 spacing, Vec3 origin, Depth depth,
                     std::vector<std::uint16_t> values)
    : dims_(dims), spacing_(spacing), origin_(origin), depth_(depth), values_(std::move(values)) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be >= 1");
  }
  if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grid spacing must be > 0");
  }
  if (values_.size() != dims.count()) {
    throw Error(ErrorCode::InvalidArgument,
                "value count " + std::to_string(values_.size()) + " != " +
                    std::to_string(dims.count()));
  }
  if (depth == Depth::U8) {
    const bool fits = std::all_of(values_.begin(), values_.end(), [](std::uint16_t v) { return v <= 255; });
    if (!fits) throw Error(ErrorCode::InvalidArgument, "value exceeds 8-bit depth");
  }
}

VoxelGrid VoxelGrid::filled(Dims dims, Vec3 spacing, Vec3 origin, Depth depth, std::uint16_t value) {
  return VoxelGrid(dims, spacing, origin, depth, std::vector<std::uint16_t>(dims.count(), value));
}

bool VoxelGrid::same_geometry(const VoxelGrid& other) const {
  return dims_ == other.dims_ && spacing_ == other.spacing_ && origin_ == other.origin_ &&
         depth_ == other.depth_;
}

bool spacing_equal(Vec3 a, Vec3 b) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::abs(a[i] - b[i]) > 1e-6 * std::max(std::abs(a[i]), std::abs(b[i]))) return false;
  }
  return true;
}

Image2D slice_z(const VoxelGrid& grid, std::size_t z) {
  const auto& d = grid.dims();
  if (z >= d.nz) throw Error(ErrorCode::OutOfBounds, "slice index " + std::to_string(z));
  const auto plane = d.nx * d.ny;
  const auto begin = grid.values().begin() + static_cast<std::ptrdiff_t>(plane * z);
  return Image2D{d.nx, d.ny, std::vector<std::uint16_t>(begin, begin + static_cast<std::ptrdiff_t>(plane))};
}

CineStack::CineStack(std::vector<VoxelGrid> frames, double cycle_duration)
    : frames_(std::move(frames)), cycle_duration_(cycle_duration) {
  if (frames_.size() < 2) throw Error(ErrorCode::InvalidArgument, "cine stack needs >= 2 frames");
  if (!(cycle_duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "cycle duration must be > 0");
  for (const auto& f : frames_) {
    if (!f.same_geometry(frames_.front())) {
      throw Error(ErrorCode::GeometryMismatch, "cine frames differ in geometry");
    }
  }
}

std::size_t BodyMask::count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

VoxelCoord world_to_voxel(const VoxelGrid& grid, Vec3 world_mm) {
  VoxelCoord out;
  for (std::size_t i = 0; i < 3; ++i) {
    out.position[i] = (world_mm[i] - grid.origin()[i]) / grid.spacing()[i];
    const double hi = static_cast<double>(grid.dims()[i] - 1);
    if (out.position[i] < 0.0 || out.position[i] > hi) out.out_of_bounds = true;
  }
  return out;
}

Vec3 voxel_to_world(const VoxelGrid& grid, Vec3 voxel) {
  Vec3 out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = grid.origin()[i] + voxel[i] * grid.spacing()[i];
  return out;
}

double sample_trilinear(const VoxelGrid& grid, Vec3 v) {
  const auto& d = grid.dims();
  std::size_t base[3];
  double frac[3];
  for (std::size_t i = 0; i < 3; ++i) {
    const double hi = static_cast<double>(d[i] - 1);
    if (!(v[i] >= 0.0 && v[i] <= hi)) {
      throw Error(ErrorCode::OutOfBounds, "sample outside lattice on axis " + std::to_string(i));
    }
    // On the upper face the cell below is used with weight 1 on its far corner.
    const double fl = std::min(std::floor(v[i]), std::max(hi - 1.0, 0.0));
    base[i] = static_cast<std::size_t>(fl);
    frac[i] = v[i] - fl;
  }
  const std::size_t x1 = std::min(base[0] + 1, d.nx - 1);
  const std::size_t y1 = std::min(base[1] + 1, d.ny - 1);
  const std::size_t z1 = std::min(base[2] + 1, d.nz - 1);
  const auto [fx, fy, fz] = std::array{frac[0], frac[1], frac[2]};

  const double c00 = grid.at(base[0], base[1], base[2]) * (1 - fx) + grid.at(x1, base[1], base[2]) * fx;
  const double c10 = grid.at(base[0], y1, base[2]) * (1 - fx) + grid.at(x1, y1, base[2]) * fx;
  const double c01 = grid.at(base[0], base[1], z1) * (1 - fx) + grid.at(x1, base[1], z1) * fx;
  const double c11 = grid.at(base[0], y1, z1) * (1 - fx) + grid.at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

std::uint16_t percentile(std::span<const std::uint16_t> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::OutOfRange, "percentile outside [0,100]");
  // Counting sort: values are at most 16 bits.
  std::vector<std::size_t> histogram(65536, 0);
  for (auto v : values) ++histogram[v];
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::size_t seen = 0;
  for (std::size_t v = 0; v < histogram.size(); ++v) {
    seen += histogram[v];
    if (seen >= rank) return static_cast<std::uint16_t>(v);
  }
  return 65535;
}

std::uint16_t percentile(const VoxelGrid& grid, double p) { return percentile(grid.values(), p); }

namespace {

// Labels 6-connected components of `inside`; returns per-voxel labels
// (0 = background) and component sizes indexed by label - 1. Labels are
// assigned in order of each component's lowest flat index.
std::pair<std::vector<std::uint32_t>, std::vector<std::size_t>> label_components(
    const Dims& d, const std::vector<std::uint8_t>& inside) {
  std::vector<std::uint32_t> labels(d.count(), 0);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  const std::size_t plane = d.nx * d.ny;
  for (std::size_t seed = 0; seed < d.count(); ++seed) {
    if (!inside[seed] || labels[seed] != 0) continue;
    const auto label = static_cast<std::uint32_t>(sizes.size() + 1);
    std::size_t size = 0;
    labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const std::size_t x = i % d.nx;
      const std::size_t y = (i / d.nx) % d.ny;
      const std::size_t z = i / plane;
      auto visit = [&](std::size_t j) {
        if (inside[j] && labels[j] == 0) {
          labels[j] = label;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < d.nx) visit(i + 1);
      if (y > 0) visit(i - d.nx);
      if (y + 1 < d.ny) visit(i + d.nx);
      if (z > 0) visit(i - plane);
      if (z + 1 < d.nz) visit(i + plane);
    }
    sizes.push_back(size);
  }
  return {std::move(labels), std::move(sizes)};
}

}  // namespace

BodyMask largest_component_mask(const VoxelGrid& grid, std::uint16_t threshold) {
  const auto& d = grid.dims();
  std::vector<std::uint8_t> inside(d.count());
  const auto values = grid.values();
  for (std::size_t i = 0; i < inside.size(); ++i) inside[i] = values[i] >= threshold ? 1 : 0;

  auto [labels, sizes] = label_components(d, inside);
  if (sizes.empty()) throw Error(ErrorCode::EmptyMask, "no voxel reaches the threshold");

  // Strictly-greater comparison keeps the earliest (lowest flat index) label on ties.
  std::size_t best = 0;
  for (std::size_t k = 1; k < sizes.size(); ++k) {
    if (sizes[k] > sizes[best]) best = k;
  }
  const auto keep = static_cast<std::uint32_t>(best + 1);
  BodyMask mask{d, std::vector<std::uint8_t>(d.count(), 0)};
  for (std::size_t i = 0; i < labels.size(); ++i) mask.occupied[i] = labels[i] == keep ? 1 : 0;
  return mask;
}

std::size_t count_components(const BodyMask& mask) {
  return label_components(mask.dims, mask.occupied).second.size();
}

VoxelGrid apply_mask(const VoxelGrid& grid, const BodyMask& mask) {
  if (!(mask.dims == grid.dims())) throw Error(ErrorCode::GeometryMismatch, "mask dims differ from grid");
  std::vector<std::uint16_t> out(grid.values().begin(), grid.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.occupied[i]) out[i] = 0;
  }
  return VoxelGrid(grid.dims(), grid.spacing(), grid.origin(), grid.depth(), std::move(out));
}

VoxelGrid embed_cine_frame(const VoxelGrid& base, const VoxelGrid& frame, Index3 offset) {
  const auto& bd = base.dims();
  const auto& fd = frame.dims();
  const std::int64_t off[3] = {offset.x, offset.y, offset.z};
  for (std::size_t i = 0; i < 3; ++i) {
    if (off[i] < 0 || off[i] + static_cast<std::int64_t>(fd[i]) > static_cast<std::int64_t>(bd[i])) {
      throw Error(ErrorCode::OutOfBounds, "placed frame exceeds base extent on axis " + std::to_string(i));
    }
  }
  if (!spacing_equal(base.spacing(), frame.spacing())) {
    throw Error(ErrorCode::SpacingMismatch, "frame spacing differs from base");
  }
  if (base.depth() != frame.depth()) {
    throw Error(ErrorCode::InvalidArgument, "frame depth differs from base");
  }
  std::vector<std::uint16_t> out(base.values().begin(), base.values().end());
  for (std::size_t z = 0; z < fd.nz; ++z) {
    for (std::size_t y = 0; y < fd.ny; ++y) {
      const auto dst = base.index(static_cast<std::size_t>(off[0]), static_cast<std::size_t>(off[1]) + y,
                                  static_cast<std::size_t>(off[2]) + z);
      const auto src = frame.index(0, y, z);
      std::copy_n(frame.values().begin() + static_cast<std::ptrdiff_t>(src), fd.nx,
                  out.begin() + static_cast<std::ptrdiff_t>(dst));
    }
  }
  return VoxelGrid(bd, base.spacing(), base.origin(), base.depth(), std::move(out));
}

}  // namespace deepconn
