#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace deepconn {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double dot(Vec3 a, Vec3 b);
Vec3 cross(Vec3 a, Vec3 b);
double norm(Vec3 a);
Vec3 normalized(Vec3 a);

/// Integer voxel triple, used for offsets that may be negative.
struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

/// In-plane integer translation in voxels.
struct Shift2 {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Shift2&, const Shift2&) = default;
};

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  std::size_t operator[](std::size_t i) const { return i == 0 ? nx : (i == 1 ? ny : nz); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

enum class Depth { U8, U16 };

std::uint32_t max_value(Depth depth);
std::size_t bytes_per_voxel(Depth depth);

/// Scalar intensity lattice with physical geometry. Values are stored
/// x-fastest, then y, then z. Immutable after construction.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(Dims dims, Vec3 spacing, Vec3 origin, Depth depth, std::vector<std::uint16_t> values);

  /// Grid with every voxel set to `value`.
  static VoxelGrid filled(Dims dims, Vec3 spacing, Vec3 origin, Depth depth, std::uint16_t value);

  const Dims& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  Depth depth() const { return depth_; }
  std::span<const std::uint16_t> values() const { return values_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  std::uint16_t at(std::size_t x, std::size_t y, std::size_t z) const { return values_[index(x, y, z)]; }

  /// Same dims, spacing, origin and depth.
  bool same_geometry(const VoxelGrid& other) const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Dims dims_{};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{};
  Depth depth_ = Depth::U16;
  std::vector<std::uint16_t> values_;
};

/// Spacings are considered equal within a relative tolerance of 1e-6; DICOM
/// decimal strings and median slice gaps rarely reproduce a spacing to the ulp.
bool spacing_equal(Vec3 a, Vec3 b);

/// Single 2D image, x-fastest.
struct Image2D {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(std::size_t x, std::size_t y) const { return pixels[x + width * y]; }
  friend bool operator==(const Image2D&, const Image2D&) = default;
};

/// The z-slice of a grid as a 2D image.
Image2D slice_z(const VoxelGrid& grid, std::size_t z);

/// Ordered time frames of one normalized cycle. Frame 0 is peak inhale.
class CineStack {
 public:
  CineStack(std::vector<VoxelGrid> frames, double cycle_duration);

  const std::vector<VoxelGrid>& frames() const { return frames_; }
  std::size_t frame_count() const { return frames_.size(); }
  double cycle_duration() const { return cycle_duration_; }

 private:
  std::vector<VoxelGrid> frames_;
  double cycle_duration_ = 1.0;
};

/// Boolean occupancy over a grid's lattice (1 = inside).
struct BodyMask {
  Dims dims{};
  std::vector<std::uint8_t> occupied;

  bool at(std::size_t x, std::size_t y, std::size_t z) const {
    return occupied[x + dims.nx * (y + dims.ny * z)] != 0;
  }
  std::size_t count() const;
};

struct VoxelCoord {
  Vec3 position;
  bool out_of_bounds = false;
};

VoxelCoord world_to_voxel(const VoxelGrid& grid, Vec3 world_mm);
Vec3 voxel_to_world(const VoxelGrid& grid, Vec3 voxel);

/// Trilinear interpolation of the 8 lattice neighbours. Throws OutOfBounds
/// outside [0, dims-1] on any axis.
double sample_trilinear(const VoxelGrid& grid, Vec3 voxel);

/// Nearest-rank percentile: the value at rank ceil(p/100 * N) (1-based),
/// with p = 0 giving the minimum.
std::uint16_t percentile(std::span<const std::uint16_t> values, double p);
std::uint16_t percentile(const VoxelGrid& grid, double p);

/// Largest 6-connected component among voxels >= threshold. Equal-size
/// components are resolved in favour of the one containing the lowest flat
/// index. Throws EmptyMask if nothing reaches the threshold.
BodyMask largest_component_mask(const VoxelGrid& grid, std::uint16_t threshold);

/// Number of 6-connected components of a mask.
std::size_t count_components(const BodyMask& mask);

/// Voxels outside the mask set to zero.
VoxelGrid apply_mask(const VoxelGrid& grid, const BodyMask& mask);

/// Hard replacement of the box [offset, offset + frame.dims) by the frame.
VoxelGrid embed_cine_frame(const VoxelGrid& base, const VoxelGrid& frame, Index3 offset);

}  // namespace deepconn
