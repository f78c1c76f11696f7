#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepconn/cine.hpp"
#include "deepconn/stitch.hpp"
#include "deepconn/volume.hpp"

namespace deepconn {

/// 64-bit linear congruential generator (Knuth MMIX constants). Fixtures
/// built from it are identical across platforms.
class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }
  /// Uniform in [0, 1) from the top 53 bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::uint64_t state_;
};

struct TissueIntensities {
  std::uint16_t background = 0;
  std::uint16_t lung = 30;
  std::uint16_t fat = 120;
  std::uint16_t muscle = 180;
  std::uint16_t bone = 230;
};

struct PhantomSpec {
  Dims dims{64, 64, 96};
  Vec3 spacing{0.5, 0.5, 1.0};
  Vec3 origin{};
  TissueIntensities tissue;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

/// Phantom anatomy in normalized coordinates: each axis maps voxel centres to
/// [-1, 1] via u = 2 (i + 0.5) / n - 1. Later structures overwrite earlier
/// ones in the order listed.
namespace layout {
inline constexpr double kFatSemi[3] = {0.88, 0.62, 0.94};
inline constexpr double kMuscleSemi[3] = {0.78, 0.52, 0.90};
inline constexpr double kLungCenterX = 0.36;  // lungs at +-x
inline constexpr double kLungCenter[2] = {-0.02, 0.38};  // (y, z)
inline constexpr double kLungSemi[3] = {0.26, 0.32, 0.42};
/// Rib shell: normalized muscle-ellipse radius band, thorax z band, and a
/// rib every kRibPeriodMm of kRibThicknessMm along z.
inline constexpr double kRibRadius[2] = {0.84, 0.94};
inline constexpr double kRibZ[2] = {-0.05, 0.80};
inline constexpr double kRibPeriodMm = 6.0;
inline constexpr double kRibThicknessMm = 2.0;
inline constexpr double kHeartCenter[3] = {0.0, -0.05, 0.30};
inline constexpr double kHeartRadius = 0.20;
/// Spine: cylinder along z through (0, kSpineY) with radius kSpineRadius,
/// spanning |u_z| <= kMuscleSemi[2].
inline constexpr double kSpineY = 0.32;
inline constexpr double kSpineRadius = 0.09;
}  // namespace layout

double normalized_coordinate(std::size_t index, std::size_t count);

/// Deterministic body-like volume (16-bit). Throws BadSpec for dims < 32,
/// unordered intensities or negative noise.
VoxelGrid make_phantom_body(const PhantomSpec& spec);

/// Adds uniform noise of standard deviation `sigma` (half-width sigma*sqrt(3))
/// in flat voxel order, rounding and clamping to the grid's depth.
VoxelGrid add_uniform_noise(const VoxelGrid& grid, double sigma, std::uint64_t seed);

struct SplitGroundTruth {
  std::vector<std::size_t> overlaps;
  std::vector<Shift2> shifts;
  /// First z index of each block in the source grid.
  std::vector<std::size_t> block_start;
};

struct SplitResult {
  std::vector<VoxelGrid> blocks;
  SplitGroundTruth truth;
};

/// Cuts `grid` into `n` overlapping z-blocks. Block k >= 1 starts
/// overlaps[k-1] slices early and stores b(x, y) = g(x + S.dx, y + S.dy),
/// where S is the sum of shifts[0..k-1], so stitching must apply +S.
SplitResult split_blocks(const VoxelGrid& grid, std::size_t n, const std::vector<std::size_t>& overlaps,
                         const std::vector<Shift2>& shifts);

struct CinePhantomSpec {
  /// Body z index of the first location; locations are consecutive slices.
  std::size_t first_slice = 0;
  /// Frames acquired per location; its size is the number of locations.
  std::vector<std::size_t> frame_counts;
  /// Cycle phase (fraction in [0, 1)) of each location's first frame.
  std::vector<double> phase_offsets;
  /// 0 freezes the anatomy; 1 is full motion.
  double amplitude = 1.0;
};

struct CinePhantom {
  std::vector<CineLocationSeries> series;
  /// Index of the frame closest to peak inhale, per location.
  std::vector<std::size_t> peak_index;
  /// Where the cine volumes sit inside the body phantom.
  Index3 offset;
  Vec3 origin;
};

/// Default first slice: a thorax range centred on the heart.
std::size_t default_cine_first_slice(const PhantomSpec& spec, std::size_t locations);

/// Breathing value at phase p: cos(2 pi p), 1 at peak inhale.
double breath_phase_value(double phase);

/// Per-location 2D series through the thorax. Heart radius and the
/// diaphragm band (centre-bottom third of each image) follow the breathing
/// value; the band rises with inhale so the default breath metric peaks there.
CinePhantom make_phantom_cine(const PhantomSpec& spec, const CinePhantomSpec& cine);

/// One DICOM file per slice (slice_0000.dcm, ...). Returns the paths.
std::vector<std::filesystem::path> write_phantom_dicom_series(const VoxelGrid& block,
                                                              const std::filesystem::path& dir);

/// loc_00/frame_000.dcm ... with instance numbers in acquisition order.
void write_phantom_cine_dicom(const CinePhantom& cine, const PhantomSpec& spec, const std::filesystem::path& dir);

/// Ground-truth records as JSON text.
std::string split_truth_json(const SplitGroundTruth& truth);
std::string cine_truth_json(const CinePhantom& cine);

}  // namespace deepconn
