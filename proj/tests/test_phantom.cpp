#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include "deepconn/dicom.hpp"
#include "deepconn/error.hpp"
#include "deepconn/phantom.hpp"
#include "deepconn/stitch.hpp"

using namespace deepconn;

namespace {

std::size_t index_of(double u, std::size_t n) {
  return static_cast<std::size_t>(std::lround((u + 1.0) * static_cast<double>(n) / 2.0 - 0.5));
}

std::uint16_t at_normalized(const VoxelGrid& g, double u, double v, double w) {
  return g.at(index_of(u, g.dims().nx), index_of(v, g.dims().ny), index_of(w, g.dims().nz));
}

}  // namespace

TEST_CASE("normalized coordinates") {
  CHECK(normalized_coordinate(0, 4) == -0.75);
  CHECK(normalized_coordinate(3, 4) == 0.75);
  CHECK(index_of(normalized_coordinate(17, 64), 64) == 17);
}

TEST_CASE("anatomy at known positions") {
  PhantomSpec spec;
  const VoxelGrid g = make_phantom_body(spec);
  const auto& t = spec.tissue;
  using namespace layout;
  CHECK(at_normalized(g, 0.98, 0.98, 0.98) == t.background);
  CHECK(at_normalized(g, kHeartCenter[0], kHeartCenter[1], kHeartCenter[2]) == t.muscle);
  CHECK(at_normalized(g, kLungCenterX, kLungCenter[0], kLungCenter[1]) == t.lung);
  CHECK(at_normalized(g, -kLungCenterX, kLungCenter[0], kLungCenter[1]) == t.lung);
  CHECK(at_normalized(g, 0.0, kSpineY, 0.0) == t.bone);
  CHECK(at_normalized(g, 0.83, 0.0, 0.0) == t.fat);
  CHECK(at_normalized(g, 0.3, 0.3, -0.5) == t.muscle);
  // The border is empty, so in-plane shifts of a few voxels lose nothing.
  for (std::size_t z = 0; z < g.dims().nz; ++z)
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(g.at(i, 0, z) == 0);
      CHECK(g.at(0, i, z) == 0);
      CHECK(g.at(i, 63, z) == 0);
      CHECK(g.at(63, i, z) == 0);
    }
}

TEST_CASE("ribs make thorax slices differ along z") {
  const VoxelGrid g = make_phantom_body({});
  const std::size_t z0 = index_of(0.2, g.dims().nz);
  std::size_t distinct = 0;
  for (std::size_t z = z0; z < z0 + 6; ++z) distinct += !(slice_z(g, z) == slice_z(g, z + 1));
  CHECK(distinct >= 2);
}

TEST_CASE("deterministic and seed-sensitive") {
  PhantomSpec spec;
  spec.noise_sigma = 5.0;
  spec.seed = 4;
  CHECK(make_phantom_body(spec) == make_phantom_body(spec));
  PhantomSpec other = spec;
  other.seed = 5;
  CHECK_FALSE(make_phantom_body(spec) == make_phantom_body(other));
}

TEST_CASE("uniform noise statistics") {
  const auto flat = VoxelGrid::filled({64, 64, 32}, {1, 1, 1}, {}, Depth::U16, 1000);
  const double sigma = 11.5;
  const VoxelGrid noisy = add_uniform_noise(flat, sigma, 99);
  double sum = 0, sum2 = 0, lo = 1e9, hi = -1e9;
  for (auto v : noisy.values()) {
    const double d = v - 1000.0;
    sum += d;
    sum2 += d * d;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double n = static_cast<double>(noisy.values().size());
  CHECK(std::abs(sum / n) < 0.2);
  CHECK(std::sqrt(sum2 / n) == doctest::Approx(sigma).epsilon(0.02));
  CHECK(hi <= std::round(sigma * std::sqrt(3.0)));
  CHECK(lo >= -std::round(sigma * std::sqrt(3.0)));
}

TEST_CASE("bad specs") {
  PhantomSpec small;
  small.dims = {16, 64, 64};
  CHECK_THROWS_AS(make_phantom_body(small), Error);
  PhantomSpec unordered;
  unordered.tissue.fat = 10;
  CHECK_THROWS_AS(make_phantom_body(unordered), Error);
}

TEST_CASE("split blocks carry the ground truth") {
  const VoxelGrid g = make_phantom_body({});
  const auto split = split_blocks(g, 3, {5, 8}, {{2, -1}, {0, 3}});
  REQUIRE(split.blocks.size() == 3);
  CHECK(split.truth.block_start == std::vector<std::size_t>{0, 27, 56});
  CHECK(split.blocks[0].dims().nz == 32);
  CHECK(split.blocks[1].dims().nz == 37);
  CHECK(split.blocks[2].dims().nz == 40);
  const Shift2 acc[3] = {{0, 0}, {2, -1}, {2, 2}};
  for (std::size_t k = 0; k < 3; ++k) {
    const VoxelGrid back = shift_in_plane(split.blocks[k], acc[k]);
    const std::size_t start = split.truth.block_start[k];
    for (std::size_t z = 0; z < back.dims().nz; ++z)
      for (std::size_t y = 4; y < 60; ++y)
        for (std::size_t x = 4; x < 60; ++x) REQUIRE(back.at(x, y, z) == g.at(x, y, start + z));
    CHECK(split.blocks[k].origin().z == doctest::Approx(static_cast<double>(start) * g.spacing().z));
  }
  try {
    split_blocks(g, 3, {33, 5}, {{0, 0}, {0, 0}});
    FAIL("expected OverlapTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OverlapTooLarge);
  }
  const auto truth = nlohmann::json::parse(split_truth_json(split.truth));
  CHECK(truth["junctions"][1]["overlap"] == 8);
  CHECK(truth["junctions"][0]["dy"] == -1);
}

TEST_CASE("cine phantom peaks and motion") {
  PhantomSpec spec;
  CinePhantomSpec cs;
  cs.first_slice = default_cine_first_slice(spec, 3);
  cs.frame_counts = {9, 12, 10};
  cs.phase_offsets = {0.3, 0.96, 0.0};
  const CinePhantom cine = make_phantom_cine(spec, cs);
  CHECK(cine.peak_index == std::vector<std::size_t>{6, 0, 0});
  CHECK(cine.offset == Index3{0, 0, static_cast<std::int64_t>(cs.first_slice)});
  CHECK_FALSE(cine.series[2].frames[0] == cine.series[2].frames[5]);

  cs.amplitude = 0.0;
  const CinePhantom still = make_phantom_cine(spec, cs);
  for (const auto& s : still.series)
    for (const auto& f : s.frames) CHECK(f == s.frames.front());
}

TEST_CASE("cine DICOM export") {
  testing::TempDir dir("cine_dicom");
  PhantomSpec spec;
  CinePhantomSpec cs;
  cs.first_slice = 40;
  cs.frame_counts = {3, 4};
  cs.phase_offsets = {0.0, 0.5};
  const CinePhantom cine = make_phantom_cine(spec, cs);
  write_phantom_cine_dicom(cine, spec, dir.path());
  const auto files = list_files(dir / "loc_01");
  REQUIRE(files.size() == 4);
  const DicomSlice s = read_dicom_file(files[2]);
  CHECK(s.instance_number == 3);
  CHECK(s.image_position.z == doctest::Approx(41.0));
  std::vector<double> expected(cine.series[1].frames[2].pixels.begin(), cine.series[1].frames[2].pixels.end());
  CHECK(s.pixels == expected);
}
