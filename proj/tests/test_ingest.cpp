#include <algorithm>
#include <fstream>

#include "doctest.h"
#include "support.hpp"

#include "deepconn/dicom.hpp"
#include "deepconn/error.hpp"
#include "deepconn/hashing.hpp"
#include "deepconn/metaimage.hpp"
#include "deepconn/phantom.hpp"

using namespace deepconn;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

DicomSlice small_slice(double z, std::size_t rows = 4, std::size_t cols = 5) {
  DicomSlice s;
  s.rows = rows;
  s.columns = cols;
  s.row_spacing = 0.5;
  s.column_spacing = 0.5;
  s.slice_thickness = 1.0;
  s.image_position = {0.0, 0.0, z};
  s.pixels.resize(rows * cols);
  for (std::size_t i = 0; i < s.pixels.size(); ++i) s.pixels[i] = static_cast<double>(i + 10 * static_cast<std::size_t>(z));
  return s;
}

// Overwrites the 2-byte US value of an explicit-VR element in place.
void patch_us(std::vector<std::uint8_t>& bytes, std::uint16_t group, std::uint16_t element, std::uint16_t value) {
  const std::uint8_t key[6] = {static_cast<std::uint8_t>(group & 0xFF), static_cast<std::uint8_t>(group >> 8),
                               static_cast<std::uint8_t>(element & 0xFF), static_cast<std::uint8_t>(element >> 8),
                               'U', 'S'};
  auto it = std::search(bytes.begin() + 132, bytes.end(), std::begin(key), std::end(key));
  REQUIRE(it != bytes.end());
  it[8] = static_cast<std::uint8_t>(value & 0xFF);
  it[9] = static_cast<std::uint8_t>(value >> 8);
}

}  // namespace

TEST_CASE("phantom DICOM slice round-trips value-exact") {
  PhantomSpec spec;
  spec.dims = {64, 64, 40};
  const VoxelGrid body = make_phantom_body(spec);
  const DicomSlice slice = dicom_slice_from_grid(body, 20);
  CHECK(slice.rows == 64);
  CHECK(slice.columns == 64);
  const DicomSlice back = parse_dicom_file(encode_dicom(slice));
  CHECK(back.rows == 64);
  CHECK(back.columns == 64);
  CHECK(back.row_spacing == 0.5);
  CHECK(back.column_spacing == 0.5);
  CHECK(back.slice_thickness == 1.0);
  CHECK(back.image_position == slice.image_position);
  CHECK(back.pixels == slice.pixels);
}

TEST_CASE("rescale is applied on parse") {
  DicomSlice s = small_slice(0);
  s.rescale_slope = 2.0;
  s.rescale_intercept = -5.0;
  for (auto& p : s.pixels) p = p * 2.0 - 5.0;
  const DicomSlice back = parse_dicom_file(encode_dicom(s));
  CHECK(back.pixels == s.pixels);
  CHECK(back.rescale_slope == 2.0);
  CHECK(back.rescale_intercept == -5.0);
}

TEST_CASE("8-bit pixel data") {
  DicomSlice s = small_slice(0, 3, 3);
  s.bits_allocated = 8;
  const DicomSlice back = parse_dicom_file(encode_dicom(s));
  CHECK(back.bits_allocated == 8);
  CHECK(back.pixels == s.pixels);
}

TEST_CASE("DICOM rejects") {
  const auto good = encode_dicom(small_slice(0));

  SUBCASE("missing magic") {
    auto bad = good;
    bad[129] = 'X';
    CHECK(code_of([&] { parse_dicom_file(bad); }) == ErrorCode::NotDicom);
    CHECK(code_of([&] { parse_dicom_file(std::vector<std::uint8_t>(100, 0)); }) == ErrorCode::NotDicom);
  }
  SUBCASE("JPEG transfer syntax") {
    DicomEncodeOptions opt;
    opt.transfer_syntax = "1.2.840.10008.1.2.4.50";
    CHECK(code_of([&] { parse_dicom_file(encode_dicom(small_slice(0), opt)); }) ==
          ErrorCode::UnsupportedTransferSyntax);
  }
  SUBCASE("implicit VR") {
    DicomEncodeOptions opt;
    opt.transfer_syntax = "1.2.840.10008.1.2";
    CHECK(code_of([&] { parse_dicom_file(encode_dicom(small_slice(0), opt)); }) ==
          ErrorCode::UnsupportedTransferSyntax);
  }
  SUBCASE("each required tag") {
    const std::uint32_t required[] = {0x00280010, 0x00280011, 0x00280030, 0x00180050, 0x00200032,
                                      0x00280100, 0x00280103, 0x7FE00010};
    for (auto t : required) {
      DicomEncodeOptions opt;
      opt.omit_tags = {t};
      CAPTURE(t);
      CHECK(code_of([&] { parse_dicom_file(encode_dicom(small_slice(0), opt)); }) == ErrorCode::MissingTag);
    }
  }
  SUBCASE("signed pixels") {
    auto bad = good;
    patch_us(bad, 0x0028, 0x0103, 1);
    CHECK(code_of([&] { parse_dicom_file(bad); }) == ErrorCode::UnsupportedPixelFormat);
  }
  SUBCASE("32-bit pixels") {
    auto bad = good;
    patch_us(bad, 0x0028, 0x0100, 32);
    CHECK(code_of([&] { parse_dicom_file(bad); }) == ErrorCode::UnsupportedPixelFormat);
  }
}

TEST_CASE("series assembly") {
  SUBCASE("shuffled slices are sorted by z") {
    const VoxelGrid g = assemble_series({small_slice(2), small_slice(0), small_slice(1)});
    CHECK(g.dims() == Dims{5, 4, 3});
    CHECK(g.origin() == Vec3{0, 0, 0});
    CHECK(g.spacing() == Vec3{0.5, 0.5, 1.0});
    for (std::size_t z = 0; z < 3; ++z) CHECK(g.at(0, 0, z) == 10 * z);
  }
  SUBCASE("mixed rows") {
    CHECK(code_of([] { assemble_series({small_slice(0, 64), small_slice(1, 65)}); }) ==
          ErrorCode::InconsistentGeometry);
  }
  SUBCASE("duplicate position") {
    CHECK(code_of([] { assemble_series({small_slice(5), small_slice(5)}); }) == ErrorCode::DuplicatePosition);
  }
  SUBCASE("uneven gaps") {
    CHECK(code_of([] { assemble_series({small_slice(0), small_slice(1), small_slice(2), small_slice(3.5)}); }) ==
          ErrorCode::NonUniformGap);
    CHECK_NOTHROW(assemble_series({small_slice(0), small_slice(1), small_slice(2.005)}));
  }
  SUBCASE("single slice") {
    CHECK(code_of([] { assemble_series({small_slice(0)}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("phantom series: write, parse, assemble is value-exact") {
  testing::TempDir dir("dicom");
  PhantomSpec spec;
  spec.dims = {48, 40, 36};
  spec.origin = {-12.0, 4.25, 100.0};
  const VoxelGrid body = add_uniform_noise(make_phantom_body(spec), 11.5, 4);
  const auto files = write_phantom_dicom_series(body, dir.path());
  CHECK(files.size() == 36);
  std::vector<DicomSlice> slices;
  for (const auto& f : list_files(dir.path())) slices.push_back(read_dicom_file(f));
  std::reverse(slices.begin(), slices.end());
  CHECK(assemble_series(slices) == body);
}

TEST_CASE("MHD header format") {
  const auto g = VoxelGrid::filled({64, 64, 40}, {0.5, 0.5, 1.0}, {0, 0, 0}, Depth::U16, 3);
  const std::string text = format_mhd_header(g, "vol.raw");
  CHECK(text.find("DimSize = 64 64 40\n") != std::string::npos);
  CHECK(text.find("ElementSpacing = 0.5 0.5 1.0\n") != std::string::npos);
  CHECK(text.find("ElementType = MET_USHORT\n") != std::string::npos);
  CHECK(text.find("BinaryDataByteOrderMSB = False\n") != std::string::npos);
  const MhdHeader h = parse_mhd_header(text);
  CHECK(h.dim_size == g.dims());
  CHECK(h.element_spacing == g.spacing());
  CHECK(h.element_data_file == "vol.raw");
}

TEST_CASE("MHD header rejects") {
  const auto g = VoxelGrid::filled({2, 2, 2}, {1, 1, 1}, {}, Depth::U8, 0);
  const std::string text = format_mhd_header(g, "v.raw");
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  CHECK(code_of([&] { parse_mhd_header(replaced("MET_UCHAR", "MET_FLOAT")); }) == ErrorCode::UnsupportedElementType);
  CHECK(code_of([&] { parse_mhd_header(replaced("NDims = 3", "NDims = 2")); }) == ErrorCode::MalformedHeader);
  CHECK(code_of([&] { parse_mhd_header(replaced("DimSize = 2 2 2", "DimSize = 2 two 2")); }) ==
        ErrorCode::MalformedHeader);
  CHECK(code_of([&] { parse_mhd_header("garbage"); }) == ErrorCode::MalformedHeader);
}

TEST_CASE("MHD write, read, write is byte-identical") {
  testing::TempDir dir("mhd");
  Lcg64 rng(17);
  for (int k = 0; k < 25; ++k) {
    const Dims d{1 + (rng.next() >> 60), 1 + (rng.next() >> 61), 1 + (rng.next() >> 61)};
    const Depth depth = k % 2 ? Depth::U8 : Depth::U16;
    const Vec3 spacing{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    const Vec3 origin{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100)};
    const VoxelGrid g = testing::random_grid(rng, d, depth, spacing, origin);
    write_mhd(g, dir / "a.mhd");
    const VoxelGrid back = read_mhd(dir / "a.mhd");
    CHECK(back == g);
    write_mhd(back, dir / "b.mhd");
    CHECK(sha256_file(dir / "a.raw") == sha256_file(dir / "b.raw"));
    const auto ha = read_file_bytes(dir / "a.mhd");
    auto hb = read_file_bytes(dir / "b.mhd");
    std::string ta(ha.begin(), ha.end()), tb(hb.begin(), hb.end());
    CHECK(tb.replace(tb.find("b.raw"), 5, "a.raw") == ta);
  }
}

TEST_CASE("RAW is little-endian x-fastest") {
  const VoxelGrid g({2, 1, 1}, {1, 1, 1}, {}, Depth::U16, {0x0102, 0x0304});
  CHECK(encode_raw(g) == std::vector<std::uint8_t>{0x02, 0x01, 0x04, 0x03});
}

TEST_CASE("truncated RAW is rejected") {
  testing::TempDir dir("trunc");
  Lcg64 rng(2);
  const VoxelGrid g = testing::random_grid(rng, {5, 4, 3}, Depth::U16);
  write_mhd(g, dir / "v.mhd");
  auto raw = read_file_bytes(dir / "v.raw");
  raw.pop_back();
  write_file_bytes(dir / "v.raw", raw);
  CHECK(code_of([&] { read_mhd(dir / "v.mhd"); }) == ErrorCode::SizeMismatch);
}
