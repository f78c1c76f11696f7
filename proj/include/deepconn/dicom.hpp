#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepconn/volume.hpp"

namespace deepconn {

/// Explicit VR little endian; the only transfer syntax the parser accepts.
inline constexpr const char* kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

/// One uncompressed single-frame monochrome slice.
struct DicomSlice {
  std::size_t rows = 0;
  std::size_t columns = 0;
  double row_spacing = 0.0;     // PixelSpacing[0], mm between rows (y)
  double column_spacing = 0.0;  // PixelSpacing[1], mm between columns (x)
  double slice_thickness = 0.0;
  Vec3 image_position;
  unsigned bits_allocated = 16;
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
  std::optional<std::int64_t> instance_number;
  /// Rescaled values (stored * slope + intercept), row-major, x-fastest.
  std::vector<double> pixels;
};

/// Parses the explicit-VR little-endian subset. Throws NotDicom,
/// UnsupportedTransferSyntax, MissingTag, UnsupportedPixelFormat or
/// UnsupportedOrientation.
DicomSlice parse_dicom_file(std::span<const std::uint8_t> bytes);
DicomSlice read_dicom_file(const std::filesystem::path& path);

/// Sorts slices by z and stacks them into one acquisition block. The z
/// spacing is the median inter-slice gap and the origin is the first slice
/// position.
VoxelGrid assemble_series(std::vector<DicomSlice> slices);

/// All regular files in `dir`, sorted by name.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir);

/// Options for the fixture writer. `omit_tags` drops elements by
/// (group << 16 | element), which lets tests build deliberately broken files.
struct DicomEncodeOptions {
  std::string transfer_syntax = kExplicitVrLittleEndian;
  std::vector<std::uint32_t> omit_tags;
};

/// Minimal explicit-VR LE writer for test and phantom fixtures. Pixel values
/// must be integral and representable in `bits_allocated`; they are written
/// with slope 1 and intercept 0 unless the slice says otherwise, in which case
/// the stored value is (v - intercept) / slope.
std::vector<std::uint8_t> encode_dicom(const DicomSlice& slice, const DicomEncodeOptions& options = {});

/// Slice `z` of a block as a DicomSlice (positions from the grid geometry).
DicomSlice dicom_slice_from_grid(const VoxelGrid& block, std::size_t z);

}  // namespace deepconn
