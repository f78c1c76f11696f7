#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepconn/volume.hpp"

namespace deepconn {

/// Parsed MetaImage header. Only 3D, uncompressed, little-endian
/// MET_UCHAR / MET_USHORT images with an external data file are accepted.
struct MhdHeader {
  Dims dim_size{};
  Vec3 element_spacing{1.0, 1.0, 1.0};
  Vec3 offset{};
  Depth element_type = Depth::U16;
  std::string element_data_file;
};

/// Header text in a fixed key order, so identical grids give identical bytes.
std::string format_mhd_header(const VoxelGrid& grid, const std::string& data_file);
MhdHeader parse_mhd_header(const std::string& text);

/// Headerless little-endian voxel bytes, x-fastest.
std::vector<std::uint8_t> encode_raw(const VoxelGrid& grid);
VoxelGrid decode_raw(const MhdHeader& header, const std::vector<std::uint8_t>& bytes);

/// Writes the header and the RAW file. The header refers to the RAW file by
/// its path relative to the header's directory.
void write_mhd(const VoxelGrid& grid, const std::filesystem::path& header_path,
               const std::filesystem::path& raw_path);
/// Convenience: RAW file next to the header with the extension replaced.
void write_mhd(const VoxelGrid& grid, const std::filesystem::path& header_path);

VoxelGrid read_mhd(const std::filesystem::path& header_path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace deepconn
