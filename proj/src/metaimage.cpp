#include "deepconn/metaimage.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "deepconn/error.hpp"

namespace deepconn {

namespace {

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto ptr = std::to_chars(buf.data(), buf.data() + buf.size(), v).ptr;
  std::string s(buf.data(), ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> numbers(const std::string& key, const std::string& value, std::size_t expected) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string token;
  while (in >> token) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw Error(ErrorCode::MalformedHeader, key + ": not a number: " + token);
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw Error(ErrorCode::MalformedHeader, key + ": expected " + std::to_string(expected) + " values");
  }
  return out;
}

bool is_true(const std::string& v) { return v == "True" || v == "true" || v == "TRUE" || v == "1"; }

}  // namespace

std::string format_mhd_header(const VoxelGrid& grid, const std::string& data_file) {
  const auto& d = grid.dims();
  const auto& s = grid.spacing();
  const auto& o = grid.origin();
  std::ostringstream out;
  out << "ObjectType = Image\n"
      << "NDims = 3\n"
      << "BinaryData = True\n"
      << "BinaryDataByteOrderMSB = False\n"
      << "CompressedData = False\n"
      << "TransformMatrix = 1 0 0 0 1 0 0 0 1\n"
      << "Offset = " << format_number(o.x) << ' ' << format_number(o.y) << ' ' << format_number(o.z) << '\n'
      << "CenterOfRotation = 0 0 0\n"
      << "AnatomicalOrientation = RAI\n"
      << "ElementSpacing = " << format_number(s.x) << ' ' << format_number(s.y) << ' ' << format_number(s.z)
      << '\n'
      << "DimSize = " << d.nx << ' ' << d.ny << ' ' << d.nz << '\n'
      << "ElementType = " << (grid.depth() == Depth::U8 ? "MET_UCHAR" : "MET_USHORT") << '\n'
      << "ElementDataFile = " << data_file << '\n';
  return out.str();
}

MhdHeader parse_mhd_header(const std::string& text) {
  std::map<std::string, std::string> fields;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::MalformedHeader, "line without '=': " + line);
    fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto field = [&fields](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::MalformedHeader, "missing key " + key);
    return it->second;
  };

  MhdHeader header;
  if (numbers("NDims", field("NDims"), 1)[0] != 3.0) throw Error(ErrorCode::MalformedHeader, "NDims must be 3");
  const auto dims = numbers("DimSize", field("DimSize"), 3);
  for (double v : dims) {
    if (v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw Error(ErrorCode::MalformedHeader, "DimSize entries must be positive integers");
    }
  }
  header.dim_size = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                     static_cast<std::size_t>(dims[2])};
  if (fields.count("ElementSpacing")) {
    const auto s = numbers("ElementSpacing", fields["ElementSpacing"], 3);
    header.element_spacing = {s[0], s[1], s[2]};
  }
  for (const char* key : {"Offset", "Origin", "Position"}) {
    if (fields.count(key)) {
      const auto o = numbers(key, fields[key], 3);
      header.offset = {o[0], o[1], o[2]};
      break;
    }
  }
  const std::string& type = field("ElementType");
  if (type == "MET_UCHAR") {
    header.element_type = Depth::U8;
  } else if (type == "MET_USHORT") {
    header.element_type = Depth::U16;
  } else {
    throw Error(ErrorCode::UnsupportedElementType, type);
  }
  for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
    if (fields.count(key) && is_true(fields[key])) {
      throw Error(ErrorCode::MalformedHeader, "big-endian data is not supported");
    }
  }
  if (fields.count("CompressedData") && is_true(fields["CompressedData"])) {
    throw Error(ErrorCode::MalformedHeader, "compressed data is not supported");
  }
  for (const char* key : {"TransformMatrix", "Orientation", "Rotation"}) {
    if (fields.count(key) && numbers(key, fields[key], 9) != std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1}) {
      throw Error(ErrorCode::MalformedHeader, "only identity orientation is supported");
    }
  }
  header.element_data_file = field("ElementDataFile");
  if (header.element_data_file == "LOCAL" || header.element_data_file.rfind("LIST", 0) == 0 ||
      header.element_data_file.find('%') != std::string::npos) {
    throw Error(ErrorCode::MalformedHeader, "only a single external data file is supported");
  }
  return header;
}

std::vector<std::uint8_t> encode_raw(const VoxelGrid& grid) {
  std::vector<std::uint8_t> out;
  const bool wide = grid.depth() == Depth::U16;
  out.reserve(grid.values().size() * (wide ? 2 : 1));
  for (auto v : grid.values()) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    if (wide) out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

VoxelGrid decode_raw(const MhdHeader& header, const std::vector<std::uint8_t>& bytes) {
  const std::size_t count = header.dim_size.count();
  const std::size_t width = bytes_per_voxel(header.element_type);
  if (bytes.size() != count * width) {
    throw Error(ErrorCode::SizeMismatch, "RAW holds " + std::to_string(bytes.size()) + " bytes, header expects " +
                                             std::to_string(count * width));
  }
  std::vector<std::uint16_t> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = width == 1 ? bytes[i] : static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  return VoxelGrid(header.dim_size, header.element_spacing, header.offset, header.element_type, std::move(values));
}

void write_mhd(const VoxelGrid& grid, const std::filesystem::path& header_path,
               const std::filesystem::path& raw_path) {
  const auto header_dir = header_path.has_parent_path() ? header_path.parent_path() : std::filesystem::path(".");
  const auto raw_dir = raw_path.has_parent_path() ? raw_path.parent_path() : std::filesystem::path(".");
  std::string ref = std::filesystem::weakly_canonical(raw_dir) == std::filesystem::weakly_canonical(header_dir)
                        ? raw_path.filename().generic_string()
                        : std::filesystem::relative(raw_path, header_dir).generic_string();
  write_file_bytes(raw_path, encode_raw(grid));
  write_text_file(header_path, format_mhd_header(grid, ref));
}

void write_mhd(const VoxelGrid& grid, const std::filesystem::path& header_path) {
  auto raw = header_path;
  raw.replace_extension(".raw");
  write_mhd(grid, header_path, raw);
}

VoxelGrid read_mhd(const std::filesystem::path& header_path) {
  const auto text_bytes = read_file_bytes(header_path);
  const MhdHeader header = parse_mhd_header(std::string(text_bytes.begin(), text_bytes.end()));
  std::filesystem::path data = header.element_data_file;
  if (data.is_relative()) data = header_path.parent_path() / data;
  return decode_raw(header, read_file_bytes(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace deepconn
