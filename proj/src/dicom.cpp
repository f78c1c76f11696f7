#include "deepconn/dicom.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <string_view>

#include "deepconn/error.hpp"

namespace deepconn {

namespace {

constexpr std::uint32_t tag(std::uint16_t group, std::uint16_t element) {
  return (static_cast<std::uint32_t>(group) << 16) | element;
}

constexpr std::uint32_t kTransferSyntax = tag(0x0002, 0x0010);
constexpr std::uint32_t kSliceThickness = tag(0x0018, 0x0050);
constexpr std::uint32_t kInstanceNumber = tag(0x0020, 0x0013);
constexpr std::uint32_t kImagePosition = tag(0x0020, 0x0032);
constexpr std::uint32_t kImageOrientation = tag(0x0020, 0x0037);
constexpr std::uint32_t kSamplesPerPixel = tag(0x0028, 0x0002);
constexpr std::uint32_t kPhotometric = tag(0x0028, 0x0004);
constexpr std::uint32_t kNumberOfFrames = tag(0x0028, 0x0008);
constexpr std::uint32_t kRows = tag(0x0028, 0x0010);
constexpr std::uint32_t kColumns = tag(0x0028, 0x0011);
constexpr std::uint32_t kPixelSpacing = tag(0x0028, 0x0030);
constexpr std::uint32_t kBitsAllocated = tag(0x0028, 0x0100);
constexpr std::uint32_t kPixelRepresentation = tag(0x0028, 0x0103);
constexpr std::uint32_t kRescaleIntercept = tag(0x0028, 0x1052);
constexpr std::uint32_t kRescaleSlope = tag(0x0028, 0x1053);
constexpr std::uint32_t kPixelData = tag(0x7FE0, 0x0010);

constexpr std::uint32_t kItem = tag(0xFFFE, 0xE000);
constexpr std::uint32_t kItemDelimiter = tag(0xFFFE, 0xE00D);
constexpr std::uint32_t kSequenceDelimiter = tag(0xFFFE, 0xE0DD);
constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

bool has_long_length(std::string_view vr) {
  static constexpr std::array<std::string_view, 13> kLong = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                             "SV", "UC", "UN", "UR", "UT", "UV"};
  return std::find(kLong.begin(), kLong.end(), vr) != kLong.end();
}

struct Element {
  std::uint32_t tag = 0;
  std::string vr;
  std::span<const std::uint8_t> value;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  bool done() const { return pos_ >= bytes_.size(); }

  std::uint16_t peek_group() const {
    need(2);
    return static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  }

  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  // Reads one explicit-VR element. Undefined-length sequences are skipped
  // and returned with an empty value.
  Element next() {
    Element el;
    const std::uint16_t group = u16();
    const std::uint16_t element = u16();
    el.tag = tag(group, element);
    std::uint32_t length = 0;
    if (group == 0xFFFE) {
      length = u32();
    } else {
      const auto vr = take(2);
      el.vr.assign(vr.begin(), vr.end());
      if (has_long_length(el.vr)) {
        take(2);
        length = u32();
      } else {
        length = u16();
      }
    }
    if (length == kUndefinedLength) {
      if (el.tag == kPixelData) {
        throw Error(ErrorCode::UnsupportedTransferSyntax, "encapsulated pixel data");
      }
      if (el.vr != "SQ" && el.tag != kItem) {
        throw Error(ErrorCode::NotDicom, "undefined length on non-sequence element");
      }
      skip_undefined(el.tag == kItem ? kItemDelimiter : kSequenceDelimiter);
      return el;
    }
    el.value = take(length);
    return el;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::NotDicom, "truncated element stream");
  }

  void skip_undefined(std::uint32_t terminator) {
    while (true) {
      const Element el = next();
      if (el.tag == terminator) return;
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

std::string_view as_text(std::span<const std::uint8_t> v) {
  std::string_view s(reinterpret_cast<const char*>(v.data()), v.size());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<double> parse_decimals(std::span<const std::uint8_t> v, std::uint32_t t) {
  std::vector<double> out;
  std::string_view s = as_text(v);
  while (true) {
    const auto sep = s.find('\\');
    std::string_view item = s.substr(0, sep);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty() && item.front() == '+') item.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc{} || ptr != item.data() + item.size()) {
      throw Error(ErrorCode::NotDicom, "malformed decimal string in tag " + std::to_string(t));
    }
    out.push_back(value);
    if (sep == std::string_view::npos) break;
    s.remove_prefix(sep + 1);
  }
  return out;
}

const Element& require(const std::map<std::uint32_t, Element>& elements, std::uint32_t t, const char* name) {
  const auto it = elements.find(t);
  if (it == elements.end()) throw Error(ErrorCode::MissingTag, name);
  return it->second;
}

std::uint16_t us_value(const Element& el) {
  if (el.value.size() < 2) throw Error(ErrorCode::NotDicom, "short US value");
  return static_cast<std::uint16_t>(el.value[0] | (el.value[1] << 8));
}

std::string format_decimal(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  std::string out(buf.data(), ptr);
  if (out.size() > 16) {
    // DS is limited to 16 characters.
    ptr = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 10).ptr;
    out.assign(buf.data(), ptr);
  }
  return out;
}

std::string join_decimals(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += '\\';
    out += format_decimal(v);
  }
  return out;
}

class Writer {
 public:
  explicit Writer(const std::vector<std::uint32_t>& omit) : omit_(omit) {}

  std::vector<std::uint8_t>& bytes() { return bytes_; }

  void text(std::uint32_t t, const char* vr, std::string value) {
    if (value.size() % 2) value.push_back(std::string_view(vr) == "UI" ? '\0' : ' ');
    raw(t, vr, std::span(reinterpret_cast<const std::uint8_t*>(value.data()), value.size()));
  }

  void us(std::uint32_t t, std::uint16_t v) {
    const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xFF), static_cast<std::uint8_t>(v >> 8)};
    raw(t, "US", b);
  }

  void ul(std::uint32_t t, std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    raw(t, "UL", b);
  }

  void raw(std::uint32_t t, std::string_view vr, std::span<const std::uint8_t> value) {
    if (std::find(omit_.begin(), omit_.end(), t) != omit_.end()) return;
    put16(static_cast<std::uint16_t>(t >> 16));
    put16(static_cast<std::uint16_t>(t & 0xFFFF));
    bytes_.push_back(static_cast<std::uint8_t>(vr[0]));
    bytes_.push_back(static_cast<std::uint8_t>(vr[1]));
    if (has_long_length(vr)) {
      put16(0);
      put32(static_cast<std::uint32_t>(value.size()));
    } else {
      put16(static_cast<std::uint16_t>(value.size()));
    }
    bytes_.insert(bytes_.end(), value.begin(), value.end());
  }

 private:
  void put16(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void put32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  const std::vector<std::uint32_t>& omit_;
  std::vector<std::uint8_t> bytes_;
};

}  // namespace

DicomSlice parse_dicom_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 132 || std::string_view(reinterpret_cast<const char*>(bytes.data()) + 128, 4) != "DICM") {
    throw Error(ErrorCode::NotDicom, "missing preamble and DICM magic");
  }

  Reader reader(bytes, 132);
  std::map<std::uint32_t, Element> elements;
  auto check_syntax = [&elements] {
    const auto it = elements.find(kTransferSyntax);
    if (it == elements.end()) throw Error(ErrorCode::MissingTag, "(0002,0010) TransferSyntaxUID");
    const auto syntax = as_text(it->second.value);
    if (syntax != kExplicitVrLittleEndian) throw Error(ErrorCode::UnsupportedTransferSyntax, std::string(syntax));
  };
  // The meta group is always explicit VR LE; the dataset is only read once
  // its transfer syntax is known to be supported.
  while (!reader.done() && reader.peek_group() == 0x0002) {
    Element el = reader.next();
    elements.emplace(el.tag, std::move(el));
  }
  check_syntax();
  while (!reader.done()) {
    Element el = reader.next();
    elements.emplace(el.tag, std::move(el));
  }

  DicomSlice slice;
  slice.rows = us_value(require(elements, kRows, "(0028,0010) Rows"));
  slice.columns = us_value(require(elements, kColumns, "(0028,0011) Columns"));
  const auto spacing = parse_decimals(require(elements, kPixelSpacing, "(0028,0030) PixelSpacing").value, kPixelSpacing);
  slice.slice_thickness =
      parse_decimals(require(elements, kSliceThickness, "(0018,0050) SliceThickness").value, kSliceThickness).at(0);
  const auto position =
      parse_decimals(require(elements, kImagePosition, "(0020,0032) ImagePositionPatient").value, kImagePosition);
  slice.bits_allocated = us_value(require(elements, kBitsAllocated, "(0028,0100) BitsAllocated"));
  const auto representation = us_value(require(elements, kPixelRepresentation, "(0028,0103) PixelRepresentation"));
  const Element& pixel_data = require(elements, kPixelData, "(7FE0,0010) PixelData");

  if (spacing.size() != 2 || position.size() != 3) {
    throw Error(ErrorCode::NotDicom, "PixelSpacing needs 2 values and ImagePositionPatient 3");
  }
  slice.row_spacing = spacing[0];
  slice.column_spacing = spacing[1];
  slice.image_position = {position[0], position[1], position[2]};

  if (slice.bits_allocated != 8 && slice.bits_allocated != 16) {
    throw Error(ErrorCode::UnsupportedPixelFormat, "BitsAllocated " + std::to_string(slice.bits_allocated));
  }
  if (representation != 0) throw Error(ErrorCode::UnsupportedPixelFormat, "signed pixel representation");
  if (const auto it = elements.find(kSamplesPerPixel); it != elements.end() && us_value(it->second) != 1) {
    throw Error(ErrorCode::UnsupportedPixelFormat, "SamplesPerPixel != 1");
  }
  if (const auto it = elements.find(kPhotometric); it != elements.end()) {
    const auto photometric = as_text(it->second.value);
    if (photometric != "MONOCHROME2" && photometric != "MONOCHROME1") {
      throw Error(ErrorCode::UnsupportedPixelFormat, "photometric " + std::string(photometric));
    }
  }
  if (const auto it = elements.find(kNumberOfFrames); it != elements.end()) {
    if (parse_decimals(it->second.value, kNumberOfFrames).at(0) != 1.0) {
      throw Error(ErrorCode::UnsupportedPixelFormat, "multi-frame files are not supported");
    }
  }
  if (const auto it = elements.find(kImageOrientation); it != elements.end()) {
    const auto cosines = parse_decimals(it->second.value, kImageOrientation);
    static constexpr std::array<double, 6> kIdentity = {1, 0, 0, 0, 1, 0};
    bool identity = cosines.size() == 6;
    for (std::size_t i = 0; identity && i < 6; ++i) identity = std::abs(cosines[i] - kIdentity[i]) < 1e-6;
    if (!identity) throw Error(ErrorCode::UnsupportedOrientation, "only axial identity orientation is supported");
  }
  if (const auto it = elements.find(kRescaleSlope); it != elements.end()) {
    slice.rescale_slope = parse_decimals(it->second.value, kRescaleSlope).at(0);
  }
  if (const auto it = elements.find(kRescaleIntercept); it != elements.end()) {
    slice.rescale_intercept = parse_decimals(it->second.value, kRescaleIntercept).at(0);
  }
  if (const auto it = elements.find(kInstanceNumber); it != elements.end() && !as_text(it->second.value).empty()) {
    slice.instance_number = static_cast<std::int64_t>(parse_decimals(it->second.value, kInstanceNumber).at(0));
  }

  const std::size_t count = slice.rows * slice.columns;
  const std::size_t bytes_per = slice.bits_allocated / 8;
  if (pixel_data.value.size() < count * bytes_per) {
    throw Error(ErrorCode::UnsupportedPixelFormat, "pixel data shorter than Rows x Columns");
  }
  slice.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double stored = bytes_per == 1 ? pixel_data.value[i]
                                   : static_cast<double>(pixel_data.value[2 * i] | (pixel_data.value[2 * i + 1] << 8));
    slice.pixels[i] = stored * slice.rescale_slope + slice.rescale_intercept;
  }
  return slice;
}

DicomSlice read_dicom_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_dicom_file(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

VoxelGrid assemble_series(std::vector<DicomSlice> slices) {
  if (slices.size() < 2) throw Error(ErrorCode::InvalidArgument, "a series needs at least 2 slices");
  const DicomSlice& ref = slices.front();
  for (const auto& s : slices) {
    if (s.rows != ref.rows || s.columns != ref.columns || s.row_spacing != ref.row_spacing ||
        s.column_spacing != ref.column_spacing || s.bits_allocated != ref.bits_allocated) {
      throw Error(ErrorCode::InconsistentGeometry, "slices differ in rows, columns, pixel spacing or depth");
    }
    if (std::abs(s.image_position.x - ref.image_position.x) > 1e-6 ||
        std::abs(s.image_position.y - ref.image_position.y) > 1e-6) {
      throw Error(ErrorCode::InconsistentGeometry, "slices are not stacked along z");
    }
  }
  std::stable_sort(slices.begin(), slices.end(),
                   [](const DicomSlice& a, const DicomSlice& b) { return a.image_position.z < b.image_position.z; });

  std::vector<double> gaps;
  for (std::size_t i = 1; i < slices.size(); ++i) {
    const double gap = slices[i].image_position.z - slices[i - 1].image_position.z;
    if (gap <= 1e-9) {
      throw Error(ErrorCode::DuplicatePosition, "two slices at z = " + format_decimal(slices[i].image_position.z));
    }
    gaps.push_back(gap);
  }
  std::vector<double> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  for (double gap : gaps) {
    if (std::abs(gap - median) > 0.01 * median) {
      throw Error(ErrorCode::NonUniformGap, "gap " + format_decimal(gap) + " vs median " + format_decimal(median));
    }
  }

  const Depth depth = ref.bits_allocated == 8 ? Depth::U8 : Depth::U16;
  const double limit = max_value(depth);
  const Dims dims{ref.columns, ref.rows, slices.size()};
  std::vector<std::uint16_t> values;
  values.reserve(dims.count());
  for (const auto& s : slices) {
    for (double v : s.pixels) {
      if (v < 0.0 || v > limit || v != std::floor(v)) {
        throw Error(ErrorCode::UnsupportedPixelFormat, "rescaled value " + format_decimal(v) + " not representable");
      }
      values.push_back(static_cast<std::uint16_t>(v));
    }
  }
  return VoxelGrid(dims, {ref.column_spacing, ref.row_spacing, median}, ref.image_position, depth, std::move(values));
}

std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<std::uint8_t> encode_dicom(const DicomSlice& slice, const DicomEncodeOptions& options) {
  if (slice.bits_allocated != 8 && slice.bits_allocated != 16) {
    throw Error(ErrorCode::UnsupportedPixelFormat, "writer supports 8 or 16 bits");
  }
  if (slice.pixels.size() != slice.rows * slice.columns) {
    throw Error(ErrorCode::InvalidArgument, "pixel count != rows x columns");
  }
  const std::int64_t instance = slice.instance_number.value_or(1);
  const std::string sop_class = "1.2.840.10008.5.1.4.1.1.4";
  const std::string sop_instance = "2.25." + std::to_string(1000 + instance);

  Writer meta(options.omit_tags);
  meta.raw(tag(0x0002, 0x0001), "OB", std::array<std::uint8_t, 2>{0, 1});
  meta.text(tag(0x0002, 0x0002), "UI", sop_class);
  meta.text(tag(0x0002, 0x0003), "UI", sop_instance);
  meta.text(kTransferSyntax, "UI", options.transfer_syntax);

  Writer body(options.omit_tags);
  body.text(tag(0x0008, 0x0016), "UI", sop_class);
  body.text(tag(0x0008, 0x0018), "UI", sop_instance);
  body.text(tag(0x0008, 0x0060), "CS", "MR");
  body.text(kSliceThickness, "DS", format_decimal(slice.slice_thickness));
  body.text(kInstanceNumber, "IS", std::to_string(instance));
  body.text(kImagePosition, "DS",
            join_decimals({slice.image_position.x, slice.image_position.y, slice.image_position.z}));
  body.text(kImageOrientation, "DS", "1\\0\\0\\0\\1\\0");
  body.us(kSamplesPerPixel, 1);
  body.text(kPhotometric, "CS", "MONOCHROME2");
  body.us(kRows, static_cast<std::uint16_t>(slice.rows));
  body.us(kColumns, static_cast<std::uint16_t>(slice.columns));
  body.text(kPixelSpacing, "DS", join_decimals({slice.row_spacing, slice.column_spacing}));
  body.us(kBitsAllocated, static_cast<std::uint16_t>(slice.bits_allocated));
  body.us(tag(0x0028, 0x0101), static_cast<std::uint16_t>(slice.bits_allocated));
  body.us(tag(0x0028, 0x0102), static_cast<std::uint16_t>(slice.bits_allocated - 1));
  body.us(kPixelRepresentation, 0);
  body.text(kRescaleIntercept, "DS", format_decimal(slice.rescale_intercept));
  body.text(kRescaleSlope, "DS", format_decimal(slice.rescale_slope));

  const double limit = slice.bits_allocated == 8 ? 255.0 : 65535.0;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(slice.pixels.size() * slice.bits_allocated / 8 + 1);
  for (double v : slice.pixels) {
    const double stored = (v - slice.rescale_intercept) / slice.rescale_slope;
    if (stored < 0.0 || stored > limit || stored != std::floor(stored)) {
      throw Error(ErrorCode::InvalidArgument, "pixel value not representable: " + format_decimal(v));
    }
    const auto s = static_cast<std::uint16_t>(stored);
    pixels.push_back(static_cast<std::uint8_t>(s & 0xFF));
    if (slice.bits_allocated == 16) pixels.push_back(static_cast<std::uint8_t>(s >> 8));
  }
  if (pixels.size() % 2) pixels.push_back(0);
  body.raw(kPixelData, slice.bits_allocated == 8 ? "OB" : "OW", pixels);

  std::vector<std::uint8_t> out(128, 0);
  for (char c : std::string_view("DICM")) out.push_back(static_cast<std::uint8_t>(c));
  Writer group_length(options.omit_tags);
  group_length.ul(tag(0x0002, 0x0000), static_cast<std::uint32_t>(meta.bytes().size()));
  out.insert(out.end(), group_length.bytes().begin(), group_length.bytes().end());
  out.insert(out.end(), meta.bytes().begin(), meta.bytes().end());
  out.insert(out.end(), body.bytes().begin(), body.bytes().end());
  return out;
}

DicomSlice dicom_slice_from_grid(const VoxelGrid& block, std::size_t z) {
  const Image2D image = slice_z(block, z);
  DicomSlice slice;
  slice.rows = block.dims().ny;
  slice.columns = block.dims().nx;
  slice.row_spacing = block.spacing().y;
  slice.column_spacing = block.spacing().x;
  slice.slice_thickness = block.spacing().z;
  slice.image_position = voxel_to_world(block, {0.0, 0.0, static_cast<double>(z)});
  slice.bits_allocated = block.depth() == Depth::U8 ? 8 : 16;
  slice.instance_number = static_cast<std::int64_t>(z) + 1;
  slice.pixels.assign(image.pixels.begin(), image.pixels.end());
  return slice;
}

}  // namespace deepconn
