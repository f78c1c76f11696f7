#include "deepconn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "deepconn/asset_service.hpp"
#include "deepconn/cine.hpp"
#include "deepconn/convert.hpp"
#include "deepconn/dicom.hpp"
#include "deepconn/error.hpp"
#include "deepconn/fabricate.hpp"
#include "deepconn/hashing.hpp"
#include "deepconn/metaimage.hpp"
#include "deepconn/phantom.hpp"
#include "deepconn/raycast.hpp"
#include "deepconn/session.hpp"
#include "deepconn/stitch.hpp"

namespace deepconn {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::map<std::string, std::set<std::string>>& known_params() {
  static const std::map<std::string, std::set<std::string>> params{
      {"phantom",
       {"dims", "spacing", "noise_percent", "blocks", "overlaps", "shifts", "cine_locations", "cine_frames",
        "cine_amplitude"}},
      {"ingest", {"inputs"}},
      {"stitch", {"input", "max_overlap", "radius", "min_confidence", "overrides"}},
      {"cine", {"input", "frames", "roi", "cycle_duration"}},
      {"clean", {"input", "threshold"}},
      {"convert", {"window"}},
      {"render", {"tf", "cameras", "width", "height", "step"}},
      {"contours", {"axis", "pitch", "sheet", "kerf"}},
      {"publish", {"tfs", "collider", "inside_threshold", "crossfade", "hold_mode"}},
  };
  return params;
}

[[noreturn]] void manifest_error(const std::string& message) { throw Error(ErrorCode::ManifestError, message); }

// Typed access to one stage's parameters; type errors become ManifestError.
class Params {
 public:
  Params(std::string stage, const json& values, fs::path base) : stage_(std::move(stage)), values_(values), base_(std::move(base)) {}

  bool has(const std::string& key) const { return values_.contains(key); }
  const json& raw(const std::string& key) const { return values_.at(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    try {
      return values_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      manifest_error(fmt::format("stage '{}': parameter '{}' has the wrong type", stage_, key));
    }
  }

  /// Path parameter resolved against the manifest directory; must exist.
  fs::path existing_path(const std::string& key, const fs::path& fallback) const {
    const fs::path p = has(key) ? base_ / get<std::string>(key, "") : fallback;
    require_exists(p);
    return p;
  }

  void require_exists(const fs::path& p) const {
    if (!fs::exists(p)) manifest_error(fmt::format("stage '{}': input path does not exist: {}", stage_, p.string()));
  }

  const fs::path& base() const { return base_; }

 private:
  std::string stage_;
  const json& values_;
  fs::path base_;
};

struct StageContext {
  fs::path output;
  std::uint64_t seed = 1;
  bool verbose = false;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  fs::path dir(const std::string& stage) const { return output / stage; }
  void input(const fs::path& p) { inputs.push_back(p); }
  void wrote(const fs::path& p) { outputs.push_back(p); }
  void wrote_mhd(const VoxelGrid& grid, const fs::path& header) {
    write_mhd(grid, header);
    wrote(header);
    wrote(fs::path(header).replace_extension(".raw"));
  }
  VoxelGrid read_volume(const fs::path& header) {
    input(header);
    input(fs::path(header).replace_extension(".raw"));
    return read_mhd(header);
  }
};

Vec3 vec3_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) manifest_error(what + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories, const std::string& prefix,
                                     const std::string& extension = "") {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!name.starts_with(prefix)) continue;
    if (directories ? !e.is_directory() : !e.is_regular_file()) continue;
    if (!extension.empty() && e.path().extension() != extension) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

BodyMask mask_from_grid(const VoxelGrid& grid) {
  BodyMask mask{grid.dims(), std::vector<std::uint8_t>(grid.dims().count())};
  const auto v = grid.values();
  for (std::size_t i = 0; i < v.size(); ++i) mask.occupied[i] = v[i] != 0 ? 1 : 0;
  return mask;
}

VoxelGrid grid_from_mask(const BodyMask& mask, const VoxelGrid& like) {
  return VoxelGrid(mask.dims, like.spacing(), like.origin(), Depth::U8,
                   std::vector<std::uint16_t>(mask.occupied.begin(), mask.occupied.end()));
}

void stage_phantom(const Params& p, StageContext& ctx) {
  PhantomSpec spec;
  if (p.has("dims")) {
    const auto d = p.get<std::vector<std::size_t>>("dims", {});
    if (d.size() != 3) manifest_error("phantom dims must have 3 entries");
    spec.dims = {d[0], d[1], d[2]};
  }
  if (p.has("spacing")) spec.spacing = vec3_of(p.raw("spacing"), "phantom spacing");
  const double noise_percent = p.get<double>("noise_percent", 0.0);
  spec.noise_sigma = noise_percent / 100.0 * spec.tissue.bone;
  spec.seed = ctx.seed;

  const auto blocks = p.get<std::size_t>("blocks", 3);
  const auto overlaps = p.get<std::vector<std::size_t>>("overlaps", {5, 8});
  const auto shift_pairs = p.get<std::vector<std::vector<int>>>("shifts", {{2, -1}, {0, 3}});
  std::vector<Shift2> shifts;
  for (const auto& s : shift_pairs) {
    if (s.size() != 2) manifest_error("phantom shifts must be [dx, dy] pairs");
    shifts.push_back({s[0], s[1]});
  }

  const VoxelGrid body = make_phantom_body(spec);
  const VoxelGrid noisy = spec.noise_sigma > 0.0 ? add_uniform_noise(body, spec.noise_sigma, ctx.seed) : body;
  const fs::path dir = ctx.dir("phantom");
  ctx.wrote_mhd(noisy, dir / "reference" / "volume.mhd");

  const SplitResult split = split_blocks(noisy, blocks, overlaps, shifts);
  for (std::size_t k = 0; k < split.blocks.size(); ++k) {
    for (const auto& f : write_phantom_dicom_series(split.blocks[k], dir / "blocks" / fmt::format("block_{:02d}", k))) {
      ctx.wrote(f);
    }
  }
  write_text_file(dir / "split_truth.json", split_truth_json(split.truth));
  ctx.wrote(dir / "split_truth.json");

  const auto locations = p.get<std::size_t>("cine_locations", 8);
  const auto range = p.get<std::vector<std::size_t>>("cine_frames", {8, 14});
  if (range.size() != 2 || range[0] > range[1]) manifest_error("phantom cine_frames must be [min, max]");
  Lcg64 rng(ctx.seed ^ 0x9e3779b97f4a7c15ULL);
  CinePhantomSpec cine;
  cine.first_slice = default_cine_first_slice(spec, locations);
  cine.amplitude = p.get<double>("cine_amplitude", 1.0);
  for (std::size_t i = 0; i < locations; ++i) {
    cine.frame_counts.push_back(range[0] + static_cast<std::size_t>(rng.next() >> 33) % (range[1] - range[0] + 1));
    cine.phase_offsets.push_back(rng.unit());
  }
  const CinePhantom phantom_cine = make_phantom_cine(spec, cine);
  write_phantom_cine_dicom(phantom_cine, spec, dir / "cine");
  for (const auto& loc : sorted_entries(dir / "cine", true, "loc_")) {
    for (const auto& f : sorted_entries(loc, false, "frame_")) ctx.wrote(f);
  }
  write_text_file(dir / "cine_truth.json", cine_truth_json(phantom_cine));
  ctx.wrote(dir / "cine_truth.json");
}

VoxelGrid read_dicom_dir(const fs::path& dir) {
  std::vector<DicomSlice> slices;
  for (const auto& f : list_files(dir)) slices.push_back(read_dicom_file(f));
  return assemble_series(std::move(slices));
}

void stage_ingest(const Params& p, StageContext& ctx) {
  std::vector<fs::path> inputs;
  if (p.has("inputs")) {
    for (const auto& s : p.get<std::vector<std::string>>("inputs", {})) inputs.push_back(p.base() / s);
  } else {
    const fs::path blocks = ctx.dir("phantom") / "blocks";
    p.require_exists(blocks);
    inputs = sorted_entries(blocks, true, "block_");
  }
  if (inputs.empty()) manifest_error("stage 'ingest': no input directories");
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    p.require_exists(inputs[k]);
    for (const auto& f : list_files(inputs[k])) ctx.input(f);
    ctx.wrote_mhd(read_dicom_dir(inputs[k]), ctx.dir("ingest") / fmt::format("block_{:02d}.mhd", k));
  }
}

void stage_stitch(const Params& p, StageContext& ctx) {
  const fs::path input = p.existing_path("input", ctx.dir("ingest"));
  std::vector<VoxelGrid> blocks;
  for (const auto& f : sorted_entries(input, false, "block_", ".mhd")) blocks.push_back(ctx.read_volume(f));
  if (blocks.empty()) manifest_error(fmt::format("stage 'stitch': no block_*.mhd files in {}", input.string()));

  OverlapSearch search;
  search.max_overlap = p.get<std::size_t>("max_overlap", search.max_overlap);
  search.radius = p.get<int>("radius", search.radius);
  search.min_confidence = p.get<double>("min_confidence", search.min_confidence);

  std::map<std::size_t, json> overrides;
  if (p.has("overrides")) {
    for (const auto& o : p.raw("overrides")) {
      if (!o.is_object() || !o.contains("junction") || !o.contains("overlap")) {
        manifest_error("stitch overrides need 'junction' and 'overlap'");
      }
      overrides[o["junction"].get<std::size_t>()] = o;
    }
  }

  std::vector<BlockAlignment> alignments;
  for (std::size_t k = 0; k + 1 < blocks.size(); ++k) {
    BlockAlignment a;
    if (const auto it = overrides.find(k); it != overrides.end()) {
      const json& o = it->second;
      a.manual = true;
      a.overlap = o["overlap"].get<std::size_t>();
      if (o.contains("dx") || o.contains("dy")) {
        a.shift = {o.value("dx", 0), o.value("dy", 0)};
      } else {
        a.shift = find_translation(blocks[k], blocks[k + 1], a.overlap, search.radius);
      }
      a.confidence = a.overlap > 0 ? overlap_score(blocks[k], blocks[k + 1], a.overlap, a.shift) : 0.0;
    } else {
      a = detect_overlap(blocks[k], blocks[k + 1], search);
      if (a.low_confidence) {
        fmt::print(stderr, "[deepconn] stitch: junction {} low confidence ({:.3f}); using overlap 0\n", k,
                   a.confidence);
      }
    }
    alignments.push_back(a);
  }
  ctx.wrote_mhd(concatenate_blocks(blocks, alignments), ctx.dir("stitch") / "volume.mhd");
  write_text_file(ctx.dir("stitch") / "alignment.txt", format_alignment_report(alignments));
  ctx.wrote(ctx.dir("stitch") / "alignment.txt");
}

void stage_cine(const Params& p, StageContext& ctx) {
  const fs::path input = p.existing_path("input", ctx.dir("phantom") / "cine");
  const auto frames = p.get<std::size_t>("frames", 10);
  const double cycle = p.get<double>("cycle_duration", 1.0);

  std::vector<CineLocationSeries> series;
  std::vector<DicomSlice> firsts;
  for (const auto& loc : sorted_entries(input, true, "")) {
    std::vector<DicomSlice> slices;
    for (const auto& f : list_files(loc)) {
      ctx.input(f);
      slices.push_back(read_dicom_file(f));
    }
    if (slices.empty()) continue;
    std::stable_sort(slices.begin(), slices.end(), [](const DicomSlice& a, const DicomSlice& b) {
      return a.instance_number.value_or(0) < b.instance_number.value_or(0);
    });
    CineLocationSeries s;
    for (const auto& slice : slices) {
      Image2D image{slice.columns, slice.rows, std::vector<std::uint16_t>(slice.pixels.size())};
      for (std::size_t i = 0; i < slice.pixels.size(); ++i) {
        const double v = slice.pixels[i];
        if (v != std::floor(v) || v < 0.0 || v > 65535.0) {
          throw Error(ErrorCode::UnsupportedPixelFormat, "cine pixel values must be integral 16-bit");
        }
        image.pixels[i] = static_cast<std::uint16_t>(v);
      }
      s.frames.push_back(std::move(image));
    }
    firsts.push_back(slices.front());
    series.push_back(std::move(s));
  }
  if (series.empty()) throw Error(ErrorCode::EmptySeries, fmt::format("no cine locations in {}", input.string()));

  // Location order and geometry follow slice positions, checked the same way
  // as a static series.
  std::vector<std::size_t> order(firsts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return firsts[a].image_position.z < firsts[b].image_position.z;
  });
  for (std::size_t rank = 0; rank < order.size(); ++rank) series[order[rank]].location = rank;

  CineGeometry geometry;
  geometry.cycle_duration = cycle;
  if (firsts.size() >= 2) {
    const VoxelGrid probe = assemble_series(firsts);
    geometry.spacing = probe.spacing();
    geometry.origin = probe.origin();
  } else {
    geometry.spacing = {firsts[0].column_spacing, firsts[0].row_spacing,
                        firsts[0].slice_thickness > 0.0 ? firsts[0].slice_thickness : 1.0};
    geometry.origin = firsts[0].image_position;
  }

  const Roi roi = [&] {
    if (!p.has("roi")) return default_roi(series.front().frames.front().width, series.front().frames.front().height);
    const auto r = p.get<std::vector<std::size_t>>("roi", {});
    if (r.size() != 4) manifest_error("cine roi must be [x, y, width, height]");
    return Roi{r[0], r[1], r[2], r[3]};
  }();

  const CineNormalization result = normalize_cine(series, frames, roi, geometry);
  for (const auto& w : result.warnings) fmt::print(stderr, "[deepconn] cine: {}\n", w);
  for (std::size_t t = 0; t < result.stack.frame_count(); ++t) {
    ctx.wrote_mhd(result.stack.frames()[t], ctx.dir("cine") / fmt::format("frame_{:02d}.mhd", t));
  }
  json info;
  info["frames"] = frames;
  info["cycle_duration"] = cycle;
  info["roi"] = {roi.x, roi.y, roi.width, roi.height};
  info["peak_index"] = result.peak_index;
  info["warnings"] = result.warnings;
  write_text_file(ctx.dir("cine") / "cine.json", info.dump(2) + "\n");
  ctx.wrote(ctx.dir("cine") / "cine.json");
}

void stage_clean(const Params& p, StageContext& ctx) {
  const fs::path input = p.existing_path("input", ctx.dir("stitch") / "volume.mhd");
  const VoxelGrid volume = ctx.read_volume(input);
  // Default: a tenth of the bright end, which sits between air noise and the
  // darkest tissue of a typical body scan.
  const auto fallback = static_cast<std::uint16_t>(std::max(1.0, std::round(0.1 * percentile(volume, 99.5))));
  const auto threshold = p.get<std::uint16_t>("threshold", fallback);
  const BodyMask mask = largest_component_mask(volume, threshold);
  ctx.wrote_mhd(apply_mask(volume, mask), ctx.dir("clean") / "volume.mhd");
  ctx.wrote_mhd(grid_from_mask(mask, volume), ctx.dir("clean") / "mask.mhd");
  write_text_file(ctx.dir("clean") / "clean.txt",
                  fmt::format("threshold {}\nmask_voxels {}\n", threshold, mask.count()));
  ctx.wrote(ctx.dir("clean") / "clean.txt");
}

void stage_convert(const Params& p, StageContext& ctx) {
  const fs::path clean = ctx.dir("clean");
  p.require_exists(clean / "volume.mhd");
  const VoxelGrid volume = ctx.read_volume(clean / "volume.mhd");
  const BodyMask mask = mask_from_grid(ctx.read_volume(clean / "mask.mhd"));

  Window window;
  if (p.has("window")) {
    const auto w = p.get<std::vector<double>>("window", {});
    if (w.size() != 2) manifest_error("convert window must be [lo, hi]");
    window = {w[0], w[1]};
  } else {
    window = default_window(volume, mask);
  }
  const fs::path out = ctx.dir("convert");
  ctx.wrote_mhd(convert_to_8bit(volume, window), out / "volume.mhd");
  write_text_file(out / "window.txt", fmt::format("{} {}\n", window.lo, window.hi));
  ctx.wrote(out / "window.txt");

  const fs::path cine = ctx.dir("cine");
  if (!fs::exists(cine / "cine.json")) return;
  const auto frames = sorted_entries(cine, false, "frame_", ".mhd");
  Index3 offset;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const VoxelGrid frame = ctx.read_volume(frames[t]);
    if (t == 0) {
      if (!spacing_equal(frame.spacing(), volume.spacing())) {
        throw Error(ErrorCode::SpacingMismatch, "cine spacing differs from the body volume");
      }
      double v[3];
      for (std::size_t i = 0; i < 3; ++i) {
        v[i] = (frame.origin()[i] - volume.origin()[i]) / volume.spacing()[i];
        if (std::abs(v[i] - std::round(v[i])) > 1e-3) {
          throw Error(ErrorCode::GeometryMismatch, "cine origin is not on the body lattice");
        }
      }
      offset = {std::llround(v[0]), std::llround(v[1]), std::llround(v[2])};
    }
    ctx.wrote_mhd(convert_to_8bit(frame, window), out / "cine" / fmt::format("frame_{:02d}.mhd", t));
  }
  ctx.input(cine / "cine.json");
  std::ifstream in(cine / "cine.json");
  std::stringstream text;
  text << in.rdbuf();
  json info = json::parse(text.str());
  info["offset"] = {offset.x, offset.y, offset.z};
  write_text_file(out / "cine.json", info.dump(2) + "\n");
  ctx.wrote(out / "cine.json");
}

struct ConvertedCine {
  std::vector<VoxelGrid> frames;
  Index3 offset;
  double cycle_duration = 1.0;
};

std::optional<ConvertedCine> read_converted_cine(StageContext& ctx) {
  const fs::path dir = ctx.dir("convert");
  if (!fs::exists(dir / "cine.json")) return std::nullopt;
  ctx.input(dir / "cine.json");
  std::ifstream in(dir / "cine.json");
  std::stringstream text;
  text << in.rdbuf();
  const json info = json::parse(text.str());
  ConvertedCine out;
  out.offset = {info["offset"][0].get<std::int64_t>(), info["offset"][1].get<std::int64_t>(),
                info["offset"][2].get<std::int64_t>()};
  out.cycle_duration = info["cycle_duration"].get<double>();
  for (const auto& f : sorted_entries(dir / "cine", false, "frame_", ".mhd")) out.frames.push_back(ctx.read_volume(f));
  return out;
}

std::vector<Camera> default_cameras(const VoxelGrid& volume, std::size_t width, std::size_t height) {
  const Vec3 extent{(static_cast<double>(volume.dims().nx) - 1.0) * volume.spacing().x,
                    (static_cast<double>(volume.dims().ny) - 1.0) * volume.spacing().y,
                    (static_cast<double>(volume.dims().nz) - 1.0) * volume.spacing().z};
  const Vec3 centre = volume.origin() + extent * 0.5;
  const double distance = 1.4 * norm(extent);
  auto camera = [&](Vec3 direction, Vec3 up) {
    Camera c;
    c.eye = centre + normalized(direction) * distance;
    c.target = centre;
    c.up = up;
    c.width = width;
    c.height = height;
    return c;
  };
  return {camera({0, -1, 0}, {0, 0, 1}), camera({1, 0, 0}, {0, 0, 1}), camera({1, -1, 0.6}, {0, 0, 1}),
          camera({0, 0, 1}, {0, -1, 0})};
}

void stage_render(const Params& p, StageContext& ctx) {
  const fs::path input = ctx.dir("convert") / "volume.mhd";
  p.require_exists(input);
  VoxelGrid volume = ctx.read_volume(input);
  if (const auto cine = read_converted_cine(ctx); cine && !cine->frames.empty()) {
    volume = embed_cine_frame(volume, cine->frames.front(), cine->offset);
  }
  const std::string tf_name = p.get<std::string>("tf", "deep-connection");
  const TransferFunction tf = load_tf_preset(tf_name);
  const auto width = p.get<std::size_t>("width", 128);
  const auto height = p.get<std::size_t>("height", 128);

  std::vector<Camera> cameras;
  if (p.has("cameras")) {
    for (const auto& c : p.raw("cameras")) {
      Camera cam;
      cam.eye = vec3_of(c.at("eye"), "camera eye");
      cam.target = vec3_of(c.at("target"), "camera target");
      if (c.contains("up")) cam.up = vec3_of(c["up"], "camera up");
      cam.fov_degrees = c.value("fov", cam.fov_degrees);
      cam.width = c.value("width", width);
      cam.height = c.value("height", height);
      cameras.push_back(cam);
    }
  } else {
    cameras = default_cameras(volume, width, height);
  }
  RenderSettings settings;
  settings.step = p.get<double>("step", 0.0);
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const fs::path out = ctx.dir("render") / fmt::format("view_{}.png", k);
    write_png(out, raycast_image(volume, tf, cameras[k], settings));
    ctx.wrote(out);
  }
}

void stage_contours(const Params& p, StageContext& ctx) {
  const fs::path input = ctx.dir("clean") / "mask.mhd";
  p.require_exists(input);
  const VoxelGrid grid = ctx.read_volume(input);
  SectionOptions options;
  const std::string axis = p.get<std::string>("axis", "z");
  if (axis == "x") {
    options.axis = Axis::X;
  } else if (axis == "y") {
    options.axis = Axis::Y;
  } else if (axis == "z") {
    options.axis = Axis::Z;
  } else {
    manifest_error("contours axis must be x, y or z");
  }
  options.pitch_mm = p.get<double>("pitch", options.pitch_mm);
  options.kerf_offset_mm = p.get<double>("kerf", 0.0);
  SheetSize sheet;
  if (p.has("sheet")) {
    const auto s = p.get<std::vector<double>>("sheet", {});
    if (s.size() != 2) manifest_error("contours sheet must be [width, height]");
    sheet = {s[0], s[1]};
  }
  const auto layers = section_mask(mask_from_grid(grid), grid.spacing(), grid.origin(), options);
  for (const auto& f : write_svg_layers(layers, sheet, options.pitch_mm, ctx.dir("contours"))) ctx.wrote(f);
  ctx.wrote(ctx.dir("contours") / "layers.txt");
}

void stage_publish(const Params& p, StageContext& ctx) {
  const fs::path input = ctx.dir("convert") / "volume.mhd";
  p.require_exists(input);
  const VoxelGrid volume = ctx.read_volume(input);
  const auto cine = read_converted_cine(ctx);
  if (!cine || cine->frames.empty()) throw Error(ErrorCode::EmptySeries, "publish needs converted cine frames");

  SessionConfig config;
  config.frames = cine->frames.size();
  config.cycle_duration = cine->cycle_duration;
  config.cine_offset = cine->offset;
  config.inside_opacity_threshold = p.get<double>("inside_threshold", config.inside_opacity_threshold);
  config.crossfade_seconds = p.get<double>("crossfade", config.crossfade_seconds);
  config.hold_mode = p.get<std::string>("hold_mode", config.hold_mode);
  if (p.has("collider")) {
    const json& c = p.raw("collider");
    config.hand_collider = {vec3_of(c.at("min"), "collider min"), vec3_of(c.at("max"), "collider max")};
  } else {
    // A small box just beside the right flank at mid height.
    const Vec3 s = volume.spacing();
    const Vec3 centre = volume.origin() + Vec3{0.97 * (static_cast<double>(volume.dims().nx) - 1.0) * s.x,
                                               0.5 * (static_cast<double>(volume.dims().ny) - 1.0) * s.y,
                                               0.5 * (static_cast<double>(volume.dims().nz) - 1.0) * s.z};
    config.hand_collider = {centre - Vec3{3.0, 3.0, 3.0}, centre + Vec3{3.0, 3.0, 3.0}};
  }
  std::vector<TransferFunction> tfs;
  for (const auto& name : p.get<std::vector<std::string>>("tfs", tf_preset_names())) tfs.push_back(load_tf_preset(name));
  config.transfer_function = tfs.front().name();

  const AssetBundle bundle = build_assets(volume, CineStack(cine->frames, cine->cycle_duration), tfs, config);
  write_assets(bundle, ctx.dir("publish"));
  for (const auto& [path, data] : bundle.files) ctx.wrote(ctx.dir("publish") / path);
}

std::string combined_hash(const std::vector<fs::path>& files, const fs::path& root) {
  std::vector<std::string> lines;
  for (const auto& f : files) {
    lines.push_back(fmt::format("{} {}", fs::relative(f, root).generic_string(), sha256_file(f)));
  }
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l + "\n";
  return sha256_hex(joined);
}

void resolve_paths(json& params, const fs::path& base) {
  auto resolve = [&](json& v) {
    if (v.is_string() && fs::path(v.get<std::string>()).is_relative()) v = (base / v.get<std::string>()).string();
  };
  if (params.contains("input")) resolve(params["input"]);
  if (params.contains("inputs") && params["inputs"].is_array()) {
    for (auto& v : params["inputs"]) resolve(v);
  }
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"phantom", "ingest", "stitch",   "cine",   "clean",
                                              "convert", "render", "contours", "publish"};
  return names;
}

PipelineManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    manifest_error(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) manifest_error("manifest must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "output" && key != "seed" && key != "stages") manifest_error("unknown manifest key: " + key);
  }
  PipelineManifest m;
  try {
    if (j.contains("output")) m.output = base_dir / j["output"].get<std::string>();
    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception&) {
    manifest_error("manifest 'output' must be a string and 'seed' a non-negative integer");
  }
  if (!j.contains("stages") || !j["stages"].is_array()) manifest_error("manifest needs a 'stages' array");
  std::set<std::string> seen;
  for (const auto& s : j["stages"]) {
    if (!s.is_object() || !s.contains("stage") || !s["stage"].is_string()) {
      manifest_error("every stage needs a 'stage' name");
    }
    StageSpec spec;
    spec.name = s["stage"].get<std::string>();
    const auto known = known_params().find(spec.name);
    if (known == known_params().end()) manifest_error("unknown stage: " + spec.name);
    if (!seen.insert(spec.name).second) manifest_error("stage listed twice: " + spec.name);
    for (const auto& [key, value] : s.items()) {
      if (key == "stage") continue;
      if (!known->second.contains(key)) manifest_error(fmt::format("stage '{}': unknown parameter '{}'", spec.name, key));
      spec.params[key] = value;
    }
    resolve_paths(spec.params, base_dir);
    m.stages.push_back(std::move(spec));
  }
  return m;
}

PipelineManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) manifest_error("cannot read manifest: " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path());
}

StageRecord run_stage(const StageSpec& stage, const fs::path& output, std::uint64_t seed, bool verbose) {
  const auto known = known_params().find(stage.name);
  if (known == known_params().end()) manifest_error("unknown stage: " + stage.name);
  StageContext ctx{output, seed, verbose, {}, {}};
  const Params params(stage.name, stage.params, fs::path{});
  fs::remove_all(ctx.dir(stage.name));
  try {
    if (stage.name == "phantom") stage_phantom(params, ctx);
    else if (stage.name == "ingest") stage_ingest(params, ctx);
    else if (stage.name == "stitch") stage_stitch(params, ctx);
    else if (stage.name == "cine") stage_cine(params, ctx);
    else if (stage.name == "clean") stage_clean(params, ctx);
    else if (stage.name == "convert") stage_convert(params, ctx);
    else if (stage.name == "render") stage_render(params, ctx);
    else if (stage.name == "contours") stage_contours(params, ctx);
    else stage_publish(params, ctx);
  } catch (const nlohmann::json::exception& e) {
    manifest_error(fmt::format("stage '{}': {}", stage.name, e.what()));
  }
  StageRecord record{stage.name, combined_hash(ctx.inputs, output), combined_hash(ctx.outputs, output), ctx.outputs};
  fmt::print(stderr, "[deepconn] {:<8} in {} out {} ({} files)\n", stage.name, record.input_hash.substr(0, 16),
             record.output_hash.substr(0, 16), record.outputs.size());
  if (verbose) {
    for (const auto& f : record.outputs) fmt::print(stderr, "[deepconn]   {}\n", fs::relative(f, output).generic_string());
  }
  return record;
}

std::string hash_listing(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && fs::relative(e.path(), dir) != "hashes.txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fmt::format("{} {}\n", fs::relative(f, dir).generic_string(), sha256_file(f));
  return out;
}

PipelineResult run_pipeline(const PipelineManifest& manifest, const PipelineOptions& options) {
  PipelineResult result;
  const fs::path output = options.output.value_or(manifest.output);
  const std::uint64_t seed = options.seed.value_or(manifest.seed);
  for (const auto& stage : manifest.stages) {
    try {
      result.stages.push_back(run_stage(stage, output, seed, options.verbose));
    } catch (const Error& e) {
      result.exit_code = e.code() == ErrorCode::ManifestError ? 2 : 1;
      result.failed_stage = stage.name;
      result.message = fmt::format("stage '{}' failed: {}", stage.name, e.what());
    } catch (const std::exception& e) {
      result.exit_code = 1;
      result.failed_stage = stage.name;
      result.message = fmt::format("stage '{}' failed: {}", stage.name, e.what());
    }
    if (result.exit_code != 0) {
      fmt::print(stderr, "[deepconn] {}\n", result.message);
      return result;
    }
  }
  fs::create_directories(output);
  write_text_file(output / "hashes.txt", hash_listing(output));
  return result;
}

PipelineResult run_pipeline(const fs::path& manifest_path, const PipelineOptions& options) {
  try {
    return run_pipeline(load_manifest(manifest_path), options);
  } catch (const Error& e) {
    fmt::print(stderr, "[deepconn] {}\n", e.what());
    return {2, {}, "", e.what()};
  }
}

}  // namespace deepconn
