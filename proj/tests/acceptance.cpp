// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "support.hpp"

#include "deepconn/cine.hpp"
#include "deepconn/contours.hpp"
#include "deepconn/convert.hpp"
#include "deepconn/dicom.hpp"
#include "deepconn/error.hpp"
#include "deepconn/fabricate.hpp"
#include "deepconn/hashing.hpp"
#include "deepconn/metaimage.hpp"
#include "deepconn/phantom.hpp"
#include "deepconn/pipeline.hpp"
#include "deepconn/raycast.hpp"
#include "deepconn/session.hpp"
#include "deepconn/stitch.hpp"
#include "deepconn/transfer_function.hpp"

using namespace deepconn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + what;
  }
};

const VoxelGrid& body() {
  static const VoxelGrid g = make_phantom_body(PhantomSpec{});
  return g;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome stitch_recovery() {
  Outcome o;
  const std::vector<std::size_t> overlaps{5, 8};
  const std::vector<Shift2> shifts{{2, -1}, {0, 3}};
  const SplitResult split = split_blocks(body(), 3, overlaps, shifts);

  std::vector<BlockAlignment> found;
  for (std::size_t k = 0; k + 1 < split.blocks.size(); ++k) {
    found.push_back(detect_overlap(split.blocks[k], split.blocks[k + 1]));
    o.require(found[k].overlap == overlaps[k] && found[k].shift == shifts[k],
              fmt::format("sigma=0 junction {}: got ({}, {}, {})", k, found[k].overlap, found[k].shift.dx,
                          found[k].shift.dy));
  }
  o.require(concatenate_blocks(split.blocks, found) == body(), "sigma=0 stitched volume differs from the phantom");

  const double sigma = 0.05 * 230.0;
  std::vector<VoxelGrid> noisy;
  for (std::size_t k = 0; k < split.blocks.size(); ++k) noisy.push_back(add_uniform_noise(split.blocks[k], sigma, 100 + k));
  for (std::size_t k = 0; k + 1 < noisy.size(); ++k) {
    const BlockAlignment a = detect_overlap(noisy[k], noisy[k + 1]);
    o.require(a.overlap == overlaps[k] && a.shift == shifts[k],
              fmt::format("sigma=5% junction {}: got ({}, {}, {})", k, a.overlap, a.shift.dx, a.shift.dy));
  }
  if (o.pass) o.detail = "sigma 0 and 5%: (o, dx, dy) exact, stitched volume voxel-exact";
  return o;
}

Outcome cine_normalization() {
  Outcome o;
  const PhantomSpec spec;
  CinePhantomSpec cs;
  Lcg64 rng(2718);
  for (int i = 0; i < 8; ++i) {
    cs.frame_counts.push_back(8 + rng.next() % 7);
    cs.phase_offsets.push_back(rng.unit());
  }
  cs.first_slice = default_cine_first_slice(spec, 8);
  const CinePhantom cine = make_phantom_cine(spec, cs);
  const Roi roi = default_roi(spec.dims.nx, spec.dims.ny);
  const CineNormalization out = normalize_cine(cine.series, 10, roi, {spec.spacing, cine.origin, Depth::U16, 1.0});
  o.require(out.stack.frame_count() == 10, fmt::format("{} frames", out.stack.frame_count()));
  for (const auto& f : out.stack.frames()) o.require(f.dims().nz == 8, "frame does not hold 8 locations");
  for (std::size_t loc = 0; loc < 8; ++loc) {
    const double m0 = breath_metric(slice_z(out.stack.frames()[0], loc), roi);
    for (std::size_t t = 1; t < 10; ++t) {
      o.require(m0 >= breath_metric(slice_z(out.stack.frames()[t], loc), roi),
                fmt::format("location {}: frame {} exceeds frame 0", loc, t));
    }
  }
  o.require(out.peak_index == cine.peak_index, "peak indices differ from ground truth");
  if (o.pass) {
    std::string lengths;
    for (auto n : cs.frame_counts) lengths += fmt::format("{} ", n);
    o.detail = fmt::format("lengths {}-> 10 frames each, frame 0 maximal, peaks match truth", lengths);
  }
  return o;
}

TransferFunction random_tf(Lcg64& rng) {
  std::vector<double> us{0.0, 1.0};
  const std::size_t inner = rng.next() % 4;
  for (std::size_t i = 0; i < inner; ++i) us.push_back(rng.uniform(0.05, 0.95));
  std::sort(us.begin(), us.end());
  std::vector<ControlPoint> pts;
  for (double u : us) pts.push_back({u, {rng.unit(), rng.unit(), rng.unit(), rng.unit()}});
  return {"random", pts};
}

std::array<double, 3> back_to_front(const std::vector<Rgba>& samples, std::array<double, 3> c) {
  for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
    const double rgb[3] = {it->r, it->g, it->b};
    for (std::size_t ch = 0; ch < 3; ++ch) c[ch] = it->a * rgb[ch] + (1 - it->a) * c[ch];
  }
  return c;
}

Camera orbit_camera(const VoxelGrid& g, Lcg64& rng, std::size_t size) {
  const Vec3 centre{0.5 * (g.dims().nx - 1) * g.spacing().x, 0.5 * (g.dims().ny - 1) * g.spacing().y,
                    0.5 * (g.dims().nz - 1) * g.spacing().z};
  Vec3 dir{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  if (norm(dir) < 0.1) dir = {1, 0.3, 0.2};
  Camera c;
  c.eye = g.origin() + centre + normalized(dir) * 40.0;
  c.target = g.origin() + centre;
  c.up = std::abs(normalized(dir).z) > 0.9 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
  c.width = c.height = size;
  return c;
}

Outcome raycaster_oracle() {
  Outcome o;
  Lcg64 rng(1999);
  double worst = 0.0, worst_no_exit = 0.0;
  const int volumes = 24;
  for (int k = 0; k < volumes; ++k) {
    const VoxelGrid g = testing::random_grid(rng, {16, 16, 16}, Depth::U8);
    const TransferFunction tf = random_tf(rng);
    const Camera cam = orbit_camera(g, rng, 24);
    RenderSettings early;
    RenderSettings exhaustive;
    exhaustive.early_exit_alpha = 1.0;
    const RgbImage fast = raycast_image(g, tf, cam, early);
    const RgbImage full = raycast_image(g, tf, cam, exhaustive);
    const RenderSettings r = resolve_settings(g, early);
    for (std::size_t y = 0; y < cam.height; ++y)
      for (std::size_t x = 0; x < cam.width; ++x) {
        const auto oracle = back_to_front(ray_samples(g, tf, camera_ray(cam, x, y), r), r.background);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          worst = std::max(worst, std::abs(fast.at(x, y)[ch] - oracle[ch]));
          worst_no_exit = std::max(worst_no_exit, std::abs(full.at(x, y)[ch] - oracle[ch]));
        }
      }
  }
  o.require(worst <= 1e-5, fmt::format("max |diff| {:.3g} > 1e-5 with early exit at 0.99", worst));
  o.detail += fmt::format("{}{} volumes; early exit 0.99 max |diff| {:.3g}; without early exit {:.3g}", o.pass ? "" : " | ", volumes, worst,
                          worst_no_exit);
  return o;
}

Outcome transparent_body() {
  Outcome o;
  const VoxelGrid g = convert_to_8bit(body(), default_window(body(), largest_component_mask(body(), 20)));
  Lcg64 rng(5);
  for (const auto& name : tf_preset_names()) {
    const TransferFunction tf = load_tf_preset(name);
    o.require(eval_tf(tf, 0.0).a == 0.0, name + ": alpha at 0 is not 0");
    for (const std::array<double, 3> bg : {std::array<double, 3>{0, 0, 0}, std::array<double, 3>{0.1, 0.3, 0.7}}) {
      RenderSettings s;
      s.background = bg;
      const Camera cam = orbit_camera(g, rng, 32);
      const RgbImage clear = raycast_image(g, tf.with_alpha_scale(0.0), cam, s);
      for (std::size_t i = 0; i < clear.pixels.size(); ++i) {
        if (clear.pixels[i] != bg[i % 3]) {
          o.require(false, name + ": zero-alpha render differs from the background");
          break;
        }
      }
      const auto zero = VoxelGrid::filled(g.dims(), g.spacing(), g.origin(), Depth::U8, 0);
      const RgbImage empty = raycast_image(zero, tf, cam, s);
      for (std::size_t i = 0; i < empty.pixels.size(); ++i) {
        if (empty.pixels[i] != bg[i % 3]) {
          o.require(false, name + ": zero voxels changed the background");
          break;
        }
      }
    }
  }
  if (o.pass) o.detail = "zero-alpha tf and zero voxels render the exact background for every preset";
  return o;
}

Outcome format_round_trips() {
  Outcome o;
  testing::TempDir dir("acceptance-formats");
  Lcg64 rng(77);
  for (int k = 0; k < 10; ++k) {
    const Depth depth = k % 2 ? Depth::U8 : Depth::U16;
    const VoxelGrid g = testing::random_grid(rng, {1 + rng.next() % 13, 1 + rng.next() % 11, 1 + rng.next() % 7}, depth,
                                             {rng.uniform(0.2, 2), rng.uniform(0.2, 2), rng.uniform(0.2, 3)},
                                             {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)});
    write_mhd(g, dir / "a.mhd", dir / "a.raw");
    const VoxelGrid back = read_mhd(dir / "a.mhd");
    write_mhd(back, dir / "b.mhd", dir / "a.raw.b");
    o.require(back == g, "MHD read differs from written grid");
    o.require(sha256_file(dir / "a.raw") == sha256_file(dir / "a.raw.b"), "RAW hash changed on rewrite");
  }

  PhantomSpec spec;
  spec.dims = {48, 40, 40};
  spec.origin = {-10, 5, 120};
  const VoxelGrid phantom = make_phantom_body(spec);
  write_phantom_dicom_series(phantom, dir / "dicom");
  std::vector<DicomSlice> slices;
  for (const auto& f : list_files(dir / "dicom")) slices.push_back(read_dicom_file(f));
  o.require(assemble_series(slices) == phantom, "DICOM write/parse/assemble is not value-exact");

  write_mhd(phantom, dir / "t.mhd");
  auto raw = read_file_bytes(dir / "t.raw");
  raw.resize(raw.size() - 3);
  write_file_bytes(dir / "t.raw", raw);
  try {
    read_mhd(dir / "t.mhd");
    o.require(false, "truncated RAW was accepted");
  } catch (const Error& e) {
    o.require(e.code() == ErrorCode::SizeMismatch, std::string("truncated RAW: ") + e.what());
  }
  if (o.pass) o.detail = "MHD/RAW hashes stable, DICOM value-exact, truncated RAW -> SizeMismatch";
  return o;
}

Outcome eight_bit_conversion() {
  Outcome o;
  for (const Window w : {Window{1000, 3000}, Window{0, 65535}, Window{17.5, 230.25}}) {
    std::vector<std::uint16_t> all(65536);
    for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<std::uint16_t>(v);
    const VoxelGrid g({256, 256, 1}, {1, 1, 1}, {}, Depth::U16, std::move(all));
    const VoxelGrid c = convert_to_8bit(g, w);
    const auto v = c.values();
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] < v[i - 1]) {
        o.require(false, fmt::format("not monotone at {}", i));
        break;
      }
    }
    o.require(window_value(w.lo, w) == 0, "lo does not map to 0");
    o.require(window_value(w.hi, w) == 255, "hi does not map to 255");
    o.require(window_value(0.5 * (w.lo + w.hi), w) == 128, "midpoint does not map to 128");
  }
  if (o.pass) o.detail = "monotone over 0..65535 for 3 windows; lo->0, hi->255, mid->128";
  return o;
}

Outcome interaction_semantics() {
  Outcome o;
  PhantomSpec spec;
  spec.dims = {48, 48, 64};
  const VoxelGrid b = make_phantom_body(spec);
  const VoxelGrid volume = convert_to_8bit(b, default_window(b, largest_component_mask(b, 20)));
  const TransferFunction tf = load_tf_preset("deep-connection");
  SessionConfig cfg;
  cfg.frames = 10;
  cfg.cycle_duration = 1.0;
  cfg.hand_collider = {{30, 0, 20}, {34, 4, 30}};
  const double dt = 1.0 / 60.0;

  // Head path from far outside towards the body centre; the hand rests away.
  const Vec3 centre{0.5 * 47 * spec.spacing.x, 0.5 * 47 * spec.spacing.y, 0.5 * 63 * spec.spacing.z};
  const Vec3 start = centre + Vec3{0, -60, 0};
  const Vec3 rest{-50, -50, -50};
  const Vec3 grip = cfg.hand_collider.center();

  InteractionState s;
  std::vector<Stage> stages{s.stage};
  std::vector<std::size_t> held_frames;
  auto step = [&](Vec3 head, Vec3 hand) {
    s = step_session(s, head, hand, dt, volume, tf, cfg);
    if (s.stage != stages.back()) stages.push_back(s.stage);
    if (s.stage != Stage::HandHeld && s.frame != 0) o.require(false, "non-zero frame outside hand-held");
  };

  Vec3 head = start;
  for (int i = 0; i <= 120 && s.stage != Stage::Inside; ++i) {
    head = start + (centre - start) * (i / 120.0);
    step(head, rest);
  }
  o.require(s.stage == Stage::Inside, "head never entered the body");
  for (int i = 0; i < 30; ++i) step(head, rest);

  const auto hold_steps = static_cast<int>(std::lround(2.5 * cfg.cycle_duration / dt)) - 1;
  for (int i = 0; i < hold_steps; ++i) {
    step(head, grip);
    if (held_frames.empty() || held_frames.back() != s.frame) held_frames.push_back(s.frame);
  }
  step(head, rest);
  const std::size_t after_release = s.frame;
  for (int i = 0; i < 30; ++i) step(head, rest);

  const std::vector<Stage> expected{Stage::Outside, Stage::Inside, Stage::HandHeld, Stage::Inside};
  o.require(stages == expected, fmt::format("stage sequence has {} entries", stages.size()));
  std::vector<std::size_t> sweep;
  for (std::size_t i = 0; i < 25; ++i) sweep.push_back(i % cfg.frames);
  o.require(held_frames == sweep, fmt::format("held frames visited {} runs, expected 0..9 x2 + 0..4", held_frames.size()));
  o.require(after_release == 0 && s.frame == 0 && s.held_time == 0.0, "frame not reset to 0 after release");
  if (o.pass) o.detail = "Outside -> Inside -> HandHeld -> Inside; frames 0..9, 0..9, 0..4; reset to 0";
  return o;
}

bool well_formed_svg(const fs::path& p) {
  namespace pt = boost::property_tree;
  std::istringstream in(read_text(p));
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error&) {
    return false;
  }
  return tree.get_child_optional("svg").has_value();
}

Outcome fabrication() {
  Outcome o;
  const double r = 20.0;
  Mask2D disc{64, 64, std::vector<std::uint8_t>(64 * 64)};
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) disc.pixels[x + 64 * y] = (x - 32.0) * (x - 32.0) + (y - 32.0) * (y - 32.0) <= r * r;
  const auto contours = marching_squares_contours(disc, {1, 1});
  o.require(contours.size() == 1, fmt::format("disc gave {} contours", contours.size()));
  double ratio = 0.0;
  if (!contours.empty()) {
    o.require(is_closed(contours.front()), "disc contour not closed");
    ratio = perimeter(contours.front()) / (2 * std::numbers::pi * r);
    o.require(std::abs(ratio - 1.0) <= 0.05, fmt::format("disc perimeter {:.4f} x 2 pi r (limit 5%)", ratio));
  }

  const BodyMask mask = largest_component_mask(body(), 20);
  const PhantomSpec spec;
  const MaskExtent extent = mask_extent(mask, Axis::Z);
  SectionOptions options;
  const auto layers = section_mask(mask, spec.spacing, spec.origin, options);
  const double extent_mm = double(extent.last - extent.first + 1) * spec.spacing.z;
  const auto expected = static_cast<std::size_t>(std::ceil(extent_mm / options.pitch_mm - 1e-9));
  testing::TempDir dir("acceptance-svg");
  write_svg_layers(layers, {}, options.pitch_mm, dir.path());
  std::size_t files = 0, malformed = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    if (e.path().extension() != ".svg") continue;
    ++files;
    malformed += !well_formed_svg(e.path());
  }
  o.require(files == expected, fmt::format("{} SVG files, expected ceil({} / {}) = {}", files, extent_mm,
                                           options.pitch_mm, expected));
  o.require(malformed == 0, fmt::format("{} malformed SVG files", malformed));
  o.detail += fmt::format("{}disc perimeter ratio {:.4f}; {} layers for {} mm at {} mm pitch, all well-formed",
                          o.pass ? "" : " | ", ratio, files, extent_mm, options.pitch_mm);
  return o;
}

Outcome end_to_end() {
  Outcome o;
  testing::TempDir dir("acceptance-e2e");
  const fs::path manifest = fs::path(DEEPCONN_MANIFESTS) / "phantom_pipeline.json";
  std::vector<std::string> listings;
  for (const char* run : {"first", "second"}) {
    PipelineOptions options;
    options.output = dir / run;
    const PipelineResult r = run_pipeline(manifest, options);
    o.require(r.exit_code == 0, fmt::format("{} run exited {}: {}", run, r.exit_code, r.message));
    listings.push_back(read_text(dir / run / "hashes.txt"));
  }
  const auto files = std::count(listings[0].begin(), listings[0].end(), '\n');
  o.require(!listings[0].empty() && listings[0] == listings[1], "hashes.txt differs between runs");
  if (o.pass) o.detail = fmt::format("{} output files hash-identical across two runs", files);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"stitch recovery", stitch_recovery},
      {"cine normalization", cine_normalization},
      {"raycaster oracle", raycaster_oracle},
      {"transparent body", transparent_body},
      {"format round-trips", format_round_trips},
      {"8-bit conversion", eight_bit_conversion},
      {"interaction semantics", interaction_semantics},
      {"fabrication", fabrication},
      {"end-to-end manifest", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
