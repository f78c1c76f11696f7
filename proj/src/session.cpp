#include "deepconn/session.hpp"

#include <cmath>

#include "json.hpp"

#include "deepconn/error.hpp"
#include "deepconn/raycast.hpp"

namespace deepconn {

bool Box::contains(Vec3 p) const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (p[i] < min[i] || p[i] > max[i]) return false;
  }
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < 3; ++i) v *= std::max(0.0, max[i] - min[i]);
  return v;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Outside: return "outside";
    case Stage::Inside: return "inside";
    case Stage::HandHeld: return "hand-held";
  }
  return "unknown";
}

void SessionConfig::validate() const {
  if (!(hand_collider.volume() > 0.0)) throw Error(ErrorCode::InvalidArgument, "hand collider has no volume");
  if (!(inside_opacity_threshold > 0.0 && inside_opacity_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "inside opacity threshold must lie in (0, 1)");
  }
  if (!(cycle_duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "cycle duration must be positive");
  if (frames == 0) throw Error(ErrorCode::InvalidArgument, "frame count must be positive");
  if (crossfade_seconds < 0.0) throw Error(ErrorCode::InvalidArgument, "negative crossfade");
  if (hold_mode != "grab" && hold_mode != "proximity") {
    throw Error(ErrorCode::InvalidArgument, "hold mode must be grab or proximity");
  }
}

namespace {

using json = nlohmann::ordered_json;

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidArgument, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string session_config_to_json(const SessionConfig& c) {
  json j;
  j["hand_collider"] = {{"min", vec_json(c.hand_collider.min)}, {"max", vec_json(c.hand_collider.max)}};
  j["inside_opacity_threshold"] = c.inside_opacity_threshold;
  j["cycle_duration"] = c.cycle_duration;
  j["frames"] = c.frames;
  j["crossfade_seconds"] = c.crossfade_seconds;
  j["stage_audio"] = {{"outside", c.stage_audio[0]}, {"inside", c.stage_audio[1]}, {"hand-held", c.stage_audio[2]}};
  j["hold_mode"] = c.hold_mode;
  j["transfer_function"] = c.transfer_function;
  j["cine_offset"] = json::array({c.cine_offset.x, c.cine_offset.y, c.cine_offset.z});
  j["assets"] = {{"volume", "volume.mhd"},
                 {"cine", "cine/{t}.raw"},
                 {"transfer_function", "tf/" + c.transfer_function + ".json"},
                 {"manifest", "manifest.json"}};
  return j.dump(2) + "\n";
}

SessionConfig session_config_from_json(const std::string& text) {
  SessionConfig c;
  try {
    const json j = json::parse(text);
    c.hand_collider = {vec_from(j.at("hand_collider").at("min")), vec_from(j.at("hand_collider").at("max"))};
    c.inside_opacity_threshold = j.at("inside_opacity_threshold").get<double>();
    c.cycle_duration = j.at("cycle_duration").get<double>();
    c.frames = j.at("frames").get<std::size_t>();
    c.crossfade_seconds = j.value("crossfade_seconds", c.crossfade_seconds);
    if (j.contains("stage_audio")) {
      const auto& a = j["stage_audio"];
      c.stage_audio = {a.at("outside").get<std::string>(), a.at("inside").get<std::string>(),
                       a.at("hand-held").get<std::string>()};
    }
    c.hold_mode = j.value("hold_mode", c.hold_mode);
    c.transfer_function = j.value("transfer_function", c.transfer_function);
    if (j.contains("cine_offset")) {
      const auto& o = j["cine_offset"];
      c.cine_offset = {o.at(0).get<std::int64_t>(), o.at(1).get<std::int64_t>(), o.at(2).get<std::int64_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("session config: ") + e.what());
  }
  c.validate();
  return c;
}

double alpha_at(const VoxelGrid& volume, const TransferFunction& tf, Vec3 world_mm) {
  if (world_to_voxel(volume, world_mm).out_of_bounds) return 0.0;
  return eval_tf(tf, normalized_sample(volume, world_mm)).a;
}

Stage classify_stage(Vec3 head, Vec3 hand, const VoxelGrid& volume, const TransferFunction& tf,
                     const SessionConfig& config) {
  if (config.hand_collider.contains(hand)) return Stage::HandHeld;
  if (alpha_at(volume, tf, head) >= config.inside_opacity_threshold) return Stage::Inside;
  return Stage::Outside;
}

std::size_t playback_frame(double held_time, const SessionConfig& config) {
  // Summed dt values drift by a few ulps; without the nudge a hold of exactly
  // k cycles built from 0.1 s steps can land one frame short.
  const double position = held_time / config.cycle_duration * static_cast<double>(config.frames);
  const auto whole = static_cast<std::size_t>(std::floor(position + 1e-9));
  return whole % config.frames;
}

InteractionState step_session(const InteractionState& state, Vec3 head, Vec3 hand, double dt,
                              const VoxelGrid& volume, const TransferFunction& tf, const SessionConfig& config) {
  if (dt < 0.0) throw Error(ErrorCode::InvalidArgument, "negative time step");
  InteractionState next;
  next.head = head;
  next.hand = hand;
  next.stage = classify_stage(head, hand, volume, tf, config);
  if (next.stage == Stage::HandHeld) {
    next.held_time = (state.stage == Stage::HandHeld ? state.held_time : 0.0) + dt;
    next.frame = playback_frame(next.held_time, config);
  }
  return next;
}

VoxelGrid current_render_volume(const InteractionState& state, const VoxelGrid& base, const CineStack& cine,
                                Index3 offset) {
  const std::size_t frame = state.stage == Stage::HandHeld ? state.frame : 0;
  if (frame >= cine.frame_count()) throw Error(ErrorCode::OutOfRange, "frame index beyond the cine stack");
  return embed_cine_frame(base, cine.frames()[frame], offset);
}

}  // namespace deepconn
