#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "deepconn/transfer_function.hpp"
#include "deepconn/volume.hpp"

namespace deepconn {

/// Axis-aligned box in volume-space mm; bounds are inclusive.
struct Box {
  Vec3 min;
  Vec3 max;

  bool contains(Vec3 p) const;
  double volume() const;
  Vec3 center() const { return (min + max) * 0.5; }
};

enum class Stage { Outside, Inside, HandHeld };

std::string to_string(Stage stage);

struct SessionConfig {
  Box hand_collider{{0.0, 0.0, 0.0}, {10.0, 10.0, 10.0}};
  double inside_opacity_threshold = 0.05;
  /// Seconds per heartbeat / breathing cycle.
  double cycle_duration = 1.0;
  std::size_t frames = 10;
  double crossfade_seconds = 0.5;
  /// Placeholder loop per stage (Outside, Inside, HandHeld).
  std::array<std::string, 3> stage_audio{"audio/outside.ogg", "audio/inside.ogg", "audio/handheld.ogg"};
  /// "grab" requires an explicit grip; "proximity" treats entering as holding.
  std::string hold_mode = "grab";
  std::string transfer_function = "deep-connection";
  /// Where cine frames sit inside the published volume, in voxels.
  Index3 cine_offset;

  /// Throws InvalidArgument on a flat collider, tau outside (0, 1),
  /// non-positive cycle or zero frames.
  void validate() const;
};

std::string session_config_to_json(const SessionConfig& config);
SessionConfig session_config_from_json(const std::string& text);

struct InteractionState {
  Stage stage = Stage::Outside;
  double held_time = 0.0;
  std::size_t frame = 0;
  Vec3 head;
  Vec3 hand;
  friend bool operator==(const InteractionState&, const InteractionState&) = default;
};

/// Opacity of the transfer function at a world point; 0 outside the volume.
double alpha_at(const VoxelGrid& volume, const TransferFunction& tf, Vec3 world_mm);

/// HandHeld if the hand is in the collider, else Inside if the tf alpha at
/// the head reaches the threshold, else Outside.
Stage classify_stage(Vec3 head, Vec3 hand, const VoxelGrid& volume, const TransferFunction& tf,
                     const SessionConfig& config);

/// floor(held_time / cycle * frames) mod frames.
std::size_t playback_frame(double held_time, const SessionConfig& config);

/// Advances by dt seconds. Leaving HandHeld resets the clock and frame to 0.
InteractionState step_session(const InteractionState& state, Vec3 head, Vec3 hand, double dt,
                              const VoxelGrid& volume, const TransferFunction& tf, const SessionConfig& config);

/// Base volume with the current cine frame embedded (frame 0 unless held).
VoxelGrid current_render_volume(const InteractionState& state, const VoxelGrid& base, const CineStack& cine,
                                Index3 offset);

}  // namespace deepconn
