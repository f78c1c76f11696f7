#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace deepconn {

struct Rgba {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 0.0;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

struct ControlPoint {
  double u = 0.0;
  Rgba color;
};

/// Piecewise-linear map from normalized intensity to colour and opacity.
/// Control points are strictly increasing in u, from exactly 0 to exactly 1.
class TransferFunction {
 public:
  TransferFunction(std::string name, std::vector<ControlPoint> points);

  const std::string& name() const { return name_; }
  const std::vector<ControlPoint>& points() const { return points_; }

  /// Copy with every alpha multiplied by `factor` (clamped to [0, 1]).
  TransferFunction with_alpha_scale(double factor) const;

 private:
  std::string name_;
  std::vector<ControlPoint> points_;
};

/// Throws OutOfRange unless 0 <= u <= 1.
Rgba eval_tf(const TransferFunction& tf, double u);

/// Preset text format: one "u r g b a" row per line; '#' starts a comment.
TransferFunction parse_tf_text(const std::string& name, const std::string& text);
std::string format_tf_text(const TransferFunction& tf);
TransferFunction load_tf_file(const std::filesystem::path& path);

/// {"name": ..., "points": [[u, r, g, b, a], ...]}
std::string tf_to_json(const TransferFunction& tf);
TransferFunction tf_from_json(const std::string& text);

/// Names of the shipped presets.
std::vector<std::string> tf_preset_names();
std::filesystem::path tf_preset_path(const std::string& name);
/// A preset name or a path to a preset file.
TransferFunction load_tf_preset(const std::string& name_or_path);

}  // namespace deepconn
