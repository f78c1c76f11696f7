#include "deepconn/transfer_function.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

#include "deepconn/error.hpp"
#include "deepconn/metaimage.hpp"

namespace deepconn {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

TransferFunction::TransferFunction(std::string name, std::vector<ControlPoint> points)
    : name_(std::move(name)), points_(std::move(points)) {
  if (points_.size() < 2) throw Error(ErrorCode::InvalidArgument, "transfer function needs >= 2 control points");
  if (points_.front().u != 0.0 || points_.back().u != 1.0) {
    throw Error(ErrorCode::InvalidArgument, "transfer function must span u = 0 to u = 1");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& c = points_[i].color;
    if (!in_unit(c.r) || !in_unit(c.g) || !in_unit(c.b) || !in_unit(c.a)) {
      throw Error(ErrorCode::InvalidArgument, "rgba components must lie in [0, 1]");
    }
    if (i > 0 && !(points_[i].u > points_[i - 1].u)) {
      throw Error(ErrorCode::InvalidArgument, "control points must be strictly increasing in u");
    }
  }
}

TransferFunction TransferFunction::with_alpha_scale(double factor) const {
  auto points = points_;
  for (auto& p : points) p.color.a = std::clamp(p.color.a * factor, 0.0, 1.0);
  return TransferFunction(name_, std::move(points));
}

Rgba eval_tf(const TransferFunction& tf, double u) {
  if (!in_unit(u)) throw Error(ErrorCode::OutOfRange, fmt::format("intensity {} outside [0, 1]", u));
  const auto& pts = tf.points();
  const auto upper =
      std::upper_bound(pts.begin(), pts.end(), u, [](double value, const ControlPoint& p) { return value < p.u; });
  if (upper == pts.end()) return pts.back().color;
  const ControlPoint& lo = *(upper - 1);
  const ControlPoint& hi = *upper;
  const double t = (u - lo.u) / (hi.u - lo.u);
  auto mix = [t](double a, double b) { return a * (1.0 - t) + b * t; };
  return {mix(lo.color.r, hi.color.r), mix(lo.color.g, hi.color.g), mix(lo.color.b, hi.color.b),
          mix(lo.color.a, hi.color.a)};
}

TransferFunction parse_tf_text(const std::string& name, const std::string& text) {
  std::vector<ControlPoint> points;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    ControlPoint p;
    if (!(row >> p.u)) continue;
    if (!(row >> p.color.r >> p.color.g >> p.color.b >> p.color.a)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("{}: line {} needs 5 numbers", name, line_no));
    }
    std::string extra;
    if (row >> extra) throw Error(ErrorCode::InvalidArgument, fmt::format("{}: line {} has extra fields", name, line_no));
    points.push_back(p);
  }
  return TransferFunction(name, std::move(points));
}

std::string format_tf_text(const TransferFunction& tf) {
  std::string out = fmt::format("# {}\n# u r g b a\n", tf.name());
  for (const auto& p : tf.points()) {
    out += fmt::format("{} {} {} {} {}\n", p.u, p.color.r, p.color.g, p.color.b, p.color.a);
  }
  return out;
}

TransferFunction load_tf_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_tf_text(path.stem().string(), std::string(bytes.begin(), bytes.end()));
}

std::string tf_to_json(const TransferFunction& tf) {
  nlohmann::ordered_json j;
  j["name"] = tf.name();
  j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : tf.points()) j["points"].push_back({p.u, p.color.r, p.color.g, p.color.b, p.color.a});
  return j.dump(2) + "\n";
}

TransferFunction tf_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<ControlPoint> points;
    for (const auto& row : j.at("points")) {
      if (row.size() != 5) throw Error(ErrorCode::InvalidArgument, "transfer function rows need 5 numbers");
      points.push_back({row[0].get<double>(),
                        {row[1].get<double>(), row[2].get<double>(), row[3].get<double>(), row[4].get<double>()}});
    }
    return TransferFunction(j.at("name").get<std::string>(), std::move(points));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("transfer function JSON: ") + e.what());
  }
}

std::vector<std::string> tf_preset_names() { return {"deep-connection", "bone", "lung"}; }

std::filesystem::path tf_preset_path(const std::string& name) {
  return std::filesystem::path(DEEPCONN_DATA_DIR) / "tf" / (name + ".txt");
}

TransferFunction load_tf_preset(const std::string& name_or_path) {
  const auto names = tf_preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return load_tf_file(tf_preset_path(name_or_path));
  }
  if (std::filesystem::exists(name_or_path)) return load_tf_file(name_or_path);
  throw Error(ErrorCode::InvalidArgument, "unknown transfer function preset: " + name_or_path);
}

}  // namespace deepconn
