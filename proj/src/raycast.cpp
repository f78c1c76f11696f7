#include "deepconn/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "deepconn/error.hpp"

namespace deepconn {

double opacity_correct(double alpha, double step, double reference_step) {
  if (alpha <= 0.0) return 0.0;
  if (step == reference_step) return alpha;
  return 1.0 - std::pow(1.0 - alpha, step / reference_step);
}

void validate_camera(const Camera& camera) {
  const Vec3 view = camera.target - camera.eye;
  if (norm(view) == 0.0) throw Error(ErrorCode::DegenerateCamera, "eye coincides with target");
  if (!(camera.fov_degrees > 0.0 && camera.fov_degrees < 180.0)) {
    throw Error(ErrorCode::DegenerateCamera, "field of view must be in (0, 180) degrees");
  }
  if (camera.width == 0 || camera.height == 0) throw Error(ErrorCode::DegenerateCamera, "empty image size");
  if (norm(cross(normalized(view), normalized(camera.up))) < 1e-9) {
    throw Error(ErrorCode::DegenerateCamera, "up vector is parallel to the view direction");
  }
}

Ray camera_ray(const Camera& camera, std::size_t x, std::size_t y) {
  const Vec3 forward = normalized(camera.target - camera.eye);
  const Vec3 right = normalized(cross(forward, camera.up));
  const Vec3 up = cross(right, forward);
  const double tan_half = std::tan(camera.fov_degrees * std::numbers::pi / 360.0);
  const double aspect = static_cast<double>(camera.width) / static_cast<double>(camera.height);
  const double px = (2.0 * (static_cast<double>(x) + 0.5) / static_cast<double>(camera.width) - 1.0) * tan_half * aspect;
  const double py = (1.0 - 2.0 * (static_cast<double>(y) + 0.5) / static_cast<double>(camera.height)) * tan_half;
  return {camera.eye, normalized(forward + px * right + py * up)};
}

RayInterval intersect_volume(const VoxelGrid& volume, const Ray& ray) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 3; ++i) {
    const double lo = volume.origin()[i];
    const double hi = lo + static_cast<double>(volume.dims()[i] - 1) * volume.spacing()[i];
    const double o = ray.origin[i];
    const double d = ray.direction[i];
    if (d == 0.0) {
      if (o < lo || o > hi) return {};
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  return {std::max(t_near, 0.0), t_far};
}

RenderSettings resolve_settings(const VoxelGrid& volume, RenderSettings settings) {
  const auto& s = volume.spacing();
  const double smallest = std::min({s.x, s.y, s.z});
  if (settings.step == 0.0) settings.step = 0.5 * smallest;
  if (settings.reference_step == 0.0) settings.reference_step = smallest;
  if (!(settings.step > 0.0) || !(settings.reference_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "step lengths must be > 0");
  }
  if (!(settings.early_exit_alpha > 0.0 && settings.early_exit_alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "early-exit alpha must be in (0, 1]");
  }
  return settings;
}

double normalized_sample(const VoxelGrid& volume, Vec3 world_mm) {
  const VoxelCoord v = world_to_voxel(volume, world_mm);
  if (v.out_of_bounds) return 0.0;
  return sample_trilinear(volume, v.position) / static_cast<double>(max_value(volume.depth()));
}

namespace {

// Visits opacity-corrected samples front to back until `visit` returns false.
template <typename Visitor>
void march(const VoxelGrid& volume, const TransferFunction& tf, const Ray& ray, const RenderSettings& settings,
           Visitor&& visit) {
  const RayInterval span = intersect_volume(volume, ray);
  if (!span.hit()) return;
  const auto& d = volume.dims();
  const double scale = 1.0 / static_cast<double>(max_value(volume.depth()));
  for (std::size_t k = 0;; ++k) {
    const double t = span.t_near + static_cast<double>(k) * settings.step;
    if (t > span.t_far) break;
    const Vec3 p = ray.origin + t * ray.direction;
    Vec3 v = world_to_voxel(volume, p).position;
    // Samples sit inside the box analytically; clamp away rounding residue.
    for (std::size_t i = 0; i < 3; ++i) v[i] = std::clamp(v[i], 0.0, static_cast<double>(d[i] - 1));
    const double u = std::clamp(sample_trilinear(volume, v) * scale, 0.0, 1.0);
    Rgba c = eval_tf(tf, u);
    c.a = opacity_correct(c.a, settings.step, settings.reference_step);
    if (!visit(c)) break;
  }
}

}  // namespace

std::vector<Rgba> ray_samples(const VoxelGrid& volume, const TransferFunction& tf, const Ray& ray,
                              const RenderSettings& resolved) {
  std::vector<Rgba> out;
  march(volume, tf, ray, resolved, [&out](const Rgba& c) {
    out.push_back(c);
    return true;
  });
  return out;
}

namespace {

struct Accumulator {
  double r = 0.0, g = 0.0, b = 0.0, a = 0.0;

  // Returns false once the early-exit opacity is reached.
  bool add(const Rgba& c, double early_exit) {
    const double w = (1.0 - a) * c.a;
    r += w * c.r;
    g += w * c.g;
    b += w * c.b;
    a += w;
    return a < early_exit;
  }

  std::array<double, 3> over(const std::array<double, 3>& background) const {
    return {r + (1.0 - a) * background[0], g + (1.0 - a) * background[1], b + (1.0 - a) * background[2]};
  }
};

}  // namespace

std::array<double, 3> composite_front_to_back(const std::vector<Rgba>& samples, const RenderSettings& resolved,
                                              double* final_alpha) {
  Accumulator acc;
  for (const auto& c : samples) {
    if (!acc.add(c, resolved.early_exit_alpha)) break;
  }
  if (final_alpha) *final_alpha = acc.a;
  return acc.over(resolved.background);
}

RgbImage raycast_image(const VoxelGrid& volume, const TransferFunction& tf, const Camera& camera,
                       const RenderSettings& settings) {
  validate_camera(camera);
  if (volume.depth() != Depth::U8) throw Error(ErrorCode::InvalidArgument, "raycasting expects an 8-bit volume");
  const RenderSettings resolved = resolve_settings(volume, settings);

  RgbImage image{camera.width, camera.height, std::vector<double>(3 * camera.width * camera.height)};
  for (std::size_t y = 0; y < camera.height; ++y) {
    for (std::size_t x = 0; x < camera.width; ++x) {
      Accumulator acc;
      march(volume, tf, camera_ray(camera, x, y), resolved,
            [&acc, &resolved](const Rgba& c) { return acc.add(c, resolved.early_exit_alpha); });
      const auto rgb = acc.over(resolved.background);
      std::copy(rgb.begin(), rgb.end(), image.pixels.begin() + static_cast<std::ptrdiff_t>(3 * (x + camera.width * y)));
    }
  }
  return image;
}

std::vector<std::uint8_t> quantize(const RgbImage& image) {
  std::vector<std::uint8_t> out(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), out.begin(), [](double c) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(c, 0.0, 1.0)));
  });
  return out;
}

}  // namespace deepconn
