#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deepconn/transfer_function.hpp"
#include "deepconn/volume.hpp"

namespace deepconn {

struct Camera {
  Vec3 eye;
  Vec3 target;
  Vec3 up{0.0, 1.0, 0.0};
  double fov_degrees = 45.0;
  std::size_t width = 128;
  std::size_t height = 128;
};

struct RenderSettings {
  /// Sampling distance along the ray in mm; 0 selects half the smallest spacing.
  double step = 0.0;
  /// Step length the transfer-function opacities are defined for; 0 selects
  /// the smallest spacing.
  double reference_step = 0.0;
  double early_exit_alpha = 0.99;
  std::array<double, 3> background{0.0, 0.0, 0.0};
};

/// Float RGB image, row-major, pixel (0, 0) top-left.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // 3 channels per pixel

  std::array<double, 3> at(std::size_t x, std::size_t y) const {
    const std::size_t i = 3 * (x + width * y);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// a' = 1 - (1 - a)^(step / reference_step).
double opacity_correct(double alpha, double step, double reference_step);

/// Ray through the centre of pixel (x, y). Throws DegenerateCamera.
Ray camera_ray(const Camera& camera, std::size_t x, std::size_t y);
void validate_camera(const Camera& camera);

/// Parametric interval where a ray is inside the box spanned by the voxel
/// centres [origin, origin + (dims - 1) * spacing]; empty if t_far < t_near.
/// The near end is clamped to 0, so rays starting inside begin at the eye.
struct RayInterval {
  double t_near = 0.0;
  double t_far = -1.0;
  bool hit() const { return t_far >= t_near; }
};
RayInterval intersect_volume(const VoxelGrid& volume, const Ray& ray);

/// Resolves the 0 defaults in `settings` against the volume spacing.
RenderSettings resolve_settings(const VoxelGrid& volume, RenderSettings settings);

/// Intensity normalized to [0, 1] by the grid's depth maximum at a world
/// point; 0 outside the lattice.
double normalized_sample(const VoxelGrid& volume, Vec3 world_mm);

/// Per-sample opacity-corrected colours along one ray, front to back.
std::vector<Rgba> ray_samples(const VoxelGrid& volume, const TransferFunction& tf, const Ray& ray,
                              const RenderSettings& resolved);

/// Front-to-back compositing with early exit; composites over the background.
std::array<double, 3> composite_front_to_back(const std::vector<Rgba>& samples, const RenderSettings& resolved,
                                              double* final_alpha = nullptr);

/// Fixed-step raycast of an 8-bit volume. Throws DegenerateCamera,
/// InvalidArgument for a 16-bit volume or bad settings.
RgbImage raycast_image(const VoxelGrid& volume, const TransferFunction& tf, const Camera& camera,
                       const RenderSettings& settings = {});

/// round(255 * clamp(c, 0, 1)) per channel, interleaved RGB.
std::vector<std::uint8_t> quantize(const RgbImage& image);

/// Encodes 8-bit RGB as PNG (no timestamps, fixed compression settings).
std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& rgb);
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace deepconn
