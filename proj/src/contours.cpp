#include "deepconn/contours.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "deepconn/error.hpp"

namespace deepconn {

std::size_t Mask2D::count() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask2D extract_layer_mask(const BodyMask& mask, Axis axis, std::size_t index) {
  const auto& d = mask.dims;
  const std::size_t limit = axis == Axis::X ? d.nx : (axis == Axis::Y ? d.ny : d.nz);
  if (index >= limit) throw Error(ErrorCode::OutOfBounds, "layer index beyond the mask");
  Mask2D out;
  switch (axis) {
    case Axis::Z:
      out = {d.nx, d.ny, std::vector<std::uint8_t>(d.nx * d.ny)};
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) out.pixels[x + d.nx * y] = mask.at(x, y, index);
      break;
    case Axis::Y:
      out = {d.nx, d.nz, std::vector<std::uint8_t>(d.nx * d.nz)};
      for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t x = 0; x < d.nx; ++x) out.pixels[x + d.nx * z] = mask.at(x, index, z);
      break;
    case Axis::X:
      out = {d.ny, d.nz, std::vector<std::uint8_t>(d.ny * d.nz)};
      for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y) out.pixels[y + d.ny * z] = mask.at(index, y, z);
      break;
  }
  return out;
}

namespace {

// Crossing points live on lattice edges; a horizontal edge joins pixel
// (i, j) and (i + 1, j), a vertical edge joins (i, j) and (i, j + 1). Indices
// start at -1 because of the implicit false border.
struct EdgeKey {
  std::int64_t i;
  std::int64_t j;
  bool vertical;
};

}  // namespace

std::vector<Polyline> marching_squares_contours(const Mask2D& image, Vec2 spacing) {
  const auto w = static_cast<std::int64_t>(image.width);
  const auto h = static_cast<std::int64_t>(image.height);
  auto value = [&](std::int64_t x, std::int64_t y) {
    return x >= 0 && y >= 0 && x < w && y < h && image.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  };
  auto key_of = [w](const EdgeKey& e) -> std::int64_t { return (((e.j + 1) * (w + 2)) + (e.i + 1)) * 2 + e.vertical; };
  auto point_of = [spacing](const EdgeKey& e) {
    const double x = static_cast<double>(e.i) + (e.vertical ? 0.0 : 0.5);
    const double y = static_cast<double>(e.j) + (e.vertical ? 0.5 : 0.0);
    return Vec2{x * spacing.x, y * spacing.y};
  };

  std::vector<std::array<EdgeKey, 2>> segments;
  for (std::int64_t j = -1; j < h; ++j) {
    for (std::int64_t i = -1; i < w; ++i) {
      const int a = value(i, j), b = value(i + 1, j), c = value(i + 1, j + 1), d = value(i, j + 1);
      const int code = a | (b << 1) | (c << 2) | (d << 3);
      if (code == 0 || code == 15) continue;
      const EdgeKey ab{i, j, false}, bc{i + 1, j, true}, cd{i, j + 1, false}, da{i, j, true};
      switch (code) {
        case 1: case 14: segments.push_back({da, ab}); break;
        case 2: case 13: segments.push_back({ab, bc}); break;
        case 4: case 11: segments.push_back({bc, cd}); break;
        case 8: case 7: segments.push_back({cd, da}); break;
        case 3: case 12: segments.push_back({da, bc}); break;
        case 6: case 9: segments.push_back({ab, cd}); break;
        case 5:  // a and c joined through the centre: cut off b and d
          segments.push_back({ab, bc});
          segments.push_back({cd, da});
          break;
        case 10:  // b and d joined: cut off a and c
          segments.push_back({da, ab});
          segments.push_back({bc, cd});
          break;
        default: break;
      }
    }
  }

  std::unordered_map<std::int64_t, std::array<std::size_t, 2>> incident;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (const auto& e : segments[s]) {
      auto [it, inserted] = incident.try_emplace(key_of(e), std::array<std::size_t, 2>{s, kNone});
      if (!inserted) it->second[1] = s;
    }
  }

  std::vector<Polyline> loops;
  std::vector<bool> used(segments.size(), false);
  for (std::size_t start = 0; start < segments.size(); ++start) {
    if (used[start]) continue;
    Polyline loop;
    std::size_t s = start;
    EdgeKey entry = segments[s][0];
    loop.push_back(point_of(entry));
    while (!used[s]) {
      used[s] = true;
      const EdgeKey exit = key_of(segments[s][0]) == key_of(entry) ? segments[s][1] : segments[s][0];
      loop.push_back(point_of(exit));
      const auto& pair = incident.at(key_of(exit));
      s = pair[0] == s ? pair[1] : pair[0];
      entry = exit;
      if (s == kNone) throw Error(ErrorCode::InvalidArgument, "open contour");
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

double signed_area(const Polyline& p) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) sum += p[k].x * p[k + 1].y - p[k + 1].x * p[k].y;
  return 0.5 * sum;
}

double perimeter(const Polyline& p) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) sum += std::hypot(p[k + 1].x - p[k].x, p[k + 1].y - p[k].y);
  return sum;
}

bool is_closed(const Polyline& p) { return p.size() >= 4 && p.front() == p.back(); }

namespace {

double orient(Vec2 a, Vec2 b, Vec2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

}  // namespace

bool is_simple(const Polyline& p) {
  const std::size_t n = p.size() - 1;  // edge count of the closed loop
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const bool adjacent = b == a + 1 || (a == 0 && b == n - 1);
      if (adjacent) continue;
      if (segments_intersect(p[a], p[a + 1], p[b], p[b + 1])) return false;
    }
  }
  return true;
}

bool point_inside(const std::vector<Polyline>& polylines, Vec2 q) {
  bool inside = false;
  for (const auto& p : polylines) {
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      const Vec2 a = p[k], b = p[k + 1];
      if ((a.y > q.y) != (b.y > q.y)) {
        const double x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (q.x < x) inside = !inside;
      }
    }
  }
  return inside;
}

Mask2D rasterize_contours(const std::vector<Polyline>& polylines, std::size_t width, std::size_t height,
                          Vec2 spacing) {
  Mask2D out{width, height, std::vector<std::uint8_t>(width * height, 0)};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Vec2 centre{static_cast<double>(x) * spacing.x, static_cast<double>(y) * spacing.y};
      out.pixels[x + width * y] = point_inside(polylines, centre) ? 1 : 0;
    }
  }
  return out;
}

Polyline offset_polyline(const Polyline& p, double distance) {
  if (!is_closed(p) || distance == 0.0) return p;
  const std::size_t n = p.size() - 1;
  // Outward normal of an edge is to the right of travel for CCW loops.
  const double sense = signed_area(p) >= 0.0 ? 1.0 : -1.0;
  auto normal = [&](std::size_t k) {
    const Vec2 a = p[k % n], b = p[(k + 1) % n];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) return Vec2{};
    return Vec2{sense * (b.y - a.y) / len, -sense * (b.x - a.x) / len};
  };
  Polyline out;
  out.reserve(p.size());
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 n0 = normal(k + n - 1), n1 = normal(k);
    Vec2 m{n0.x + n1.x, n0.y + n1.y};
    const double len = std::hypot(m.x, m.y);
    if (len > 0.0) m = {m.x / len, m.y / len};
    out.push_back({p[k].x + distance * m.x, p[k].y + distance * m.y});
  }
  out.push_back(out.front());
  return out;
}

}  // namespace deepconn
