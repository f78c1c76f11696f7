#include "deepconn/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <fmt/format.h>

#include "deepconn/error.hpp"

namespace deepconn {

namespace {

__extension__ typedef __int128 wide_int;

// Scores closer than this are treated as ties.
constexpr double kTieEpsilon = 1e-12;

void require_same_plane(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.dims().nx != b.dims().nx || a.dims().ny != b.dims().ny) {
    throw Error(ErrorCode::GeometryMismatch, "blocks differ in in-plane dimensions");
  }
  if (!spacing_equal(a.spacing(), b.spacing())) throw Error(ErrorCode::GeometryMismatch, "blocks differ in spacing");
  if (a.depth() != b.depth()) throw Error(ErrorCode::GeometryMismatch, "blocks differ in bit depth");
}

// Candidate shifts in tie-break order.
std::vector<Shift2> ordered_shifts(int radius) {
  std::vector<Shift2> shifts;
  for (int dx = -radius; dx <= radius; ++dx) {
    for (int dy = -radius; dy <= radius; ++dy) shifts.push_back({dx, dy});
  }
  std::stable_sort(shifts.begin(), shifts.end(), [](Shift2 p, Shift2 q) {
    const int mp = std::abs(p.dx) + std::abs(p.dy);
    const int mq = std::abs(q.dx) + std::abs(q.dy);
    if (mp != mq) return mp < mq;
    if (p.dx != q.dx) return p.dx < q.dx;
    return p.dy < q.dy;
  });
  return shifts;
}

struct ShiftScore {
  Shift2 shift;
  double score = -2.0;
};

ShiftScore best_shift(const VoxelGrid& a, const VoxelGrid& b, std::size_t overlap, int radius) {
  ShiftScore best;
  for (const Shift2 s : ordered_shifts(radius)) {
    const double score = overlap_score(a, b, overlap, s);
    if (score > best.score + kTieEpsilon) best = {s, score};
  }
  return best;
}

}  // namespace

double shifted_ncc(const VoxelGrid& a, std::size_t za, const VoxelGrid& b, std::size_t zb, Shift2 shift) {
  const auto nx = static_cast<std::int64_t>(a.dims().nx);
  const auto ny = static_cast<std::int64_t>(a.dims().ny);
  const std::int64_t x0 = std::max<std::int64_t>(0, shift.dx);
  const std::int64_t x1 = std::min<std::int64_t>(nx, nx + shift.dx);
  const std::int64_t y0 = std::max<std::int64_t>(0, shift.dy);
  const std::int64_t y1 = std::min<std::int64_t>(ny, ny + shift.dy);
  if (x0 >= x1 || y0 >= y1) return 0.0;

  // Exact integer moments; the only rounding happens in the final division.
  std::uint64_t sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::int64_t y = y0; y < y1; ++y) {
    const std::size_t row_a = a.index(0, static_cast<std::size_t>(y), za);
    const std::size_t row_b = b.index(0, static_cast<std::size_t>(y - shift.dy), zb);
    for (std::int64_t x = x0; x < x1; ++x) {
      const std::uint64_t pa = va[row_a + static_cast<std::size_t>(x)];
      const std::uint64_t pb = vb[row_b + static_cast<std::size_t>(x - shift.dx)];
      sa += pa;
      sb += pb;
      saa += pa * pa;
      sbb += pb * pb;
      sab += pa * pb;
    }
  }
  const auto n = static_cast<wide_int>((x1 - x0) * (y1 - y0));
  const wide_int cov = n * static_cast<wide_int>(sab) - static_cast<wide_int>(sa) * static_cast<wide_int>(sb);
  const wide_int var_a = n * static_cast<wide_int>(saa) - static_cast<wide_int>(sa) * static_cast<wide_int>(sa);
  const wide_int var_b = n * static_cast<wide_int>(sbb) - static_cast<wide_int>(sb) * static_cast<wide_int>(sb);
  if (var_a <= 0 || var_b <= 0) return 0.0;
  return static_cast<double>(cov) / std::sqrt(static_cast<double>(var_a) * static_cast<double>(var_b));
}

double overlap_score(const VoxelGrid& a, const VoxelGrid& b, std::size_t overlap, Shift2 shift) {
  const std::size_t nza = a.dims().nz;
  double total = 0.0;
  for (std::size_t m = 0; m < overlap; ++m) total += shifted_ncc(a, nza - overlap + m, b, m, shift);
  return total / static_cast<double>(overlap);
}

Shift2 find_translation(const VoxelGrid& a, const VoxelGrid& b, std::size_t overlap, int radius) {
  if (overlap == 0) throw Error(ErrorCode::NoOverlap, "translation needs at least one overlapping slice");
  require_same_plane(a, b);
  if (overlap > a.dims().nz || overlap > b.dims().nz) {
    throw Error(ErrorCode::OverlapTooLarge, "overlap exceeds block depth");
  }
  if (radius < 0) throw Error(ErrorCode::InvalidArgument, "negative search radius");
  return best_shift(a, b, overlap, radius).shift;
}

BlockAlignment detect_overlap(const VoxelGrid& a, const VoxelGrid& b, const OverlapSearch& search) {
  require_same_plane(a, b);
  if (search.radius < 0) throw Error(ErrorCode::InvalidArgument, "negative search radius");
  const std::size_t limit = std::min({search.max_overlap, a.dims().nz, b.dims().nz});

  BlockAlignment best;
  best.confidence = -2.0;
  for (std::size_t o = 1; o <= limit; ++o) {
    const ShiftScore s = best_shift(a, b, o, search.radius);
    // Ascending o with >= keeps the largest overlap among ties.
    if (s.score >= best.confidence - kTieEpsilon) {
      best.overlap = o;
      best.shift = s.shift;
      best.confidence = s.score;
    }
  }
  if (limit == 0 || best.confidence < search.min_confidence) {
    BlockAlignment none;
    none.confidence = limit == 0 ? 0.0 : best.confidence;
    none.low_confidence = true;
    return none;
  }
  return best;
}

VoxelGrid shift_in_plane(const VoxelGrid& grid, Shift2 shift) {
  const auto& d = grid.dims();
  std::vector<std::uint16_t> out(d.count(), 0);
  const auto nx = static_cast<std::int64_t>(d.nx);
  const auto ny = static_cast<std::int64_t>(d.ny);
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      const std::int64_t sy = y - shift.dy;
      if (sy < 0 || sy >= ny) continue;
      for (std::int64_t x = 0; x < nx; ++x) {
        const std::int64_t sx = x - shift.dx;
        if (sx < 0 || sx >= nx) continue;
        out[grid.index(static_cast<std::size_t>(x), static_cast<std::size_t>(y), z)] =
            grid.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), z);
      }
    }
  }
  return VoxelGrid(d, grid.spacing(), grid.origin(), grid.depth(), std::move(out));
}

VoxelGrid concatenate_blocks(const std::vector<VoxelGrid>& blocks, const std::vector<BlockAlignment>& alignments) {
  if (blocks.empty()) throw Error(ErrorCode::InvalidArgument, "no blocks to concatenate");
  if (alignments.size() + 1 != blocks.size()) {
    throw Error(ErrorCode::InvalidArgument, "need exactly one alignment per junction");
  }
  const VoxelGrid& first = blocks.front();
  std::size_t total_z = first.dims().nz;
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    require_same_plane(first, blocks[k]);
    if (alignments[k - 1].overlap >= blocks[k].dims().nz) {
      throw Error(ErrorCode::OverlapTooLarge,
                  fmt::format("junction {}: overlap {} >= block depth {}", k - 1, alignments[k - 1].overlap,
                              blocks[k].dims().nz));
    }
    total_z += blocks[k].dims().nz - alignments[k - 1].overlap;
  }

  const std::size_t plane = first.dims().nx * first.dims().ny;
  std::vector<std::uint16_t> out;
  out.reserve(plane * total_z);
  out.insert(out.end(), first.values().begin(), first.values().end());
  Shift2 accumulated;
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    accumulated.dx += alignments[k - 1].shift.dx;
    accumulated.dy += alignments[k - 1].shift.dy;
    const VoxelGrid moved = shift_in_plane(blocks[k], accumulated);
    const auto begin = moved.values().begin() + static_cast<std::ptrdiff_t>(plane * alignments[k - 1].overlap);
    out.insert(out.end(), begin, moved.values().end());
  }
  return VoxelGrid({first.dims().nx, first.dims().ny, total_z}, first.spacing(), first.origin(), first.depth(),
                   std::move(out));
}

std::string format_alignment_report(const std::vector<BlockAlignment>& alignments) {
  std::ostringstream out;
  out << "# junction overlap dx dy confidence mode\n";
  for (std::size_t k = 0; k < alignments.size(); ++k) {
    const auto& a = alignments[k];
    out << fmt::format("{} {} {} {} {:.6f} {}{}\n", k, a.overlap, a.shift.dx, a.shift.dy, a.confidence,
                       a.manual ? "manual" : "auto", a.low_confidence ? " low-confidence" : "");
  }
  return out.str();
}

}  // namespace deepconn
