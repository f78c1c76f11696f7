#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "deepconn/volume.hpp"

namespace deepconn {

/// Junction between consecutive blocks: the later block's first `overlap`
/// slices duplicate the earlier block's last ones, and the later block must be
/// translated by `shift` to line up.
struct BlockAlignment {
  std::size_t overlap = 0;
  Shift2 shift;
  double confidence = 0.0;
  bool manual = false;
  bool low_confidence = false;
};

struct OverlapSearch {
  std::size_t max_overlap = 16;
  int radius = 10;
  double min_confidence = 0.6;
};

/// Normalized cross-correlation between slice `za` of `a` and slice `zb` of
/// `b` translated by `shift` (b'(x, y) = b(x - dx, y - dy)), over the pixels
/// where both are defined. Zero-variance inputs score 0.
double shifted_ncc(const VoxelGrid& a, std::size_t za, const VoxelGrid& b, std::size_t zb, Shift2 shift);

/// Mean NCC over the `overlap` slice pairs (last slices of a, first of b).
double overlap_score(const VoxelGrid& a, const VoxelGrid& b, std::size_t overlap, Shift2 shift);

/// Best shift within +-radius for a given overlap. Ties go to the smallest
/// |dx| + |dy|, then to the lexicographically smallest (dx, dy).
Shift2 find_translation(const VoxelGrid& a, const VoxelGrid& b, std::size_t overlap, int radius);

/// Exhaustive search over overlap 1..max_overlap and all shifts. Equal scores
/// prefer the larger overlap. Below `min_confidence` the result is overlap 0,
/// shift (0, 0) with `low_confidence` set.
BlockAlignment detect_overlap(const VoxelGrid& a, const VoxelGrid& b, const OverlapSearch& search = {});

/// Translates every slice in-plane with zero fill.
VoxelGrid shift_in_plane(const VoxelGrid& grid, Shift2 shift);

/// Drops each later block's overlapping slices, applies the accumulated
/// shift and appends along z.
VoxelGrid concatenate_blocks(const std::vector<VoxelGrid>& blocks, const std::vector<BlockAlignment>& alignments);

/// One line per junction: index, overlap, dx, dy, confidence, mode.
std::string format_alignment_report(const std::vector<BlockAlignment>& alignments);

}  // namespace deepconn
