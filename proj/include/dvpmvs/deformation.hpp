#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvpmvs/grid.hpp"
#include "dvpmvs/types.hpp"

namespace dvp {

struct AnchorCandidate {
  Vec2i pixel = Vec2i::Zero();
  float cost = 0.f;
  std::int64_t dist2 = 0;  // squared distance to p
};

// Per-sector candidates; sector k covers angles [k, k+1)·360°/num_sectors,
// measured with atan2(dy, dx) in image coordinates.
struct SectorCandidates {
  std::vector<std::vector<AnchorCandidate>> sectors;
};

int sector_of(const Vec2i& offset, int num_sectors);

struct AnchorSearch {
  int num_sectors = 8;
  int candidates_per_sector = 4;  // rays per sector
  int radius = 64;
};

// Casts `candidates_per_sector` rays through each sector and keeps the first
// reliable pixel on each ray that shares p's label. With `labels` null the
// region test is skipped; a p labeled 0 gets no candidates.
SectorCandidates collect_candidates(const Vec2i& p, const Mask& reliable,
                                    const Grid<float>& cost,
                                    const Grid<std::int32_t>* labels,
                                    const AnchorSearch& search);

// Twice the triangle area |(a−p)×(b−p)|, exact.
std::int64_t twice_area(const Vec2i& a, const Vec2i& b, const Vec2i& p);

// One anchor per non-empty sector. Starts from the nearest candidate of each
// sector, then sweeps sectors in angular order picking the candidate that
// maximizes the area gain against the current neighbors; ties prefer lower
// cost, then nearer. Sectors with a missing neighbor take the farthest
// candidate.
std::vector<AnchorCandidate> select_area_max(const SectorCandidates& candidates,
                                             const Vec2i& p);

// Nearest candidate of each non-empty sector (area maximization disabled).
std::vector<AnchorCandidate> select_nearest(const SectorCandidates& candidates);

// Bit k set iff weights[k](anchor) > 0, for up to 32 source views.
std::vector<std::uint32_t> filter_visibility(
    std::span<const AnchorCandidate> anchors,
    std::span<const Grid<float>* const> weights);

}  // namespace dvp
