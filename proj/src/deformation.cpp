#include "dvpmvs/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dvp {
namespace {

// True when a beats b: larger gain, then lower cost, then nearer.
bool better(std::int64_t gain_a, const AnchorCandidate& a, std::int64_t gain_b,
            const AnchorCandidate& b) {
  if (gain_a != gain_b) return gain_a > gain_b;
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.dist2 < b.dist2;
}

}  // namespace

int sector_of(const Vec2i& offset, int num_sectors) {
  double angle = std::atan2(static_cast<double>(offset.y()),
                            static_cast<double>(offset.x()));
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const int s = static_cast<int>(angle / (2.0 * std::numbers::pi) * num_sectors);
  return std::clamp(s, 0, num_sectors - 1);
}

SectorCandidates collect_candidates(const Vec2i& p, const Mask& reliable,
                                    const Grid<float>& cost,
                                    const Grid<std::int32_t>* labels,
                                    const AnchorSearch& search) {
  SectorCandidates out;
  out.sectors.resize(search.num_sectors);
  const int own = labels ? (*labels)(p.x(), p.y()) : 0;
  if (labels && own == 0) return out;
  const double sector_angle = 2.0 * std::numbers::pi / search.num_sectors;
  for (int s = 0; s < search.num_sectors; ++s) {
    auto& list = out.sectors[s];
    for (int r = 0; r < search.candidates_per_sector; ++r) {
      const double theta =
          (s + (r + 0.5) / search.candidates_per_sector) * sector_angle;
      const double c = std::cos(theta), sn = std::sin(theta);
      for (int t = 1; t <= search.radius; ++t) {
        const int qx = p.x() + static_cast<int>(std::lround(t * c));
        const int qy = p.y() + static_cast<int>(std::lround(t * sn));
        if (!reliable.contains(qx, qy)) break;
        if (qx == p.x() && qy == p.y()) continue;
        if (!reliable(qx, qy)) continue;
        if (labels && (*labels)(qx, qy) != own) continue;
        // Rounding can land a ray pixel in the neighboring sector.
        const Vec2i off(qx - p.x(), qy - p.y());
        if (sector_of(off, search.num_sectors) != s) continue;
        AnchorCandidate cand;
        cand.pixel = Vec2i(qx, qy);
        cand.cost = cost(qx, qy);
        cand.dist2 = static_cast<std::int64_t>(off.x()) * off.x() +
                     static_cast<std::int64_t>(off.y()) * off.y();
        const bool dup = std::any_of(list.begin(), list.end(), [&](const auto& e) {
          return e.pixel == cand.pixel;
        });
        if (!dup) list.push_back(cand);
        break;
      }
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
      if (a.pixel.y() != b.pixel.y()) return a.pixel.y() < b.pixel.y();
      return a.pixel.x() < b.pixel.x();
    });
  }
  return out;
}

std::int64_t twice_area(const Vec2i& a, const Vec2i& b, const Vec2i& p) {
  const std::int64_t ax = a.x() - p.x(), ay = a.y() - p.y();
  const std::int64_t bx = b.x() - p.x(), by = b.y() - p.y();
  const std::int64_t cross = ax * by - ay * bx;
  return cross < 0 ? -cross : cross;
}

std::vector<AnchorCandidate> select_nearest(const SectorCandidates& candidates) {
  std::vector<AnchorCandidate> out;
  for (const auto& list : candidates.sectors) {
    if (!list.empty()) out.push_back(list.front());
  }
  return out;
}

std::vector<AnchorCandidate> select_area_max(const SectorCandidates& candidates,
                                             const Vec2i& p) {
  const int n = static_cast<int>(candidates.sectors.size());
  std::vector<int> chosen(n, -1);
  for (int s = 0; s < n; ++s) {
    if (!candidates.sectors[s].empty()) chosen[s] = 0;  // nearest
  }
  for (int s = 0; s < n; ++s) {
    const auto& list = candidates.sectors[s];
    if (list.empty()) continue;
    const int prev = (s + n - 1) % n, next = (s + 1) % n;
    if (chosen[prev] < 0 || chosen[next] < 0) {
      int far = 0;
      for (int c = 1; c < static_cast<int>(list.size()); ++c) {
        const auto& a = list[c];
        const auto& b = list[far];
        if (a.dist2 > b.dist2 || (a.dist2 == b.dist2 && a.cost < b.cost)) far = c;
      }
      chosen[s] = far;
      continue;
    }
    const Vec2i& sp = candidates.sectors[prev][chosen[prev]].pixel;
    const Vec2i& sn = candidates.sectors[next][chosen[next]].pixel;
    const std::int64_t base = twice_area(sp, sn, p);
    int best = -1;
    std::int64_t best_gain = 0;
    for (int c = 0; c < static_cast<int>(list.size()); ++c) {
      const Vec2i& q = list[c].pixel;
      const std::int64_t gain = twice_area(sp, q, p) + twice_area(q, sn, p) - base;
      if (best < 0 || better(gain, list[c], best_gain, list[best])) {
        best = c;
        best_gain = gain;
      }
    }
    chosen[s] = best;
  }
  std::vector<AnchorCandidate> out;
  for (int s = 0; s < n; ++s) {
    if (chosen[s] >= 0) out.push_back(candidates.sectors[s][chosen[s]]);
  }
  return out;
}

std::vector<std::uint32_t> filter_visibility(
    std::span<const AnchorCandidate> anchors,
    std::span<const Grid<float>* const> weights) {
  std::vector<std::uint32_t> masks(anchors.size(), 0);
  for (size_t a = 0; a < anchors.size(); ++a) {
    const Vec2i& s = anchors[a].pixel;
    for (size_t k = 0; k < weights.size() && k < 32; ++k) {
      if ((*weights[k])(s.x(), s.y()) > 0.f) masks[a] |= (1u << k);
    }
  }
  return masks;
}

}  // namespace dvp
