#include "dvpmvs/edge_prior.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "json.hpp"

namespace dvp {
namespace {

constexpr std::int32_t kUnset = -1;

struct RegionPoints {
  std::vector<Vec3> points;
  double median_depth = 0.0;
};

RegionPoints gather_points(std::span<const std::int32_t> pixels,
                           const Grid<float>& depth, const Mat3& K_inv) {
  RegionPoints rp;
  rp.points.reserve(pixels.size());
  std::vector<double> depths;
  depths.reserve(pixels.size());
  const int w = depth.width();
  for (std::int32_t idx : pixels) {
    const int x = idx % w, y = idx / w;
    const double d = depth(x, y);
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    rp.points.push_back(mono_point(depth, K_inv, x, y));
    depths.push_back(d);
  }
  if (!depths.empty()) {
    auto mid = depths.begin() + static_cast<std::ptrdiff_t>(depths.size() / 2);
    std::nth_element(depths.begin(), mid, depths.end());
    rp.median_depth = *mid;
  }
  return rp;
}

int count_inliers(const std::vector<Vec3>& pts, const Vec3& n, double d,
                  double thr) {
  int c = 0;
  for (const auto& p : pts) {
    if (std::abs(n.dot(p) + d) <= thr) ++c;
  }
  return c;
}

void orient(Vec3& n, double& d) {
  if (d < 0.0) {
    n = -n;
    d = -d;
  }
}

std::vector<std::int32_t> neighbors4(std::int32_t idx, int w, int h) {
  std::vector<std::int32_t> out;
  const int x = idx % w, y = idx / w;
  if (x > 0) out.push_back(idx - 1);
  if (x + 1 < w) out.push_back(idx + 1);
  if (y > 0) out.push_back(idx - w);
  if (y + 1 < h) out.push_back(idx + w);
  return out;
}

double mean_phi(std::span<const std::int32_t> pixels,
                const Grid<Vec3f>& normals, int radius) {
  if (pixels.empty()) return 1.0;
  double sum = 0.0;
  const int w = normals.width();
  for (std::int32_t idx : pixels) {
    sum += normal_similarity(idx % w, idx / w, normals, radius);
  }
  return sum / static_cast<double>(pixels.size());
}

std::uint64_t region_seed(std::span<const std::int32_t> pixels) {
  std::uint64_t h = 0x9E3779B97F4A7C15ull ^ pixels.size();
  if (!pixels.empty()) {
    h ^= static_cast<std::uint64_t>(pixels.front()) * 0xBF58476D1CE4E5B9ull;
    h ^= static_cast<std::uint64_t>(pixels.back()) * 0x94D049BB133111EBull;
  }
  return h;
}

PlaneFit fit_region(std::span<const std::int32_t> pixels,
                    const Grid<float>& depth, const Mat3& K,
                    const AtlasParams& params) {
  return ransac_plane(pixels, depth, K, params.ransac_iterations,
                      params.ransac_threshold_rel, region_seed(pixels));
}

// Per-label pixel lists in raster order.
std::vector<std::vector<std::int32_t>> pixel_lists(const LabelMap& labels,
                                                   int max_label) {
  std::vector<std::vector<std::int32_t>> lists(static_cast<size_t>(max_label) + 1);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l > 0) lists[l].push_back(static_cast<std::int32_t>(i));
  }
  return lists;
}

// Pixels labeled 0, u or v within `reach` (Manhattan) of both u and v, for
// every pair of planarized labels.
std::map<std::pair<int, int>, std::vector<std::int32_t>> dilation_boundaries(
    const LabelMap& labels, const std::vector<RegionInfo>& info, int reach) {
  std::map<std::pair<int, int>, std::vector<std::int32_t>> out;
  const int w = labels.width(), h = labels.height();
  std::vector<int> seen;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      seen.clear();
      for (int dy = -reach; dy <= reach; ++dy) {
        const int rem = reach - std::abs(dy);
        for (int dx = -rem; dx <= rem; ++dx) {
          const int qx = x + dx, qy = y + dy;
          if (!labels.contains(qx, qy)) continue;
          const int l = labels(qx, qy);
          if (l <= 0 || !info[l].planarized) continue;
          if (std::find(seen.begin(), seen.end(), l) == seen.end()) {
            seen.push_back(l);
          }
        }
      }
      if (seen.size() < 2) continue;
      const int own = labels(x, y);
      std::sort(seen.begin(), seen.end());
      for (size_t a = 0; a < seen.size(); ++a) {
        for (size_t b = a + 1; b < seen.size(); ++b) {
          if (own != 0 && own != seen[a] && own != seen[b]) continue;
          out[{seen[a], seen[b]}].push_back(y * w + x);
        }
      }
    }
  }
  return out;
}

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Minimum-cost assignment (rows ≤ cols); returns column per row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n == 0 ? 0 : static_cast<int>(cost[0].size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

}  // namespace

AtlasParams AtlasParams::from_config(const Config& c) {
  AtlasParams p;
  p.eta = c.eta;
  p.phi_plane = c.phi_plane;
  p.phi_normal = c.phi_normal;
  p.gamma = c.gamma;
  p.kappa = c.kappa;
  p.delta = c.delta;
  p.ransac_iterations = c.ransac_iterations;
  p.ransac_threshold_rel = c.ransac_threshold_rel;
  p.erosion_passes = c.erosion_passes;
  p.rounds = c.atlas_rounds;
  p.normal_search_radius = c.normal_search_radius;
  p.dilation_reach = c.dilation_reach;
  p.eps_grad = c.eps_grad;
  p.roberts_threshold = c.roberts_threshold;
  return p;
}

Grid<float> roberts_magnitude(const Grid<float>& image) {
  Grid<float> mag(image.width(), image.height(), 0.f);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const float a = image(x, y);
      const float b = at_clamped(image, x + 1, y);
      const float c = at_clamped(image, x, y + 1);
      const float d = at_clamped(image, x + 1, y + 1);
      mag(x, y) = std::hypot(a - d, b - c);
    }
  }
  return mag;
}

double otsu_threshold(const Grid<float>& magnitude) {
  float max_v = 0.f;
  for (float v : magnitude.values()) max_v = std::max(max_v, v);
  if (!(max_v > 0.f)) return 0.0;
  constexpr int kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (float v : magnitude.values()) {
    const int b = std::min(kBins - 1, static_cast<int>(v / max_v * kBins));
    hist[b] += 1.0;
  }
  const double total = static_cast<double>(magnitude.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < kBins; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return (best_bin + 1) * static_cast<double>(max_v) / kBins;
}

Mask roberts_edges(const Grid<float>& image, double threshold, double eps_grad) {
  const Grid<float> mag = roberts_magnitude(image);
  const double t = std::max(threshold > 0.0 ? threshold : otsu_threshold(mag),
                            eps_grad);
  Mask edges(image.width(), image.height(), 0);
  for (size_t i = 0; i < mag.size(); ++i) edges[i] = mag[i] > t ? 1 : 0;
  return edges;
}

LabelMap label_regions(const Mask& edges, int* count) {
  const int w = edges.width(), h = edges.height();
  LabelMap labels(w, h, 0);
  int next = 0;
  std::vector<std::int32_t> stack;
  for (int i = 0; i < w * h; ++i) {
    if (edges[i] || labels[i] != 0) continue;
    ++next;
    labels[i] = next;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::int32_t cur = stack.back();
      stack.pop_back();
      for (std::int32_t q : neighbors4(cur, w, h)) {
        if (!edges[q] && labels[q] == 0) {
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

PlaneFit ransac_plane(std::span<const std::int32_t> pixels,
                      const Grid<float>& mono_depth, const Mat3& K,
                      int iterations, double threshold_rel, std::uint64_t seed) {
  const RegionPoints rp = gather_points(pixels, mono_depth, K.inverse());
  const auto& pts = rp.points;
  if (pts.size() < 3) {
    throw ValidationError("ransac_plane: need at least 3 points with valid depth");
  }
  const double thr = threshold_rel * rp.median_depth;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, pts.size() - 1);
  Vec3 best_n(0, 0, -1);
  double best_d = 0.0;
  int best_count = -1;
  for (int it = 0; it < iterations; ++it) {
    const size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double len = n.norm();
    if (!(len > 1e-12)) continue;
    n /= len;
    double d = -n.dot(pts[a]);
    orient(n, d);
    const int cnt = count_inliers(pts, n, d, thr);
    if (cnt > best_count) {
      best_count = cnt;
      best_n = n;
      best_d = d;
    }
  }
  if (best_count < 0) {
    // Every sample was degenerate (e.g. collinear points).
    best_count = count_inliers(pts, best_n, best_d, thr);
  }

  // Least-squares refinement on the inliers, kept unless it loses inliers.
  Vec3 centroid = Vec3::Zero();
  int m = 0;
  for (const auto& p : pts) {
    if (std::abs(best_n.dot(p) + best_d) <= thr) {
      centroid += p;
      ++m;
    }
  }
  if (m >= 3) {
    centroid /= m;
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
      if (std::abs(best_n.dot(p) + best_d) <= thr) {
        const Vec3 q = p - centroid;
        cov += q * q.transpose();
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    Vec3 n = es.eigenvectors().col(0).normalized();
    double d = -n.dot(centroid);
    orient(n, d);
    const int cnt = count_inliers(pts, n, d, thr);
    if (cnt >= best_count && n.allFinite()) {
      best_n = n;
      best_d = d;
      best_count = cnt;
    }
  }
  PlaneFit fit;
  fit.n = best_n;
  fit.d = best_d;
  fit.inlier_ratio = static_cast<double>(best_count) / static_cast<double>(pts.size());
  return fit;
}

double plane_similarity(const PlaneFit& a, const PlaneFit& b) {
  return a.n.dot(b.n) - std::min(1.0, std::abs(a.d - b.d));
}

double normal_similarity(int x, int y, const Grid<Vec3f>& normals, int radius) {
  static constexpr int kDirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const Vec3f& np = normals(x, y);
  double best = 1.0;
  for (const auto& dir : kDirs) {
    for (int k = 1; k <= radius; ++k) {
      const int qx = x + k * dir[0], qy = y + k * dir[1];
      if (!normals.contains(qx, qy)) break;
      best = std::min(best, static_cast<double>(np.dot(normals(qx, qy))));
    }
  }
  return best;
}

SplitResult try_erode_split(std::span<const std::int32_t> region,
                            const PlaneFit& plane, int width, int height,
                            const Grid<float>& mono_depth,
                            const Grid<Vec3f>& mono_normal, const Mat3& K,
                            const AtlasParams& params) {
  SplitResult result;
  if (region.size() < 6) return result;

  // Region mask over the bounding box, plus a 1-pixel frame.
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (std::int32_t idx : region) {
    x0 = std::min(x0, idx % width);
    x1 = std::max(x1, idx % width);
    y0 = std::min(y0, idx / width);
    y1 = std::max(y1, idx / width);
  }
  const int bw = x1 - x0 + 3, bh = y1 - y0 + 3;
  auto local = [&](std::int32_t idx) {
    return (idx / width - y0 + 1) * bw + (idx % width - x0 + 1);
  };
  std::vector<char> inside(static_cast<size_t>(bw) * bh, 0);
  for (std::int32_t idx : region) inside[local(idx)] = 1;

  // Erosion with a 3×3 cross. Outside the image counts as inside the region
  // so regions do not shrink along the image border.
  auto in_or_off_image = [&](const std::vector<char>& m, int lx, int ly) {
    const int gx = lx + x0 - 1, gy = ly + y0 - 1;
    if (gx < 0 || gy < 0 || gx >= width || gy >= height) return true;
    return m[ly * bw + lx] != 0;
  };
  std::vector<char> cur = inside, next;
  std::vector<int> comp(inside.size());
  std::vector<int> comp_sizes;
  bool split = false;
  for (int pass = 0; pass < params.erosion_passes && !split; ++pass) {
    next.assign(cur.size(), 0);
    for (int ly = 1; ly < bh - 1; ++ly) {
      for (int lx = 1; lx < bw - 1; ++lx) {
        const int i = ly * bw + lx;
        if (!cur[i]) continue;
        next[i] = in_or_off_image(cur, lx - 1, ly) &&
                  in_or_off_image(cur, lx + 1, ly) &&
                  in_or_off_image(cur, lx, ly - 1) &&
                  in_or_off_image(cur, lx, ly + 1);
      }
    }
    cur.swap(next);
    std::fill(comp.begin(), comp.end(), 0);
    comp_sizes.assign(1, 0);
    std::vector<int> stack;
    for (int i = 0; i < bw * bh; ++i) {
      if (!cur[i] || comp[i]) continue;
      const int id = static_cast<int>(comp_sizes.size());
      comp_sizes.push_back(0);
      comp[i] = id;
      stack.assign(1, i);
      while (!stack.empty()) {
        const int c = stack.back();
        stack.pop_back();
        ++comp_sizes[id];
        const int nb[4] = {c - 1, c + 1, c - bw, c + bw};
        for (int q : nb) {
          if (cur[q] && !comp[q]) {
            comp[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    if (comp_sizes.size() >= 3) split = true;
    if (comp_sizes.size() <= 1) break;  // eroded away
  }
  if (!split) return result;

  // Two largest components seed a breadth-first regrowth inside the region.
  int first = 1, second = 2;
  if (comp_sizes[second] > comp_sizes[first]) std::swap(first, second);
  for (int id = 3; id < static_cast<int>(comp_sizes.size()); ++id) {
    if (comp_sizes[id] > comp_sizes[first]) {
      second = first;
      first = id;
    } else if (comp_sizes[id] > comp_sizes[second]) {
      second = id;
    }
  }
  std::vector<char> part(inside.size(), 0);
  std::deque<int> queue;
  for (int i = 0; i < bw * bh; ++i) {
    if (comp[i] == first) {
      part[i] = 1;
      queue.push_back(i);
    } else if (comp[i] == second) {
      part[i] = 2;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    const int nb[4] = {c - 1, c + 1, c - bw, c + bw};
    for (int q : nb) {
      if (inside[q] && !part[q]) {
        part[q] = part[c];
        queue.push_back(q);
      }
    }
  }
  for (std::int32_t idx : region) {
    const int l = local(idx);
    if (part[l] == 2) {
      result.part_b.push_back(idx);
    } else {
      result.part_a.push_back(idx);
    }
  }
  if (result.part_a.size() < 3 || result.part_b.size() < 3) return result;

  std::vector<std::int32_t> boundary;
  for (std::int32_t idx : region) {
    const int l = local(idx);
    const int nb[4] = {l - 1, l + 1, l - bw, l + bw};
    for (int q : nb) {
      if (inside[q] && part[q] != part[l]) {
        boundary.push_back(idx);
        break;
      }
    }
  }

  try {
    result.plane_a = fit_region(result.part_a, mono_depth, K, params);
    result.plane_b = fit_region(result.part_b, mono_depth, K, params);
  } catch (const ValidationError&) {
    return result;
  }
  result.psi = plane_similarity(result.plane_a, result.plane_b);
  result.mean_phi = mean_phi(boundary, mono_normal, params.normal_search_radius);
  const double ratio = plane.inlier_ratio > 0.0
                           ? (result.plane_a.inlier_ratio +
                              result.plane_b.inlier_ratio) /
                                 (2.0 * plane.inlier_ratio)
                           : std::numeric_limits<double>::infinity();
  result.accepted = result.psi <= params.phi_plane && ratio >= params.gamma &&
                    result.mean_phi <= params.phi_normal;
  return result;
}

MergeDecision try_dilate_merge(const RegionInfo& u, const RegionInfo& v,
                               std::span<const std::int32_t> boundary,
                               const Grid<Vec3f>& mono_normal,
                               const AtlasParams& params) {
  MergeDecision dec;
  if (!u.planarized || !v.planarized || boundary.empty()) return dec;
  dec.psi = plane_similarity(u.plane, v.plane);
  dec.mean_phi = mean_phi(boundary, mono_normal, params.normal_search_radius);
  dec.accepted = dec.psi >= params.phi_plane &&
                 u.plane.inlier_ratio >= params.kappa &&
                 v.plane.inlier_ratio >= params.kappa &&
                 dec.mean_phi >= params.phi_normal;
  return dec;
}

bool pixel_filter(int x, int y, const RegionInfo& region,
                  const Grid<float>& mono_depth, const Grid<Vec3f>& mono_normal,
                  const Mat3& K_inv, const AtlasParams& params) {
  if (!region.planarized || region.plane.inlier_ratio < params.kappa) return false;
  const double d = mono_depth(x, y);
  if (!(d > 0.0) || !std::isfinite(d)) return false;
  const Vec3 P = mono_point(mono_depth, K_inv, x, y);
  const double dist =
      std::abs(region.plane.n.dot(P) + region.plane.d) / region.plane.n.norm();
  if (dist > params.delta) return false;
  return normal_similarity(x, y, mono_normal, params.normal_search_radius) >=
         params.phi_normal;
}

RegionAtlas build_atlas_from_labels(const LabelMap& initial,
                                    const Grid<float>& mono_depth,
                                    const Grid<Vec3f>& mono_normal,
                                    const Mat3& K, const AtlasParams& params,
                                    AtlasStats* stats) {
  const int w = initial.width(), h = initial.height();
  const Mat3 K_inv = K.inverse();
  AtlasStats st;
  LabelMap labels = initial;
  int max_label = 0;
  for (std::int32_t l : labels.values()) max_label = std::max(max_label, l);

  std::vector<RegionInfo> info(static_cast<size_t>(max_label) + 1);
  auto lists = pixel_lists(labels, max_label);
  for (int k = 1; k <= max_label; ++k) {
    info[k].pixel_count = static_cast<int>(lists[k].size());
    if (info[k].pixel_count >= params.eta) {
      try {
        info[k].plane = fit_region(lists[k], mono_depth, K, params);
        info[k].planarized = true;
      } catch (const ValidationError&) {
      }
    }
  }

  for (int round = 0; round < params.rounds; ++round) {
    bool changed = false;
    ++st.rounds;

    // Erosion sweep, largest regions first.
    std::vector<int> order;
    for (int k = 1; k < static_cast<int>(info.size()); ++k) {
      if (info[k].planarized) order.push_back(k);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return info[a].pixel_count > info[b].pixel_count;
    });
    for (int k : order) {
      SplitResult res = try_erode_split(lists[k], info[k].plane, w, h, mono_depth,
                                        mono_normal, K, params);
      if (!res.accepted) continue;
      const int nk = static_cast<int>(info.size());
      info.emplace_back();
      lists.emplace_back();
      for (std::int32_t idx : res.part_b) labels[idx] = nk;
      lists[k] = std::move(res.part_a);
      lists[nk] = std::move(res.part_b);
      info[k].pixel_count = static_cast<int>(lists[k].size());
      info[k].plane = res.plane_a;
      info[k].planarized = info[k].pixel_count >= params.eta;
      info[nk].pixel_count = static_cast<int>(lists[nk].size());
      info[nk].plane = res.plane_b;
      info[nk].planarized = info[nk].pixel_count >= params.eta;
      ++st.splits;
      changed = true;
    }

    // Dilation sweep over adjacent pairs.
    const auto boundaries =
        dilation_boundaries(labels, info, params.dilation_reach);
    std::vector<int> parent(info.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& [pair, boundary] : boundaries) {
      const int ru = find_root(parent, pair.first);
      const int rv = find_root(parent, pair.second);
      if (ru == rv) continue;
      const MergeDecision dec =
          try_dilate_merge(info[ru], info[rv], boundary, mono_normal, params);
      if (!dec.accepted) continue;
      const int keep = std::min(ru, rv), drop = std::max(ru, rv);
      parent[drop] = keep;
      auto& dst = lists[keep];
      dst.insert(dst.end(), lists[drop].begin(), lists[drop].end());
      std::sort(dst.begin(), dst.end());
      lists[drop].clear();
      info[keep].pixel_count = static_cast<int>(dst.size());
      info[keep].plane = fit_region(dst, mono_depth, K, params);
      info[keep].planarized = true;
      info[drop] = RegionInfo{};
      ++st.merges;
      changed = true;
    }
    for (auto& l : labels.values()) {
      if (l > 0) l = find_root(parent, l);
    }
    if (!changed) break;
  }

  // Regions too small to planarize become boundary.
  for (auto& l : labels.values()) {
    if (l > 0 && !info[l].planarized) l = 0;
  }

  // Pixel-wise filtering grows regions into boundary pixels.
  Grid<float> phi(w, h, std::numeric_limits<float>::quiet_NaN());
  auto phi_at = [&](int x, int y) {
    float& v = phi(x, y);
    if (std::isnan(v)) {
      v = static_cast<float>(
          normal_similarity(x, y, mono_normal, params.normal_search_radius));
    }
    return static_cast<double>(v);
  };
  auto candidate_label = [&](std::int32_t idx) {
    const int x = idx % w, y = idx / w;
    const double d = mono_depth(x, y);
    if (!(d > 0.0) || !std::isfinite(d)) return 0;
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::int32_t q : neighbors4(idx, w, h)) {
      const int l = labels[q];
      if (l <= 0) continue;
      const RegionInfo& r = info[l];
      if (!r.planarized || r.plane.inlier_ratio < params.kappa) continue;
      const Vec3 P = mono_point(mono_depth, K_inv, x, y);
      const double dist = std::abs(r.plane.n.dot(P) + r.plane.d);
      if (dist <= params.delta && (dist < best_dist || (dist == best_dist && l < best))) {
        best = l;
        best_dist = dist;
      }
    }
    if (best != 0 && phi_at(x, y) < params.phi_normal) return 0;
    return best;
  };
  std::vector<std::int32_t> frontier;
  std::vector<int> stamp(labels.size(), -1);
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(labels.size()); ++i) {
    if (labels[i] != 0) continue;
    for (std::int32_t q : neighbors4(i, w, h)) {
      if (labels[q] > 0) {
        frontier.push_back(i);
        stamp[i] = 0;
        break;
      }
    }
  }
  int iteration = 0;
  while (!frontier.empty()) {
    std::vector<std::pair<std::int32_t, int>> assign;
    for (std::int32_t idx : frontier) {
      const int l = candidate_label(idx);
      if (l > 0) assign.emplace_back(idx, l);
    }
    ++iteration;
    std::vector<std::int32_t> next;
    for (const auto& [idx, l] : assign) labels[idx] = l;
    for (const auto& [idx, l] : assign) {
      ++st.filtered_pixels;
      for (std::int32_t q : neighbors4(idx, w, h)) {
        if (labels[q] == 0 && stamp[q] != iteration) {
          stamp[q] = iteration;
          next.push_back(q);
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier.swap(next);
  }

  // Compact relabeling in raster order.
  RegionAtlas atlas;
  atlas.labels = LabelMap(w, h, 0);
  atlas.regions.assign(1, RegionInfo{});
  std::vector<int> remap(info.size(), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l <= 0) continue;
    if (remap[l] == 0) {
      remap[l] = static_cast<int>(atlas.regions.size());
      RegionInfo r = info[l];
      r.pixel_count = 0;
      atlas.regions.push_back(r);
    }
    atlas.labels[i] = remap[l];
    ++atlas.regions[remap[l]].pixel_count;
  }
  if (stats) *stats = st;
  return atlas;
}

RegionAtlas build_atlas(const Grid<float>& image, const PriorBundle& priors,
                        const Mat3& K, const AtlasParams& params,
                        AtlasStats* stats) {
  const Mask edges = priors.edge_map.empty()
                         ? roberts_edges(image, params.roberts_threshold,
                                         params.eps_grad)
                         : priors.edge_map;
  const LabelMap initial = label_regions(edges);
  return build_atlas_from_labels(initial, priors.mono_depth, priors.mono_normal,
                                 K, params, stats);
}

double label_agreement(const LabelMap& labels, const LabelMap& truth) {
  std::map<int, int> row_of, col_of;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (truth[i] < 0) continue;
    col_of.emplace(truth[i], 0);
    if (labels[i] > 0) row_of.emplace(labels[i], 0);
  }
  int r = 0, c = 0;
  for (auto& [k, v] : row_of) v = r++;
  for (auto& [k, v] : col_of) v = c++;
  size_t counted = 0;
  std::vector<std::vector<double>> overlap(r, std::vector<double>(c, 0.0));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (truth[i] < 0) continue;
    ++counted;
    if (labels[i] > 0) overlap[row_of[labels[i]]][col_of[truth[i]]] += 1.0;
  }
  if (counted == 0) return 0.0;
  // Square cost matrix; the dummy rows/columns contribute nothing.
  const int n = std::max(r, c);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) cost[i][j] = -overlap[i][j];
  }
  const std::vector<int> match = hungarian(cost);
  double matched = 0.0;
  for (int i = 0; i < r; ++i) {
    if (match[i] >= 0 && match[i] < c) matched += overlap[i][match[i]];
  }
  return matched / static_cast<double>(counted);
}

void write_atlas_debug(const RegionAtlas& atlas, const std::filesystem::path& dir,
                       int view_id) {
  std::filesystem::create_directories(dir);
  Grid<std::uint8_t> img(atlas.labels.width(), atlas.labels.height(), 0);
  for (size_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<std::uint8_t>(atlas.labels[i] % 256);
  }
  const std::string stem = std::to_string(view_id);
  write_png_gray8(img, dir / (stem + ".atlas.png"));
  nlohmann::json j;
  j["schema"] = 1;
  j["view"] = view_id;
  nlohmann::json regions = nlohmann::json::array();
  for (int k = 1; k <= atlas.region_count(); ++k) {
    const RegionInfo& r = atlas.regions[k];
    regions.push_back({{"label", k},
                       {"pixel_count", r.pixel_count},
                       {"normal", {r.plane.n.x(), r.plane.n.y(), r.plane.n.z()}},
                       {"offset", r.plane.d},
                       {"inlier_ratio", r.plane.inlier_ratio},
                       {"planarized", r.planarized}});
  }
  j["regions"] = regions;
  std::ofstream out(dir / (stem + ".atlas.json"), std::ios::trunc);
  out << j.dump(2) << '\n';
}

}  // namespace dvp
