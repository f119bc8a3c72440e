#include "dvpmvs/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dvpmvs/geometry.hpp"
#include "dvpmvs/parallel.hpp"
#include "json.hpp"

namespace dvp {

FusionParams FusionParams::from_config(const Config& c) {
  FusionParams p;
  p.min_consistent = c.fuse_min_consistent;
  p.reproj_px = c.fuse_reproj_px;
  p.rel_depth = c.fuse_rel_depth;
  p.normal_deg = c.fuse_normal_deg;
  p.max_cost = c.fuse_max_cost;
  p.skip_highlight = c.fuse_skip_highlight;
  return p;
}

std::vector<CloudPoint> FusedCloud::to_cloud_points() const {
  std::vector<CloudPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    CloudPoint c;
    c.position = p.position.cast<float>();
    c.normal = p.normal.cast<float>();
    const auto g = static_cast<std::uint8_t>(
        std::lround(std::clamp(p.intensity, 0.f, 1.f) * 255.f));
    c.color = {g, g, g};
    out.push_back(c);
  }
  return out;
}

namespace {

bool usable(const DepthNormalResult& r, const SceneView& view, int x, int y,
            const FusionParams& params) {
  if (r.degenerate) return false;
  const float d = r.depth(x, y);
  if (!(d > 0.f) || !std::isfinite(d)) return false;
  if (!(r.cost(x, y) < params.max_cost)) return false;
  if (params.skip_highlight && !view.priors.highlight_mask.empty() &&
      view.priors.highlight_mask(x, y)) {
    return false;
  }
  return true;
}

}  // namespace

FusedCloud fuse(std::span<const DepthNormalResult> results, const Scene& scene,
                const FusionParams& params) {
  const size_t n = scene.views.size();
  if (results.size() != n) {
    throw ValidationError("fuse: one result per scene view is required");
  }
  std::vector<Mask> consumed;
  std::vector<Mat3> K_inv, R_t;
  for (size_t i = 0; i < n; ++i) {
    const auto& cam = scene.views[i].camera;
    if (results[i].depth.width() != cam.width ||
        results[i].depth.height() != cam.height) {
      throw ValidationError("fuse: view " + std::to_string(cam.id) +
                            ": depth map does not match the image size");
    }
    consumed.emplace_back(cam.width, cam.height, 0);
    K_inv.push_back(cam.K_inv());
    R_t.push_back(cam.R.transpose());
  }
  const double cos_max = std::cos(params.normal_deg * M_PI / 180.0);

  FusedCloud cloud;
  for (size_t i = 0; i < n; ++i) {
    const auto& view_i = scene.views[i];
    const auto& cam_i = view_i.camera;
    const auto& ri = results[i];
    for (int y = 0; y < cam_i.height; ++y) {
      for (int x = 0; x < cam_i.width; ++x) {
        if (consumed[i](x, y) || !usable(ri, view_i, x, y, params)) continue;
        const Vec3 X = back_project(Vec2(x, y), ri.depth(x, y), cam_i);
        const Vec3 N = (R_t[i] * ri.normal(x, y).cast<double>()).normalized();

        std::vector<std::pair<size_t, Vec2i>> agree;
        Vec3 sum_x = X, sum_n = N;
        double sum_i = cam_i.image(x, y);
        for (size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          const auto& view_j = scene.views[j];
          const auto& cam_j = view_j.camera;
          const Projection pj = project(X, cam_j);
          if (!(pj.depth > 0.0)) continue;
          const int u = static_cast<int>(std::lround(pj.pixel.x()));
          const int v = static_cast<int>(std::lround(pj.pixel.y()));
          if (!consumed[j].contains(u, v) || consumed[j](u, v)) continue;
          if (!usable(results[j], view_j, u, v, params)) continue;
          const double dj = results[j].depth(u, v);
          if (std::abs(pj.depth - dj) / dj >= params.rel_depth) continue;
          const Vec3 Xj = back_project(Vec2(u, v), dj, cam_j);
          const Projection back = project(Xj, cam_i);
          if (!(back.depth > 0.0) ||
              (back.pixel - Vec2(x, y)).norm() >= params.reproj_px) {
            continue;
          }
          const Vec3 Nj = (R_t[j] * results[j].normal(u, v).cast<double>()).normalized();
          if (!(N.dot(Nj) > cos_max)) continue;
          agree.emplace_back(j, Vec2i(u, v));
          sum_x += Xj;
          sum_n += Nj;
          sum_i += cam_j.image(u, v);
        }
        if (static_cast<int>(agree.size()) < params.min_consistent) continue;
        consumed[i](x, y) = 1;
        for (const auto& [j, q] : agree) consumed[j](q.x(), q.y()) = 1;
        const double count = static_cast<double>(agree.size() + 1);
        FusedPoint p;
        p.position = sum_x / count;
        p.normal = sum_n.norm() > 0.0 ? Vec3(sum_n.normalized()) : N;
        p.support = static_cast<int>(agree.size());
        p.intensity = static_cast<float>(sum_i / count);
        cloud.points.push_back(p);
      }
    }
  }
  return cloud;
}

SpatialIndex::SpatialIndex(std::span<const Vec3> points, double radius)
    : radius_(radius) {
  if (!(radius > 0.0)) throw ValidationError("evaluation threshold must be > 0");
  std::vector<std::pair<std::int64_t, size_t>> order;
  order.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3& p = points[i];
    order.emplace_back(key(static_cast<std::int64_t>(std::floor(p.x() / radius)),
                           static_cast<std::int64_t>(std::floor(p.y() / radius)),
                           static_cast<std::int64_t>(std::floor(p.z() / radius))),
                       i);
  }
  std::sort(order.begin(), order.end());
  points_.reserve(order.size());
  keys_.reserve(order.size());
  for (const auto& [k, i] : order) {
    keys_.push_back(k);
    points_.push_back(points[i]);
  }
}

std::int64_t SpatialIndex::key(std::int64_t x, std::int64_t y, std::int64_t z) const {
  // Distinct cells may share a key; the distance test keeps queries exact.
  const auto ux = static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull;
  const auto uy = static_cast<std::uint64_t>(y) * 0xC2B2AE3D27D4EB4Full;
  const auto uz = static_cast<std::uint64_t>(z) * 0x165667B19E3779F9ull;
  return static_cast<std::int64_t>(ux ^ (uy + 0x27D4EB2F165667C5ull) ^ (uz << 1));
}

bool SpatialIndex::any_within(const Vec3& q) const {
  const auto cx = static_cast<std::int64_t>(std::floor(q.x() / radius_));
  const auto cy = static_cast<std::int64_t>(std::floor(q.y() / radius_));
  const auto cz = static_cast<std::int64_t>(std::floor(q.z() / radius_));
  const double r2 = radius_ * radius_;
  for (std::int64_t dz = -1; dz <= 1; ++dz) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t k = key(cx + dx, cy + dy, cz + dz);
        auto [lo, hi] = std::equal_range(keys_.begin(), keys_.end(), k);
        for (auto it = lo; it != hi; ++it) {
          const Vec3& p = points_[static_cast<size_t>(it - keys_.begin())];
          if ((p - q).squaredNorm() <= r2) return true;
        }
      }
    }
  }
  return false;
}

namespace {

double fraction_within(std::span<const Vec3> queries, const SpatialIndex& index,
                       int threads) {
  if (queries.empty()) return 0.0;
  std::atomic<std::size_t> hits{0};
  parallel_for(0, static_cast<int>(queries.size()), threads, [&](int i) {
    if (index.any_within(queries[i])) hits.fetch_add(1, std::memory_order_relaxed);
  });
  return 100.0 * static_cast<double>(hits.load()) / static_cast<double>(queries.size());
}

}  // namespace

EvalReport evaluate(std::span<const Vec3> cloud, std::span<const Vec3> gt, double tau,
                    int threads) {
  EvalReport r;
  r.threshold = tau;
  r.cloud_points = cloud.size();
  r.gt_points = gt.size();
  const SpatialIndex gt_index(gt, tau);
  const SpatialIndex cloud_index(cloud, tau);
  r.accuracy = fraction_within(cloud, gt_index, threads);
  r.completeness = fraction_within(gt, cloud_index, threads);
  const double s = r.accuracy + r.completeness;
  r.f1 = s > 0.0 ? 2.0 * r.accuracy * r.completeness / s : 0.0;
  return r;
}

double bounding_diameter(std::span<const Vec3> points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

std::vector<Vec3> positions(const std::vector<CloudPoint>& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(p.position.cast<double>());
  return out;
}

std::string format_report(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-12s %12s %12s %12s %10s %10s\n%-12.6g %12.2f %12.2f %12.2f %10zu %10zu\n",
                "threshold", "accuracy", "completeness", "f1", "points", "gt_points",
                r.threshold, r.accuracy, r.completeness, r.f1, r.cloud_points,
                r.gt_points);
  return buf;
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["threshold"] = r.threshold;
  j["accuracy"] = r.accuracy;
  j["completeness"] = r.completeness;
  j["f1"] = r.f1;
  j["points"] = r.cloud_points;
  j["gt_points"] = r.gt_points;
  return j.dump(2);
}

}  // namespace dvp
