#pragma once

#include <span>
#include <string>
#include <vector>

#include "dvpmvs/config.hpp"
#include "dvpmvs/scene_io.hpp"

namespace dvp {

struct FusionParams {
  int min_consistent = 2;
  double reproj_px = 2.0;
  double rel_depth = 0.01;
  double normal_deg = 10.0;
  double max_cost = 1.5;
  bool skip_highlight = true;

  static FusionParams from_config(const Config& config);
};

struct FusedPoint {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // world frame, unit
  int support = 0;              // agreeing views besides the reference
  float intensity = 0.f;
};

struct FusedCloud {
  std::vector<FusedPoint> points;

  std::vector<CloudPoint> to_cloud_points() const;
};

// Consistency fusion. results[i] belongs to scene.views[i]. Views are visited
// in scene order and pixels in raster order; every pixel joins at most one
// point.
FusedCloud fuse(std::span<const DepthNormalResult> results, const Scene& scene,
                const FusionParams& params);

struct EvalReport {
  double threshold = 0.0;
  double accuracy = 0.0;      // %
  double completeness = 0.0;  // %
  double f1 = 0.0;            // %
  std::size_t cloud_points = 0;
  std::size_t gt_points = 0;
};

// Exact radius queries on a uniform hash grid with cell size = radius.
class SpatialIndex {
 public:
  SpatialIndex(std::span<const Vec3> points, double radius);
  bool any_within(const Vec3& q) const;  // ‖q − p‖ ≤ radius for some p

 private:
  std::int64_t key(std::int64_t x, std::int64_t y, std::int64_t z) const;
  std::vector<Vec3> points_;
  std::vector<std::int64_t> keys_;  // cell key of each point, sorted
  double radius_;
};

EvalReport evaluate(std::span<const Vec3> cloud, std::span<const Vec3> gt,
                    double tau, int threads = 1);

// Largest pairwise distance between axis-aligned bounding box corners.
double bounding_diameter(std::span<const Vec3> points);

std::vector<Vec3> positions(const std::vector<CloudPoint>& cloud);

// Fixed-width table and a `"schema":1` JSON object.
std::string format_report(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace dvp
