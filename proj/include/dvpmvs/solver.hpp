#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dvpmvs/config.hpp"
#include "dvpmvs/geometry.hpp"
#include "dvpmvs/grid.hpp"
#include "dvpmvs/scene_io.hpp"

namespace dvp {

// Search range: config override, then scene.json, then the mono depths
// widened by 2× on either side.
DepthRange resolve_depth_range(const Scene& scene, const Config& config);

// Reliability: cost < tau.
Mask classify_reliability(const Grid<float>& cost, double tau);

// Counter-based seed for the per-pixel generator of one sweep.
std::uint64_t pixel_seed(std::int64_t seed, int view, int pass, int sweep,
                         std::int64_t pixel);

// minstd_rand with the few draws the solver needs.
class PixelRng {
 public:
  explicit PixelRng(std::uint64_t seed);
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  Vec3 unit_vector();

 private:
  std::uint32_t state_;
};

// Depth intervals on p's ray, each (inner, outer) ordered by depth:
// left = [ll, lr] below the current depth, right = [rl, rr] above it.
struct DepthIntervals {
  double ll = 0.0, lr = 0.0, rl = 0.0, rr = 0.0;
  bool valid = false;  // false → fall back to exponential perturbation
};

struct IntervalParams {
  double alpha = 1.0;
  double beta = 4.0;
  int mu = 3;
  std::string mode = "prose";  // prose | formula | fixed
  double fixed_rel = 0.01;

  static IntervalParams from_config(const Config& config);
};

// Depths reached by moving the mapped pixel of (p, d) in view j by ±α and
// ±(α+β) px along the epipolar line, clamped to the range. Empty when the
// line is undefined at p or p does not land in front of camera j.
std::optional<DepthIntervals> view_interval(const Vec2& p, double depth,
                                            const ViewPair& pair,
                                            const DepthRange& range,
                                            const IntervalParams& params);

// Aggregation over the views with weight > 0.
DepthIntervals epipolar_intervals(const Vec2& p, double depth,
                                  std::span<const ViewPair> pairs,
                                  std::span<const double> weights,
                                  const DepthRange& range,
                                  const IntervalParams& params);

// Camera centers of the sources in reference camera coordinates.
std::vector<Vec3> source_centers(std::span<const ViewPair> pairs);

// n·P ≤ 0 and n·(P − C_j) ≤ 0 for every source j with weight > 0, where P is
// the point at `depth` on p's ray (reference camera coordinates).
bool hemisphere_admissible(const Vec3& n, const Vec3& P,
                           std::span<const Vec3> centers,
                           std::span<const double> weights);

// Nearest admissible normal found by projecting out violated constraints;
// falls back to −normalize(Σ v̂).
Vec3 repair_normal(const Vec3& n, const Vec3& P, std::span<const Vec3> centers,
                   std::span<const double> weights);

struct SolveOptions {
  std::vector<int> views;  // view ids to report; empty → all
  std::function<void(const std::string&)> log;
};

// Solves every view of the scene in lockstep passes and returns the results
// of the requested views, in the order requested (scene order when empty).
std::vector<DepthNormalResult> solve_scene(const Scene& scene,
                                           const Config& config,
                                           const SolveOptions& options = {});

DepthNormalResult run_view(const Scene& scene, int view_id, const Config& config);

}  // namespace dvp
