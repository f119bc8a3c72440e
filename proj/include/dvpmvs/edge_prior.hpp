#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dvpmvs/config.hpp"
#include "dvpmvs/grid.hpp"
#include "dvpmvs/scene_io.hpp"
#include "dvpmvs/types.hpp"

namespace dvp {

using LabelMap = Grid<std::int32_t>;

// Plane n·X + d = 0 in camera space with ‖n‖ = 1 and d ≥ 0.
struct PlaneFit {
  Vec3 n = Vec3(0, 0, -1);
  double d = 0.0;
  double inlier_ratio = 0.0;
};

struct RegionInfo {
  int pixel_count = 0;
  PlaneFit plane;
  bool planarized = false;
};

// labels: 0 = boundary/heterogeneous, k > 0 = region k; regions[k] describes
// label k (regions[0] is a placeholder).
struct RegionAtlas {
  LabelMap labels;
  std::vector<RegionInfo> regions;

  int region_count() const { return static_cast<int>(regions.size()) - 1; }
};

struct AtlasParams {
  int eta = 300;
  double phi_plane = 0.5;
  double phi_normal = 0.4;
  double gamma = 1.2;
  double kappa = 0.7;
  double delta = 0.8;
  int ransac_iterations = 256;
  double ransac_threshold_rel = 0.01;
  int erosion_passes = 5;
  int rounds = 3;
  int normal_search_radius = 3;
  int dilation_reach = 2;
  double eps_grad = 0.005;
  double roberts_threshold = 0.0;  // 0 → Otsu

  static AtlasParams from_config(const Config& config);
};

struct AtlasStats {
  int splits = 0;
  int merges = 0;
  int rounds = 0;
  int filtered_pixels = 0;
};

// Roberts cross gradient magnitude at (x, y), using the 2×2 block to the
// lower right (clamped at the border).
Grid<float> roberts_magnitude(const Grid<float>& image);

// Otsu threshold over the magnitudes (256 bins on [0, max]).
double otsu_threshold(const Grid<float>& magnitude);

// Edge pixels: magnitude > max(threshold, eps_grad); threshold 0 → Otsu.
Mask roberts_edges(const Grid<float>& image, double threshold, double eps_grad);

// 4-connected components of non-edge pixels, labeled 1..N in raster order.
LabelMap label_regions(const Mask& edges, int* count = nullptr);

// Mono-depth point of pixel (x, y).
inline Vec3 mono_point(const Grid<float>& depth, const Mat3& K_inv, int x,
                       int y) {
  return static_cast<double>(depth(x, y)) * (K_inv * Vec3(x, y, 1.0));
}

// RANSAC plane through the back-projected mono-depth points of `pixels`
// (indices into the depth grid). Throws ValidationError for < 3 points.
PlaneFit ransac_plane(std::span<const std::int32_t> pixels,
                      const Grid<float>& mono_depth, const Mat3& K,
                      int iterations, double threshold_rel,
                      std::uint64_t seed = 0);

double plane_similarity(const PlaneFit& a, const PlaneFit& b);

// Minimum n_p·n_q over pixels up to `radius` steps away in the four axis
// directions.
double normal_similarity(int x, int y, const Grid<Vec3f>& normals, int radius);

struct SplitResult {
  bool accepted = false;
  std::vector<std::int32_t> part_a, part_b;  // pixel indices
  PlaneFit plane_a, plane_b;
  double psi = 0.0;
  double mean_phi = 1.0;
};

// Erosion pre-division of `region` (pixel indices) followed by the split test.
SplitResult try_erode_split(std::span<const std::int32_t> region,
                            const PlaneFit& plane, int width, int height,
                            const Grid<float>& mono_depth,
                            const Grid<Vec3f>& mono_normal, const Mat3& K,
                            const AtlasParams& params);

struct MergeDecision {
  bool accepted = false;
  double psi = 0.0;
  double mean_phi = 0.0;
};

// Merge test for two fitted regions whose dilation boundary is `boundary`.
MergeDecision try_dilate_merge(const RegionInfo& u, const RegionInfo& v,
                               std::span<const std::int32_t> boundary,
                               const Grid<Vec3f>& mono_normal,
                               const AtlasParams& params);

// Assignment test of a boundary pixel to a region with the given plane.
bool pixel_filter(int x, int y, const RegionInfo& region,
                  const Grid<float>& mono_depth, const Grid<Vec3f>& mono_normal,
                  const Mat3& K_inv, const AtlasParams& params);

// Runs erosion/dilation rounds, planarity gating and pixel filtering on an
// initial label map (0 = edge).
RegionAtlas build_atlas_from_labels(const LabelMap& initial,
                                    const Grid<float>& mono_depth,
                                    const Grid<Vec3f>& mono_normal,
                                    const Mat3& K, const AtlasParams& params,
                                    AtlasStats* stats = nullptr);

// Edges (from priors.edge_map, or Roberts on `image` when empty) → regions →
// build_atlas_from_labels.
RegionAtlas build_atlas(const Grid<float>& image, const PriorBundle& priors,
                        const Mat3& K, const AtlasParams& params,
                        AtlasStats* stats = nullptr);

// Fraction of pixels whose label matches `truth` under the best one-to-one
// label assignment. Label 0 in `labels` never matches; truth < 0 is ignored.
double label_agreement(const LabelMap& labels, const LabelMap& truth);

// Debug dump: <dir>/<id>.atlas.png (label mod 256) and <dir>/<id>.atlas.json.
void write_atlas_debug(const RegionAtlas& atlas, const std::filesystem::path& dir,
                       int view_id);

}  // namespace dvp
