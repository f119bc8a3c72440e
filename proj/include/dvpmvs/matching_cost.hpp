#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dvpmvs/config.hpp"
#include "dvpmvs/geometry.hpp"
#include "dvpmvs/grid.hpp"
#include "dvpmvs/scene_io.hpp"

namespace dvp {

inline constexpr double kMaxCost = 2.0;

struct PatchSpec {
  int size = 11;  // samples per side, odd
  int step = 5;   // pixels between samples
};

struct CostParams {
  PatchSpec patch{11, 5};
  PatchSpec subpatch{11, 2};
  double sigma_color = 0.1;
  double sigma_spatial = 0.0;  // 0 → size·step/3
  double max_dropped_fraction = 0.5;
  double lambda = 0.25;

  static CostParams from_config(const Config& config);
  double spatial_sigma(const PatchSpec& spec) const;
};

// Reference-side samples of a patch, stored as parallel arrays. Independent
// of the hypothesis, so it is built once per pixel and reused for every
// candidate.
struct ReferencePatch {
  std::vector<float> x, y;    // pixel position in the reference view
  std::vector<float> value;   // reference intensity
  std::vector<float> weight;  // bilateral weight
  double sw = 0.0, swr = 0.0, swrr = 0.0;  // weighted moments of all samples

  std::size_t size() const { return x.size(); }
  void add(float px, float py, float v, float w);
  // Recomputes the moments after the samples changed.
  void finalize();
};

// Samples outside the image are clamped to the border.
ReferencePatch make_reference_patch(const Grid<float>& image, const Vec2i& center,
                                    const PatchSpec& spec, double sigma_color,
                                    double sigma_spatial);

// 1 − weighted NCC of the reference samples against `source` warped by H, in
// [0, 2]. Returns kMaxCost for zero-variance patches or when more than
// `max_dropped_fraction` of the samples map outside the source image.
double ncc_cost(const ReferencePatch& ref, const Grid<float>& source,
                const Mat3& H, double max_dropped_fraction);

// Σ w·m / Σ w over views with w > 0; kMaxCost when Σ w = 0.
double multi_view_cost(std::span<const double> costs,
                       std::span<const double> weights);

// λ·center + (1−λ)·mean(anchors); center alone without anchors. The anchor
// mean is order-independent (costs are sorted before summing).
double deformable_cost(double center_cost, std::span<const double> anchor_costs,
                       double lambda);

// Mean anchor cost only; kMaxCost without anchors.
double highlight_cost(std::span<const double> anchor_costs);

// Images and pair geometry for one reference view against its sources.
class CostModel {
 public:
  struct Source {
    const CameraView* camera;
    const Grid<float>* image;
  };

  CostModel(const CameraView& ref, const Grid<float>& ref_image,
            std::vector<Source> sources, const CostParams& params);

  int num_sources() const { return static_cast<int>(sources_.size()); }
  const CameraView& reference() const { return *ref_; }
  const Grid<float>& reference_image() const { return *ref_image_; }
  const CameraView& source(int k) const { return *sources_[k].camera; }
  const ViewPair& pair(int k) const { return pairs_[k]; }
  const CostParams& params() const { return params_; }

  ReferencePatch center_patch(const Vec2i& p) const;
  ReferencePatch sub_patch(const Vec2i& s) const;

  // Per-source homographies of the plane (n, depth at p).
  void homographies(const Vec3& n, double depth, const Vec2& p,
                    std::span<Homography> out) const;

  double view_cost(const ReferencePatch& patch, int k, const Homography& H) const;

  // Weighted aggregate over sources. Stops early and returns a value ≥ bound
  // once the partial sum proves the result cannot be below `bound`.
  double aggregate(const ReferencePatch& patch, std::span<const Homography> H,
                   std::span<const double> weights,
                   double bound = std::numeric_limits<double>::infinity()) const;

  // Deformable cost per source view, then weighted across views. Bit k of
  // masks[a] says anchor a is visible in source k; an empty span means every
  // anchor is visible everywhere.
  double deformable(const ReferencePatch& center,
                    std::span<const ReferencePatch> anchors,
                    std::span<const std::uint32_t> masks,
                    std::span<const Homography> H,
                    std::span<const double> weights,
                    double bound = std::numeric_limits<double>::infinity()) const;

  // Highlight cost per source view (anchor terms only), weighted across views.
  double highlight(std::span<const ReferencePatch> anchors,
                   std::span<const std::uint32_t> masks,
                   std::span<const Homography> H,
                   std::span<const double> weights) const;

 private:
  const CameraView* ref_;
  const Grid<float>* ref_image_;
  std::vector<Source> sources_;
  std::vector<ViewPair> pairs_;
  CostParams params_;
};

}  // namespace dvp
