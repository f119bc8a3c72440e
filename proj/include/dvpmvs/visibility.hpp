#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dvpmvs/config.hpp"
#include "dvpmvs/geometry.hpp"
#include "dvpmvs/grid.hpp"

namespace dvp {

struct VisibilityParams {
  double sigma = 0.3;
  double tau_good = 0.8;
  double tau_bad = 1.2;
  double w_min = 0.1;
  double eps_reproj = 2.0;
  int window = 11;

  static VisibilityParams from_config(const Config& config);
};

// Selection weight for one view's matching cost m.
double view_selection_weight(double m, const VisibilityParams& params);

void view_selection(std::span<const double> costs, const VisibilityParams& params,
                    std::span<double> weights);

// Per-source maps of one reference view.
struct VisibilityField {
  std::vector<Grid<float>> w;     // selection weights
  std::vector<Mask> restored;     // restored visibility
  std::vector<Grid<float>> e;     // reprojection error, px (inf if unseen)

  VisibilityField() = default;
  VisibilityField(int num_sources, int width, int height);

  int num_sources() const { return static_cast<int>(w.size()); }

  // w′ = w when restored and w > 0, w_min when restored and w = 0, else 0.
  double weight(int k, int x, int y, double w_min) const;
};

// Source-view data consulted by the reprojection test.
struct SourceDepth {
  const Grid<float>* depth;
  const Grid<float>* cost;
};

// e(p) for reference pixel p at depth d_i: p is sent to view j, replaced by
// the lowest-cost pixel of the window around it (equal costs: smallest error,
// then nearest to the center), and brought back with that pixel's depth. +inf
// when p does not land inside view j in front of the camera.
double reprojection_error(const Vec2i& p, double depth_i, const ViewPair& i_to_j,
                          const ViewPair& j_to_i, const SourceDepth& source,
                          int window);

// Fills field.restored and field.e. Pass 0 copies (w > 0); later passes apply
// the e ≤ eps_reproj test with the current depths.
void restore_visibility(VisibilityField& field, int pass,
                        const Grid<float>& depth_i,
                        std::span<const ViewPair> i_to_j,
                        std::span<const ViewPair> j_to_i,
                        std::span<const SourceDepth> sources,
                        const VisibilityParams& params, int threads);

// Debug dump: <dir>/<id>.visible_<k>.png per source.
void write_visibility_debug(const VisibilityField& field,
                            const std::filesystem::path& dir, int view_id);

}  // namespace dvp
