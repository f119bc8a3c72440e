#include "dvpmvs/visibility.hpp"

#include <cmath>
#include <limits>

#include "dvpmvs/parallel.hpp"
#include "dvpmvs/scene_io.hpp"

namespace dvp {

VisibilityParams VisibilityParams::from_config(const Config& c) {
  VisibilityParams p;
  p.sigma = c.vs_sigma;
  p.tau_good = c.vs_tau_good;
  p.tau_bad = c.vs_tau_bad;
  p.w_min = c.w_min;
  p.eps_reproj = c.eps_reproj;
  p.window = c.reproj_window;
  return p;
}

double view_selection_weight(double m, const VisibilityParams& params) {
  auto gauss = [&](double x) {
    return std::exp(-x * x / (2.0 * params.sigma * params.sigma));
  };
  if (!(m < params.tau_bad)) return 0.0;
  if (m < params.tau_good) return gauss(m);
  const double t = (params.tau_bad - m) / (params.tau_bad - params.tau_good);
  return gauss(params.tau_good) * t;
}

void view_selection(std::span<const double> costs, const VisibilityParams& params,
                    std::span<double> weights) {
  for (size_t k = 0; k < costs.size(); ++k) {
    weights[k] = view_selection_weight(costs[k], params);
  }
}

VisibilityField::VisibilityField(int num_sources, int width, int height) {
  w.assign(num_sources, Grid<float>(width, height, 0.f));
  restored.assign(num_sources, Mask(width, height, 0));
  e.assign(num_sources,
           Grid<float>(width, height, std::numeric_limits<float>::infinity()));
}

double VisibilityField::weight(int k, int x, int y, double w_min) const {
  if (!restored[k](x, y)) return 0.0;
  const double wk = w[k](x, y);
  return wk > 0.0 ? wk : w_min;
}

double reprojection_error(const Vec2i& p, double depth_i, const ViewPair& i_to_j,
                          const ViewPair& j_to_i, const SourceDepth& source,
                          int window) {
  const double inf = std::numeric_limits<double>::infinity();
  if (!(depth_i > 0.0)) return inf;
  const Projection pj = i_to_j.transfer(p.cast<double>(), depth_i);
  const Grid<float>& dj = *source.depth;
  const Grid<float>& cj = *source.cost;
  if (!(pj.depth > 0.0)) return inf;
  const double u = pj.pixel.x(), v = pj.pixel.y();
  if (!(u >= -0.5 && v >= -0.5 && u < dj.width() - 0.5 && v < dj.height() - 0.5)) {
    return inf;
  }
  const int cx = static_cast<int>(std::lround(u));
  const int cy = static_cast<int>(std::lround(v));
  const int half = window / 2;
  // Lowest cost wins; equal costs keep the most consistent depth, then the
  // pixel nearest to the center.
  float best_cost = std::numeric_limits<float>::infinity();
  double best_err = inf;
  int best_r2 = 0;
  bool found = false;
  for (int y = cy - half; y <= cy + half; ++y) {
    for (int x = cx - half; x <= cx + half; ++x) {
      if (!dj.contains(x, y) || !(dj(x, y) > 0.f)) continue;
      const float c = cj(x, y);
      if (found && c > best_cost) continue;
      const Projection back = j_to_i.transfer(pj.pixel, dj(x, y));
      const double err =
          back.depth > 0.0 ? (back.pixel - p.cast<double>()).norm() : inf;
      const int r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (!found || c < best_cost || err < best_err ||
          (err == best_err && r2 < best_r2)) {
        best_cost = c;
        best_err = err;
        best_r2 = r2;
        found = true;
      }
    }
  }
  return best_err;
}

void restore_visibility(VisibilityField& field, int pass,
                        const Grid<float>& depth_i,
                        std::span<const ViewPair> i_to_j,
                        std::span<const ViewPair> j_to_i,
                        std::span<const SourceDepth> sources,
                        const VisibilityParams& params, int threads) {
  const int w = depth_i.width(), h = depth_i.height();
  for (int k = 0; k < field.num_sources(); ++k) {
    Mask& restored = field.restored[k];
    Grid<float>& e = field.e[k];
    const Grid<float>& wk = field.w[k];
    if (pass == 0) {
      for (size_t i = 0; i < restored.size(); ++i) {
        restored[i] = wk[i] > 0.f ? 1 : 0;
        e[i] = std::numeric_limits<float>::quiet_NaN();
      }
      continue;
    }
    parallel_for(0, h, threads, [&](int y) {
      for (int x = 0; x < w; ++x) {
        const double err = reprojection_error(Vec2i(x, y), depth_i(x, y),
                                              i_to_j[k], j_to_i[k], sources[k],
                                              params.window);
        e(x, y) = static_cast<float>(err);
        restored(x, y) = err <= params.eps_reproj ? 1 : 0;
      }
    });
  }
}

void write_visibility_debug(const VisibilityField& field,
                            const std::filesystem::path& dir, int view_id) {
  for (int k = 0; k < field.num_sources(); ++k) {
    write_png_mask(field.restored[k],
                   dir / (std::to_string(view_id) + ".visible_" +
                          std::to_string(k) + ".png"));
  }
}

}  // namespace dvp
