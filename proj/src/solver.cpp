#include "dvpmvs/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "dvpmvs/deformation.hpp"
#include "dvpmvs/edge_prior.hpp"
#include "dvpmvs/matching_cost.hpp"
#include "dvpmvs/parallel.hpp"
#include "dvpmvs/visibility.hpp"

namespace dvp {

DepthRange resolve_depth_range(const Scene& scene, const Config& config) {
  DepthRange range;
  if (scene.depth_range) range = *scene.depth_range;
  if (config.depth_min > 0.0) range.min = config.depth_min;
  if (config.depth_max > 0.0) range.max = config.depth_max;
  if (range.valid()) return range;
  float lo = std::numeric_limits<float>::infinity(), hi = 0.f;
  for (const auto& v : scene.views) {
    for (float d : v.priors.mono_depth.values()) {
      if (d > 0.f && std::isfinite(d)) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
    }
  }
  if (!(hi > 0.f)) {
    throw ValidationError("no depth range: set depth_min/depth_max or scene.json");
  }
  if (!(range.min > 0.0)) range.min = 0.5 * lo;
  if (!(range.max > range.min)) range.max = 2.0 * hi;
  return range;
}

Mask classify_reliability(const Grid<float>& cost, double tau) {
  Mask m(cost.width(), cost.height(), 0);
  for (size_t i = 0; i < cost.size(); ++i) m[i] = cost[i] < tau ? 1 : 0;
  return m;
}

std::uint64_t pixel_seed(std::int64_t seed, int view, int pass, int sweep,
                         std::int64_t pixel) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(static_cast<std::uint64_t>(seed));
  h = mix(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(view)));
  h = mix(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(pass)));
  h = mix(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(sweep)));
  return mix(h ^ static_cast<std::uint64_t>(pixel));
}

PixelRng::PixelRng(std::uint64_t seed) {
  // minstd state must lie in [1, 2^31 - 2].
  state_ = static_cast<std::uint32_t>(seed % 2147483646ull) + 1u;
}

double PixelRng::uniform() {
  state_ = static_cast<std::uint32_t>(
      (static_cast<std::uint64_t>(state_) * 48271ull) % 2147483647ull);
  return static_cast<double>(state_ - 1u) / 2147483646.0;
}

double PixelRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec3 PixelRng::unit_vector() {
  for (;;) {
    const Vec3 v(normal(), normal(), normal());
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

IntervalParams IntervalParams::from_config(const Config& c) {
  IntervalParams p;
  p.alpha = c.alpha;
  p.beta = c.beta;
  p.mu = c.mu;
  p.mode = c.interval_mode;
  p.fixed_rel = c.fixed_interval_rel;
  return p;
}

std::optional<DepthIntervals> view_interval(const Vec2& p, double depth,
                                            const ViewPair& pair,
                                            const DepthRange& range,
                                            const IntervalParams& params) {
  const Vec3 a = pair.ray_image(p);
  const Vec3& b = pair.baseline_image();
  const Vec3 h = depth * a + b;
  if (!(h.z() > 0.0)) return std::nullopt;
  const Vec2 u = h.head<2>() / h.z();
  Vec2 dir(a.x() * b.z() - a.z() * b.x(), a.y() * b.z() - a.z() * b.y());
  const double len = dir.norm();
  if (!(len > 1e-12 * (a.norm() * b.norm() + 1e-300))) return std::nullopt;
  dir /= len;
  // Past the vanishing point (forward) or the epipole (backward) the inverse
  // depth is negative; those moves saturate at the range ends.
  auto depth_at = [&](double s) {
    const double d = pair.depth_of_epipolar_point(p, u + s * dir);
    if (s > 0.0) {
      if (!(d > depth)) return range.max;
    } else {
      if (!(d > 0.0) || d > depth) return range.min;
    }
    return std::clamp(d, range.min, range.max);
  };
  DepthIntervals out;
  out.ll = depth_at(-(params.alpha + params.beta));
  out.lr = depth_at(-params.alpha);
  out.rl = depth_at(params.alpha);
  out.rr = depth_at(params.alpha + params.beta);
  out.valid = true;
  return out;
}

DepthIntervals epipolar_intervals(const Vec2& p, double depth,
                                  std::span<const ViewPair> pairs,
                                  std::span<const double> weights,
                                  const DepthRange& range,
                                  const IntervalParams& params) {
  DepthIntervals out;
  if (params.mode == "fixed") {
    out.ll = std::max(range.min, depth * (1.0 - params.fixed_rel));
    out.lr = depth;
    out.rl = depth;
    out.rr = std::min(range.max, depth * (1.0 + params.fixed_rel));
    out.valid = true;
    return out;
  }
  std::vector<DepthIntervals> per_view;
  for (size_t k = 0; k < pairs.size(); ++k) {
    if (!(weights[k] > 0.0)) continue;
    if (auto iv = view_interval(p, depth, pairs[k], range, params)) {
      per_view.push_back(*iv);
    }
  }
  if (per_view.empty()) return out;
  const size_t mu = static_cast<size_t>(std::max(1, params.mu));

  if (params.mode == "formula") {
    const size_t n = std::min(mu, per_view.size());
    out.ll = out.rr = std::numeric_limits<double>::infinity();
    out.lr = out.rl = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
      out.ll = std::min(out.ll, per_view[j].ll);
      out.lr = std::max(out.lr, per_view[j].lr);
      out.rl = std::max(out.rl, per_view[j].rl);
      out.rr = std::min(out.rr, per_view[j].rr);
    }
  } else {
    // Displacement magnitudes per side. Outer bound: μ-th largest outer
    // magnitude; inner bound: μ-th smallest inner magnitude. Fewer than μ
    // views → the plain envelope.
    std::vector<double> lo, li, ri, ro;
    for (const auto& iv : per_view) {
      lo.push_back(depth - iv.ll);
      li.push_back(depth - iv.lr);
      ri.push_back(iv.rl - depth);
      ro.push_back(iv.rr - depth);
    }
    auto kth_largest = [&](std::vector<double> v) {
      std::sort(v.begin(), v.end(), std::greater<>());
      return v[std::min(mu, v.size()) - 1];
    };
    auto kth_smallest = [&](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v[std::min(mu, v.size()) - 1];
    };
    const bool enough = per_view.size() >= mu;
    const double left_outer =
        enough ? kth_largest(lo) : *std::max_element(lo.begin(), lo.end());
    const double left_inner =
        enough ? kth_smallest(li) : *std::min_element(li.begin(), li.end());
    const double right_inner =
        enough ? kth_smallest(ri) : *std::min_element(ri.begin(), ri.end());
    const double right_outer =
        enough ? kth_largest(ro) : *std::max_element(ro.begin(), ro.end());
    out.ll = depth - left_outer;
    out.lr = depth - left_inner;
    out.rl = depth + right_inner;
    out.rr = depth + right_outer;
  }
  if (out.ll > out.lr) std::swap(out.ll, out.lr);
  if (out.rl > out.rr) std::swap(out.rl, out.rr);
  out.valid = true;
  return out;
}

std::vector<Vec3> source_centers(std::span<const ViewPair> pairs) {
  std::vector<Vec3> centers;
  centers.reserve(pairs.size());
  for (const auto& pair : pairs) {
    centers.push_back(-pair.pose().R.transpose() * pair.pose().t);
  }
  return centers;
}

bool hemisphere_admissible(const Vec3& n, const Vec3& P,
                           std::span<const Vec3> centers,
                           std::span<const double> weights) {
  constexpr double kTol = 1e-9;
  if (n.dot(P) > kTol * P.norm()) return false;
  for (size_t k = 0; k < centers.size(); ++k) {
    if (!(weights[k] > 0.0)) continue;
    const Vec3 v = P - centers[k];
    if (n.dot(v) > kTol * v.norm()) return false;
  }
  return true;
}

Vec3 repair_normal(const Vec3& n_in, const Vec3& P, std::span<const Vec3> centers,
                   std::span<const double> weights) {
  std::vector<Vec3> dirs;
  dirs.push_back(P.normalized());
  for (size_t k = 0; k < centers.size(); ++k) {
    if (weights[k] > 0.0) dirs.push_back((P - centers[k]).normalized());
  }
  constexpr double kMargin = 1e-6;
  Vec3 n = n_in.normalized();
  for (int it = 0; it < 8; ++it) {
    bool ok = true;
    for (const Vec3& v : dirs) {
      const double dot = n.dot(v);
      if (dot > 0.0) {
        n -= (dot + kMargin) * v;
        n.normalize();
        ok = false;
      }
    }
    if (ok) return n;
  }
  if (hemisphere_admissible(n, P, centers, weights)) return n;
  Vec3 sum = Vec3::Zero();
  for (const Vec3& v : dirs) sum += v;
  return -sum.normalized();
}

namespace {

constexpr int kMaxSources = 32;

// Neighbor sampling pattern: four axis strips and four diagonal V shapes.
const std::vector<std::vector<Vec2i>>& propagation_regions() {
  static const std::vector<std::vector<Vec2i>> regions = [] {
    std::vector<std::vector<Vec2i>> r;
    const int axis[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& a : axis) {
      std::vector<Vec2i> strip;
      for (int k = 1; k <= 21; k += 2) strip.emplace_back(a[0] * k, a[1] * k);
      r.push_back(strip);
    }
    const int quad[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
    const int v_offsets[6][2] = {{1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}};
    for (const auto& q : quad) {
      std::vector<Vec2i> vs;
      for (const auto& o : v_offsets) vs.emplace_back(q[0] * o[0], q[1] * o[1]);
      r.push_back(vs);
    }
    return r;
  }();
  return regions;
}

CameraView scale_camera_half(const CameraView& c) {
  CameraView s = c;
  s.K(0, 0) *= 0.5;
  s.K(1, 1) *= 0.5;
  s.K(0, 2) = (c.K(0, 2) + 0.5) * 0.5 - 0.5;
  s.K(1, 2) = (c.K(1, 2) + 0.5) * 0.5 - 0.5;
  s.width = c.width / 2;
  s.height = c.height / 2;
  s.image = Grid<float>();
  s.corrected_image = Grid<float>();
  return s;
}

Grid<float> downsample_half(const Grid<float>& g) {
  Grid<float> out(g.width() / 2, g.height() / 2, 0.f);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 0.25f * (g(2 * x, 2 * y) + g(2 * x + 1, 2 * y) +
                           g(2 * x, 2 * y + 1) + g(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

enum class Mode { kPlain, kDeformable, kHighlight, kFrozen };

struct LevelView {
  CameraView camera;
  Grid<float> image;
  Mask highlight;
  Grid<float> mono_depth;
  Grid<Vec3f> mono_normal;
};

struct ViewState {
  int index = 0;
  int id = 0;
  std::vector<int> sources;  // scene indices
  std::unique_ptr<CostModel> model;
  std::vector<ViewPair> to_src, from_src;
  std::vector<Vec3> centers;

  Grid<float> depth;
  Grid<Vec3f> normal;
  Grid<float> cost;
  Mask reliable;  // classification frozen for the current pass
  Mask anchor_ok;  // reliable and the sub-patch alone also matches
  Mask frozen;
  Mask no_view;
  VisibilityField vis;
  bool uniform_weights = false;

  std::vector<std::int32_t> anchor_begin;
  std::vector<Vec2i> anchor_pixels;

  std::optional<RegionAtlas> atlas;
  bool degenerate = false;
};

struct Snapshot {
  std::vector<Grid<float>> depth, cost;
  std::vector<Mask> reliable;
};

class Solver {
 public:
  Solver(const Scene& scene, const Config& config, const SolveOptions& options)
      : scene_(scene),
        config_(config),
        options_(options),
        range_(resolve_depth_range(scene, config)),
        cost_params_(CostParams::from_config(config)),
        vis_params_(VisibilityParams::from_config(config)),
        interval_params_(IntervalParams::from_config(config)),
        threads_(resolved_threads(config)) {
    const int n = static_cast<int>(scene.views.size());
    if (n < 2) throw ValidationError("solving needs at least two views");
    if (n - 1 > kMaxSources) {
      throw ValidationError("at most 33 views are supported");
    }
  }

  std::vector<DepthNormalResult> run() {
    const int n = static_cast<int>(scene_.views.size());
    bool coarse_done = false;
    std::vector<LevelView> fine = make_fine_level();
    std::vector<ViewState> states(n);

    const bool multiscale = config_.multiscale && config_.coarse_sweeps > 0 &&
                            fine[0].camera.width >= 128 &&
                            fine[0].camera.height >= 128;
    if (multiscale) {
      std::vector<LevelView> coarse = make_coarse_level(fine);
      std::vector<ViewState> cstates(n);
      for (int v = 0; v < n; ++v) {
        setup_state(cstates[v], v, coarse);
        initialize(cstates[v], coarse[v]);
        for (int s = 0; s < config_.coarse_sweeps; ++s) {
          sweep(cstates[v], coarse, -1, s, /*uniform=*/s == 0, /*coarse=*/true);
        }
      }
      for (int v = 0; v < n; ++v) {
        setup_state(states[v], v, fine);
        upsample(cstates[v], coarse[v], states[v], fine[v]);
      }
      coarse_done = true;
    } else {
      for (int v = 0; v < n; ++v) {
        setup_state(states[v], v, fine);
        initialize(states[v], fine[v]);
      }
    }

    for (int v = 0; v < n; ++v) {
      auto& st = states[v];
      if (config_.use_highlight) {
        const auto& hl = fine[v].highlight.values();
        st.degenerate = std::all_of(hl.begin(), hl.end(),
                                    [](std::uint8_t m) { return m != 0; });
      }
      if (config_.use_atlas && !fine[v].mono_depth.empty() &&
          !fine[v].mono_normal.empty()) {
        st.atlas = build_atlas(fine[v].image, scene_.views[v].priors,
                               fine[v].camera.K,
                               AtlasParams::from_config(config_));
      }
    }

    Snapshot snap;
    for (int pass = 0; pass < config_.passes; ++pass) {
      for (int v = 0; v < n; ++v) {
        auto& st = states[v];
        if (st.degenerate) continue;
        if (pass > 0) begin_pass(st, fine, snap);
        for (int s = 0; s < config_.sweeps_per_pass; ++s) {
          const bool uniform = pass == 0 && s == 0 && !coarse_done;
          sweep(st, fine, pass, s, uniform, false);
        }
        end_pass(st, fine[v]);
        if (options_.log) {
          double sum = 0.0;
          size_t rel = 0;
          for (size_t i = 0; i < st.cost.size(); ++i) {
            sum += st.cost[i];
            rel += st.reliable[i];
          }
          std::ostringstream os;
          os << "view=" << st.id << " pass=" << pass + 1
             << " mean_cost=" << sum / static_cast<double>(st.cost.size())
             << " reliable_frac="
             << static_cast<double>(rel) / static_cast<double>(st.cost.size());
          options_.log(os.str());
        }
      }
      snap.depth.clear();
      snap.cost.clear();
      snap.reliable.clear();
      for (const auto& st : states) {
        snap.depth.push_back(st.depth);
        snap.cost.push_back(st.cost);
        snap.reliable.push_back(st.reliable);
      }
    }

    std::vector<int> order;
    if (options_.views.empty()) {
      for (int v = 0; v < n; ++v) order.push_back(v);
    } else {
      for (int id : options_.views) order.push_back(scene_.index_of(id));
    }
    std::vector<DepthNormalResult> results;
    for (int v : order) results.push_back(make_result(states[v]));
    return results;
  }

 private:
  std::vector<LevelView> make_fine_level() const {
    std::vector<LevelView> level;
    for (const auto& sv : scene_.views) {
      LevelView lv;
      lv.camera = sv.camera;
      lv.image = config_.use_highlight ? sv.camera.corrected_image : sv.camera.image;
      if (lv.image.empty()) lv.image = sv.camera.image;
      lv.highlight = sv.priors.highlight_mask.empty()
                         ? Mask(sv.camera.width, sv.camera.height, 0)
                         : sv.priors.highlight_mask;
      lv.mono_depth = sv.priors.mono_depth;
      lv.mono_normal = sv.priors.mono_normal;
      level.push_back(std::move(lv));
    }
    return level;
  }

  std::vector<LevelView> make_coarse_level(const std::vector<LevelView>& fine) const {
    std::vector<LevelView> level;
    for (const auto& f : fine) {
      LevelView lv;
      lv.camera = scale_camera_half(f.camera);
      lv.image = downsample_half(f.image);
      lv.highlight = Mask(lv.camera.width, lv.camera.height, 0);
      for (int y = 0; y < lv.camera.height; ++y) {
        for (int x = 0; x < lv.camera.width; ++x) {
          lv.highlight(x, y) = f.highlight(2 * x, 2 * y) | f.highlight(2 * x + 1, 2 * y) |
                               f.highlight(2 * x, 2 * y + 1) |
                               f.highlight(2 * x + 1, 2 * y + 1);
        }
      }
      if (!f.mono_depth.empty()) {
        lv.mono_depth = Grid<float>(lv.camera.width, lv.camera.height, 0.f);
        lv.mono_normal = Grid<Vec3f>(lv.camera.width, lv.camera.height,
                                     Vec3f(0.f, 0.f, -1.f));
        for (int y = 0; y < lv.camera.height; ++y) {
          for (int x = 0; x < lv.camera.width; ++x) {
            lv.mono_depth(x, y) = f.mono_depth(2 * x, 2 * y);
            if (!f.mono_normal.empty()) lv.mono_normal(x, y) = f.mono_normal(2 * x, 2 * y);
          }
        }
      }
      level.push_back(std::move(lv));
    }
    return level;
  }

  void setup_state(ViewState& st, int v, const std::vector<LevelView>& level) {
    const int n = static_cast<int>(level.size());
    const LevelView& lv = level[v];
    st.index = v;
    st.id = lv.camera.id;
    st.sources.clear();
    std::vector<CostModel::Source> sources;
    st.to_src.clear();
    st.from_src.clear();
    for (int j = 0; j < n; ++j) {
      if (j == v) continue;
      st.sources.push_back(j);
      sources.push_back({&level[j].camera, &level[j].image});
      st.to_src.emplace_back(lv.camera, level[j].camera);
      st.from_src.emplace_back(level[j].camera, lv.camera);
    }
    st.model = std::make_unique<CostModel>(lv.camera, lv.image, std::move(sources),
                                           cost_params_);
    st.centers = source_centers(st.to_src);
    const int w = lv.camera.width, h = lv.camera.height;
    st.depth = Grid<float>(w, h, 0.f);
    st.normal = Grid<Vec3f>(w, h, Vec3f(0.f, 0.f, -1.f));
    st.cost = Grid<float>(w, h, static_cast<float>(kMaxCost));
    st.reliable = Mask(w, h, 0);
    st.anchor_ok = Mask(w, h, 0);
    st.frozen = Mask(w, h, 0);
    st.no_view = Mask(w, h, 0);
    st.vis = VisibilityField(n - 1, w, h);
    st.anchor_begin.assign(static_cast<size_t>(w) * h + 1, 0);
    st.anchor_pixels.clear();
  }

  Vec3 random_facing_normal(PixelRng& rng, const Vec3& ray) const {
    Vec3 n = rng.unit_vector();
    if (n.dot(ray) > 0.0) n = -n;
    return n;
  }

  void initialize(ViewState& st, const LevelView& lv) {
    const int w = lv.camera.width, h = lv.camera.height;
    const Mat3 K_inv = lv.camera.K_inv();
    const bool has_mono = !lv.mono_depth.empty();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::int64_t idx = static_cast<std::int64_t>(y) * w + x;
        PixelRng rng(pixel_seed(config_.seed, st.id, -2, 0, idx));
        const Vec3 ray = pixel_ray(K_inv, Vec2(x, y));
        double d = rng.uniform(range_.min, range_.max);
        Vec3 n = random_facing_normal(rng, ray);
        if (has_mono && rng.uniform() < config_.mono_seed_fraction) {
          const double m = lv.mono_depth(x, y);
          if (m > 0.0 && std::isfinite(m)) d = std::clamp(m, range_.min, range_.max);
          if (!lv.mono_normal.empty()) {
            const Vec3 mn = lv.mono_normal(x, y).cast<double>();
            if (mn.dot(ray) < 0.0 && std::abs(mn.norm() - 1.0) < 1e-3) n = mn;
          }
        }
        st.depth(x, y) = static_cast<float>(d);
        st.normal(x, y) = n.cast<float>();
      }
    }
  }

  void upsample(const ViewState& cs, const LevelView& clv, ViewState& fs,
                const LevelView& flv) {
    const Mat3 Kc_inv = clv.camera.K_inv();
    const Mat3 Kf_inv = flv.camera.K_inv();
    const int w = flv.camera.width, h = flv.camera.height;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int cx = std::min(x / 2, clv.camera.width - 1);
        const int cy = std::min(y / 2, clv.camera.height - 1);
        const Vec3 n = cs.normal(cx, cy).cast<double>();
        const double dc = cs.depth(cx, cy);
        const double dist = plane_offset(n, dc, pixel_ray(Kc_inv, Vec2(cx, cy)));
        double d = plane_depth(n, dist, pixel_ray(Kf_inv, Vec2(x, y)));
        if (!range_.contains(d)) d = dc;
        fs.depth(x, y) = static_cast<float>(d);
        fs.normal(x, y) = n.cast<float>();
      }
    }
  }

  void weights_at(const ViewState& st, int x, int y, std::span<double> out) const {
    const int k_count = static_cast<int>(st.sources.size());
    if (st.uniform_weights) {
      std::fill(out.begin(), out.begin() + k_count, 1.0);
      return;
    }
    double sum = 0.0;
    for (int k = 0; k < k_count; ++k) {
      out[k] = st.vis.weight(k, x, y, vis_params_.w_min);
      sum += out[k];
    }
    if (!(sum > 0.0)) std::fill(out.begin(), out.begin() + k_count, 1.0);
  }

  Mode mode_at(const ViewState& st, const LevelView& lv, int x, int y,
               bool coarse) const {
    if (coarse) return Mode::kPlain;
    if (st.frozen(x, y)) return Mode::kFrozen;
    const bool unreliable = !st.reliable(x, y);
    if (config_.use_highlight && lv.highlight(x, y) && unreliable) {
      return Mode::kHighlight;
    }
    const size_t i = static_cast<size_t>(y) * lv.camera.width + x;
    if (unreliable && config_.use_deformation &&
        st.anchor_begin[i + 1] > st.anchor_begin[i]) {
      return Mode::kDeformable;
    }
    return Mode::kPlain;
  }

  struct PixelContext {
    Vec2i p;
    Vec2 pd;
    Vec3 ray;
    Mode mode = Mode::kPlain;
    ReferencePatch center;
    std::vector<ReferencePatch> anchors;
    std::vector<std::uint32_t> masks;
    std::vector<Vec2i> anchor_pixels;
    std::array<double, kMaxSources> weights{};
    std::array<Homography, kMaxSources> H{};
    int k_count = 0;
  };

  void prepare(const ViewState& st, const LevelView& lv, PixelContext& c, int x,
               int y, bool coarse) const {
    c.p = Vec2i(x, y);
    c.pd = Vec2(x, y);
    c.ray = pixel_ray(st.model->pair(0).K_inv_i(), c.pd);
    c.k_count = static_cast<int>(st.sources.size());
    c.mode = mode_at(st, lv, x, y, coarse);
    weights_at(st, x, y, c.weights);
    c.anchors.clear();
    c.masks.clear();
    c.anchor_pixels.clear();
    if (c.mode != Mode::kHighlight) c.center = st.model->center_patch(c.p);
    if (c.mode == Mode::kDeformable || c.mode == Mode::kHighlight) {
      const size_t i = static_cast<size_t>(y) * lv.camera.width + x;
      std::array<double, kMaxSources> wa{};
      for (std::int32_t a = st.anchor_begin[i]; a < st.anchor_begin[i + 1]; ++a) {
        const Vec2i s = st.anchor_pixels[a];
        c.anchor_pixels.push_back(s);
        c.anchors.push_back(st.model->sub_patch(s));
        weights_at(st, s.x(), s.y(), wa);
        std::uint32_t mask = 0;
        for (int k = 0; k < c.k_count; ++k) {
          if (wa[k] > 0.0) mask |= 1u << k;
        }
        c.masks.push_back(mask);
      }
    }
  }

  double evaluate(const ViewState& st, PixelContext& c, const Vec3& n, double d,
                  double bound) const {
    std::span<Homography> H(c.H.data(), c.k_count);
    std::span<const double> w(c.weights.data(), c.k_count);
    st.model->homographies(n, d, c.pd, H);
    switch (c.mode) {
      case Mode::kHighlight:
        return st.model->highlight(c.anchors, c.masks, H, w);
      case Mode::kDeformable:
        return st.model->deformable(c.center, c.anchors, c.masks, H, w, bound);
      default:
        return st.model->aggregate(c.center, H, w, bound);
    }
  }

  bool admissible(const ViewState& st, const PixelContext& c, const Vec3& n,
                  double d) const {
    if (!(d > 0.0) || !range_.contains(d) || !n.allFinite()) return false;
    if (!(n.dot(c.ray) < 0.0)) return false;
    if (!config_.use_hemisphere) return true;
    return hemisphere_admissible(n, d * c.ray, st.centers,
                                 std::span<const double>(c.weights.data(), c.k_count));
  }

  // Sweep-start refresh: selection weights, visibility, normal repair and
  // stored costs under the new weights.
  void refresh(ViewState& st, const std::vector<LevelView>& level, int pass,
               bool uniform, bool coarse) {
    const LevelView& lv = level[st.index];
    const int w = lv.camera.width, h = lv.camera.height;
    const int k_count = static_cast<int>(st.sources.size());
    st.uniform_weights = uniform;
    std::vector<Grid<double>> raw;
    if (!uniform) {
      raw.assign(k_count, Grid<double>(w, h, kMaxCost));
      parallel_for(0, h, threads_, [&](int y) {
        PixelContext c;
        for (int x = 0; x < w; ++x) {
          c.p = Vec2i(x, y);
          c.pd = Vec2(x, y);
          c.k_count = k_count;
          c.center = st.model->center_patch(c.p);
          std::span<Homography> H(c.H.data(), k_count);
          st.model->homographies(st.normal(x, y).cast<double>(), st.depth(x, y),
                                 c.pd, H);
          for (int k = 0; k < k_count; ++k) {
            const double m = st.model->view_cost(c.center, k, H[k]);
            raw[k](x, y) = m;
            st.vis.w[k](x, y) = static_cast<float>(view_selection_weight(m, vis_params_));
          }
        }
      });
    } else {
      for (auto& g : st.vis.w) g.fill(1.f);
    }
    if (coarse || pass == 0 || !config_.use_visibility_restoration) {
      for (int k = 0; k < k_count; ++k) {
        for (size_t i = 0; i < st.vis.w[k].size(); ++i) {
          st.vis.restored[k][i] = st.vis.w[k][i] > 0.f ? 1 : 0;
        }
      }
    }
    parallel_for(0, h, threads_, [&](int y) {
      PixelContext c;
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        for (int k = 0; k < k_count; ++k) {
          sum += st.uniform_weights ? 1.0 : st.vis.weight(k, x, y, vis_params_.w_min);
        }
        st.no_view(x, y) = sum > 0.0 ? 0 : 1;
        prepare(st, lv, c, x, y, coarse);
        if (c.mode == Mode::kFrozen) continue;
        Vec3 n = st.normal(x, y).cast<double>();
        const double d = st.depth(x, y);
        bool changed = false;
        if (config_.use_hemisphere) {
          const std::span<const double> wk(c.weights.data(), k_count);
          if (!hemisphere_admissible(n, d * c.ray, st.centers, wk)) {
            n = repair_normal(n, d * c.ray, st.centers, wk);
            changed = true;
          }
        } else if (!(n.dot(c.ray) < 0.0)) {
          n = -n;
          changed = true;
        }
        if (changed) st.normal(x, y) = n.cast<float>();
        if (c.mode == Mode::kPlain && !changed && !raw.empty()) {
          // Same sum as CostModel::aggregate, from the per-view costs above.
          double num = 0.0, den = 0.0;
          for (int k = 0; k < k_count; ++k) {
            if (c.weights[k] > 0.0) den += c.weights[k];
          }
          for (int k = 0; k < k_count; ++k) {
            if (c.weights[k] > 0.0) num += c.weights[k] * raw[k](x, y);
          }
          st.cost(x, y) = static_cast<float>(
              den > 0.0 ? std::clamp(num / den, 0.0, kMaxCost) : kMaxCost);
          continue;
        }
        st.cost(x, y) = static_cast<float>(
            evaluate(st, c, n, d, std::numeric_limits<double>::infinity()));
      }
    });
  }

  Vec3 perturb_normal(const ViewState& st, const PixelContext& c, PixelRng& rng,
                      const Vec3& n, double d, double max_angle, bool& ok) const {
    for (int t = 0; t < config_.normal_tries; ++t) {
      Vec3 u = rng.unit_vector();
      u -= u.dot(n) * n;
      if (u.norm() < 1e-9) continue;
      u.normalize();
      const double a = rng.uniform(0.0, max_angle);
      const Vec3 cand = (std::cos(a) * n + std::sin(a) * u).normalized();
      if (admissible(st, c, cand, d)) {
        ok = true;
        return cand;
      }
    }
    ok = false;
    return n;
  }

  void update_pixel(ViewState& st, const LevelView& lv, const ViewState& snap,
                    PixelContext& c, int x, int y, int pass, int sweep_index,
                    int global_sweep, bool coarse) {
    prepare(st, lv, c, x, y, coarse);
    if (c.mode == Mode::kFrozen) return;
    const int w = lv.camera.width;
    const Mat3& K_inv = st.model->pair(0).K_inv_i();

    Vec3 best_n = st.normal(x, y).cast<double>();
    double best_d = st.depth(x, y);
    double best_cost = st.cost(x, y);
    auto try_candidate = [&](const Vec3& n, double d) {
      // A copy of the current plane cannot lower the cost.
      if (std::abs(d - best_d) <= 1e-6 * best_d && n.dot(best_n) >= 1.0 - 1e-10) return;
      if (!admissible(st, c, n, d)) return;
      const double cst = evaluate(st, c, n, d, best_cost);
      if (cst < best_cost) {
        best_cost = cst;
        best_n = n;
        best_d = d;
      }
    };
    auto transfer_from = [&](const Vec2i& q) {
      const Vec3 n = snap.normal(q.x(), q.y()).cast<double>();
      const double dq = snap.depth(q.x(), q.y());
      const double dist = plane_offset(n, dq, pixel_ray(K_inv, q.cast<double>()));
      try_candidate(n, plane_depth(n, dist, c.ray));
    };

    // Propagation: best neighbor of each sampling region.
    for (const auto& region : propagation_regions()) {
      int bx = -1, by = -1;
      float bc = std::numeric_limits<float>::infinity();
      for (const Vec2i& o : region) {
        const int qx = x + o.x(), qy = y + o.y();
        if (!snap.cost.contains(qx, qy)) continue;
        const float qc = snap.cost(qx, qy);
        if (qc < bc) {
          bc = qc;
          bx = qx;
          by = qy;
        }
      }
      if (bx >= 0) transfer_from(Vec2i(bx, by));
    }

    // Anchor hypotheses.
    if (!coarse && config_.anchor_injection && config_.use_deformation &&
        !st.reliable(x, y)) {
      const size_t i = static_cast<size_t>(y) * w + x;
      for (std::int32_t a = st.anchor_begin[i]; a < st.anchor_begin[i + 1]; ++a) {
        transfer_from(st.anchor_pixels[a]);
      }
    }

    // Refinement.
    PixelRng rng(pixel_seed(config_.seed, st.id, coarse ? -1 : pass, sweep_index,
                            static_cast<std::int64_t>(y) * w + x));
    const double angle =
        std::max(0.5, config_.normal_perturbation_deg * std::pow(0.5, global_sweep)) *
        std::numbers::pi / 180.0;
    const DepthIntervals iv = epipolar_intervals(
        c.pd, best_d, st.to_src, std::span<const double>(c.weights.data(), c.k_count),
        range_, interval_params_);
    const double base_d = best_d;
    const Vec3 base_n = best_n;
    auto left_depth = [&]() {
      if (!iv.valid) return base_d * std::exp(rng.uniform(-1.0, 1.0) * config_.fallback_perturbation);
      return rng.uniform(iv.ll, iv.lr);
    };
    auto right_depth = [&]() {
      if (!iv.valid) return base_d * std::exp(rng.uniform(-1.0, 1.0) * config_.fallback_perturbation);
      return rng.uniform(iv.rl, iv.rr);
    };
    const int samples = config_.refine_samples;
    for (int r = 0; r < samples; ++r) {
      switch (r % 6) {
        case 0:
          try_candidate(base_n, left_depth());
          break;
        case 1:
          try_candidate(base_n, right_depth());
          break;
        case 2:
        case 3: {
          const double d = r % 6 == 2 ? left_depth() : right_depth();
          bool ok = false;
          const Vec3 n = perturb_normal(st, c, rng, base_n, d, angle, ok);
          if (ok) try_candidate(n, d);
          break;
        }
        case 4: {
          bool ok = false;
          const Vec3 n = perturb_normal(st, c, rng, base_n, base_d, angle, ok);
          if (ok) try_candidate(n, base_d);
          break;
        }
        default: {
          const double d = rng.uniform(range_.min, range_.max);
          try_candidate(random_facing_normal(rng, c.ray), d);
          break;
        }
      }
    }

    st.normal(x, y) = best_n.cast<float>();
    st.depth(x, y) = static_cast<float>(best_d);
    st.cost(x, y) = static_cast<float>(best_cost);
  }

  void sweep(ViewState& st, const std::vector<LevelView>& level, int pass, int s,
             bool uniform, bool coarse) {
    refresh(st, level, pass, uniform, coarse);
    const LevelView& lv = level[st.index];
    const int w = lv.camera.width, h = lv.camera.height;
    const int global_sweep =
        coarse ? s : (config_.multiscale ? config_.coarse_sweeps : 0) +
                         pass * config_.sweeps_per_pass + s;
    for (int color = 0; color < 2; ++color) {
      ViewState snap;
      snap.depth = st.depth;
      snap.normal = st.normal;
      snap.cost = st.cost;
      parallel_for(0, h, threads_, [&](int y) {
        PixelContext c;
        for (int x = (y + color) % 2; x < w; x += 2) {
          update_pixel(st, lv, snap, c, x, y, pass, s, global_sweep, coarse);
        }
      });
    }
  }

  void begin_pass(ViewState& st, const std::vector<LevelView>& level,
                  const Snapshot& snap) {
    const LevelView& lv = level[st.index];
    const int w = lv.camera.width, h = lv.camera.height;
    const int k_count = static_cast<int>(st.sources.size());

    // Highlight pixels that are already reliable are left alone.
    for (size_t i = 0; i < st.frozen.size(); ++i) {
      st.frozen[i] = config_.use_highlight && lv.highlight[i] && st.reliable[i];
    }

    // Anchors for unreliable pixels, frozen for the pass.
    st.anchor_begin.assign(static_cast<size_t>(w) * h + 1, 0);
    st.anchor_pixels.clear();
    if (config_.use_deformation) {
      AnchorSearch search{config_.num_sectors, config_.candidates_per_sector,
                          config_.anchor_radius};
      const LabelMap* labels = st.atlas ? &st.atlas->labels : nullptr;
      std::vector<std::vector<Vec2i>> rows(h);
      parallel_for(0, h, threads_, [&](int y) {
        for (int x = 0; x < w; ++x) {
          if (st.reliable(x, y)) continue;
          const Vec2i p(x, y);
          const SectorCandidates cand =
              collect_candidates(p, st.anchor_ok, st.cost, labels, search);
          const auto sel = config_.use_area_max ? select_area_max(cand, p)
                                                : select_nearest(cand);
          for (const auto& a : sel) rows[y].push_back(a.pixel);
          rows[y].push_back(Vec2i(-1, x));  // row-local terminator per pixel
        }
      });
      std::int32_t cursor = 0;
      for (int y = 0; y < h; ++y) {
        size_t k = 0;
        for (int x = 0; x < w; ++x) {
          const size_t i = static_cast<size_t>(y) * w + x;
          st.anchor_begin[i] = cursor;
          if (st.reliable(x, y)) continue;
          while (rows[y][k].x() >= 0) {
            st.anchor_pixels.push_back(rows[y][k]);
            ++cursor;
            ++k;
          }
          ++k;  // terminator
        }
      }
      st.anchor_begin[static_cast<size_t>(w) * h] = cursor;
    }

    // Visibility restoration against the other views' previous pass.
    std::vector<SourceDepth> sources;
    for (int j : st.sources) sources.push_back({&snap.depth[j], &snap.cost[j]});
    restore_visibility(st.vis, config_.use_visibility_restoration ? 1 : 0,
                       st.depth, st.to_src, st.from_src, sources, vis_params_,
                       threads_);

    // Source highlight rule: reliable, restored-visible highlight pixels of a
    // source view no longer count as visible.
    if (config_.use_highlight) {
      parallel_for(0, h, threads_, [&](int y) {
        for (int x = 0; x < w; ++x) {
          for (int k = 0; k < k_count; ++k) {
            if (!st.vis.restored[k](x, y)) continue;
            const int j = st.sources[k];
            const Projection pj = st.to_src[k].transfer(Vec2(x, y), st.depth(x, y));
            const int u = static_cast<int>(std::lround(pj.pixel.x()));
            const int v = static_cast<int>(std::lround(pj.pixel.y()));
            if (!level[j].highlight.contains(u, v)) continue;
            if (level[j].highlight(u, v) && snap.reliable[j](u, v)) {
              st.vis.restored[k](x, y) = 0;
            }
          }
        }
      });
    }
  }

  void end_pass(ViewState& st, const LevelView& lv) {
    const int w = lv.camera.width, h = lv.camera.height;
    Mask next(w, h, 0), anchor(w, h, 0);
    parallel_for(0, h, threads_, [&](int y) {
      PixelContext c;
      for (int x = 0; x < w; ++x) {
        if (st.no_view(x, y)) continue;
        double plain;
        if (mode_at(st, lv, x, y, false) == Mode::kPlain) {
          plain = st.cost(x, y);
        } else {
          prepare(st, lv, c, x, y, false);
          c.mode = Mode::kPlain;
          c.center = st.model->center_patch(c.p);
          plain = evaluate(st, c, st.normal(x, y).cast<double>(), st.depth(x, y),
                           std::numeric_limits<double>::infinity());
        }
        next(x, y) = plain < config_.tau_rel ? 1 : 0;
        if (!next(x, y) || !config_.use_deformation) continue;
        prepare(st, lv, c, x, y, false);
        c.mode = Mode::kPlain;
        c.center = st.model->sub_patch(c.p);
        const double sub = evaluate(st, c, st.normal(x, y).cast<double>(), st.depth(x, y),
                                    config_.tau_rel);
        anchor(x, y) = sub < config_.tau_rel ? 1 : 0;
      }
    });
    st.reliable = std::move(next);
    st.anchor_ok = std::move(anchor);
  }

  DepthNormalResult make_result(const ViewState& st) const {
    DepthNormalResult r;
    const int w = st.depth.width(), h = st.depth.height();
    if (st.degenerate) {
      r.depth = Grid<float>(w, h, 0.f);
      r.normal = Grid<Vec3f>(w, h, Vec3f(0.f, 0.f, -1.f));
      r.cost = Grid<float>(w, h, static_cast<float>(kMaxCost));
      r.reliable = Mask(w, h, 0);
      r.degenerate = true;
      return r;
    }
    r.depth = st.depth;
    r.normal = st.normal;
    r.cost = st.cost;
    r.reliable = Mask(w, h, 0);
    for (size_t i = 0; i < r.reliable.size(); ++i) {
      r.reliable[i] = st.reliable[i] && !st.frozen[i] && !st.no_view[i];
    }
    return r;
  }

  const Scene& scene_;
  const Config& config_;
  const SolveOptions& options_;
  DepthRange range_;
  CostParams cost_params_;
  VisibilityParams vis_params_;
  IntervalParams interval_params_;
  int threads_;
};

}  // namespace

std::vector<DepthNormalResult> solve_scene(const Scene& scene, const Config& config,
                                           const SolveOptions& options) {
  config.validate();
  Solver solver(scene, config, options);
  return solver.run();
}

DepthNormalResult run_view(const Scene& scene, int view_id, const Config& config) {
  SolveOptions options;
  options.views = {view_id};
  return solve_scene(scene, config, options).front();
}

}  // namespace dvp
