#include "dvpmvs/matching_cost.hpp"

#include <algorithm>
#include <cmath>

namespace dvp {
namespace {

constexpr double kVarianceEps = 1e-8;

}  // namespace

CostParams CostParams::from_config(const Config& config) {
  CostParams p;
  p.patch = {config.patch_size, config.patch_step};
  p.subpatch = {config.subpatch_size, config.subpatch_step};
  p.sigma_color = config.sigma_color;
  p.sigma_spatial = config.sigma_spatial;
  p.max_dropped_fraction = config.max_dropped_fraction;
  p.lambda = config.lambda;
  return p;
}

double CostParams::spatial_sigma(const PatchSpec& spec) const {
  if (sigma_spatial > 0.0) return sigma_spatial;
  return spec.size * spec.step / 3.0;
}

void ReferencePatch::add(float px, float py, float v, float w) {
  x.push_back(px);
  y.push_back(py);
  value.push_back(v);
  weight.push_back(w);
}

void ReferencePatch::finalize() {
  sw = swr = swrr = 0.0;
  for (size_t i = 0; i < size(); ++i) {
    const double w = weight[i];
    sw += w;
    swr += w * value[i];
    swrr += w * value[i] * value[i];
  }
}

ReferencePatch make_reference_patch(const Grid<float>& image, const Vec2i& center,
                                    const PatchSpec& spec, double sigma_color,
                                    double sigma_spatial) {
  ReferencePatch patch;
  const int half = spec.size / 2;
  const size_t n = static_cast<size_t>(spec.size) * spec.size;
  patch.x.reserve(n);
  patch.y.reserve(n);
  patch.value.reserve(n);
  patch.weight.reserve(n);
  const int cx = std::clamp(center.x(), 0, image.width() - 1);
  const int cy = std::clamp(center.y(), 0, image.height() - 1);
  const float center_value = image(cx, cy);
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const int x = std::clamp(center.x() + dx * spec.step, 0, image.width() - 1);
      const int y = std::clamp(center.y() + dy * spec.step, 0, image.height() - 1);
      const float v = image(x, y);
      const double dist = std::hypot(x - center.x(), y - center.y());
      const double w = std::exp(-std::abs(v - center_value) / sigma_color -
                                dist / sigma_spatial);
      patch.add(static_cast<float>(x), static_cast<float>(y), v, static_cast<float>(w));
    }
  }
  patch.finalize();
  return patch;
}

double ncc_cost(const ReferencePatch& ref, const Grid<float>& source,
                const Mat3& H, double max_dropped_fraction) {
  const size_t n = ref.size();
  constexpr size_t kChunk = 128;
  alignas(32) float us[kChunk], vs[kChunk], zs[kChunk];
  const float h00 = static_cast<float>(H(0, 0)), h01 = static_cast<float>(H(0, 1));
  const float h02 = static_cast<float>(H(0, 2)), h10 = static_cast<float>(H(1, 0));
  const float h11 = static_cast<float>(H(1, 1)), h12 = static_cast<float>(H(1, 2));
  const float h20 = static_cast<float>(H(2, 0)), h21 = static_cast<float>(H(2, 1));
  const float h22 = static_cast<float>(H(2, 2));
  const float max_x = static_cast<float>(source.width() - 1);
  const float max_y = static_cast<float>(source.height() - 1);
  const int width = source.width();
  const int last_x = width - 2, last_y = source.height() - 2;
  const float* data = source.values().data();
  const size_t max_dropped =
      static_cast<size_t>(max_dropped_fraction * static_cast<double>(n));

  // Reference moments come precomputed; dropped samples are subtracted.
  double sws = 0, swss = 0, swrs = 0;
  double dw = 0, dwr = 0, dwrr = 0;
  size_t dropped = 0;
  const float* __restrict xs = ref.x.data();
  const float* __restrict ys = ref.y.data();
  for (size_t base = 0; base < n; base += kChunk) {
    const size_t m = std::min(kChunk, n - base);
    for (size_t i = 0; i < m; ++i) {
      const float x = xs[base + i], y = ys[base + i];
      const float z = h20 * x + h21 * y + h22;
      const float u = (h00 * x + h01 * y + h02) / z;
      const float v = (h10 * x + h11 * y + h12) / z;
      us[i] = u;
      vs[i] = v;
      zs[i] = z;
    }
    for (size_t i = 0; i < m; ++i) {
      const float u = zs[i] > 0.f ? us[i] : -1.f, v = vs[i];
      const double w = ref.weight[base + i];
      const double r = ref.value[base + i];
      if (!(u >= 0.f && v >= 0.f && u <= max_x && v <= max_y)) {
        if (++dropped > max_dropped) return kMaxCost;
        dw += w;
        dwr += w * r;
        dwrr += w * r * r;
        continue;
      }
      const int x0 = std::min(static_cast<int>(u), last_x);
      const int y0 = std::min(static_cast<int>(v), last_y);
      const float fx = u - static_cast<float>(x0);
      const float fy = v - static_cast<float>(y0);
      const float* p = data + static_cast<size_t>(y0) * width + x0;
      const float* q = p + width;
      const float top = p[0] + fx * (p[1] - p[0]);
      const float bottom = q[0] + fx * (q[1] - q[0]);
      const double t = top + fy * (bottom - top);
      const double wt = w * t;
      sws += wt;
      swss += wt * t;
      swrs += wt * r;
    }
  }
  const double sw = ref.sw - dw;
  if (!(sw > 0.0)) return kMaxCost;
  const double mr = (ref.swr - dwr) / sw;
  const double ms = sws / sw;
  const double var_r = (ref.swrr - dwrr) / sw - mr * mr;
  const double var_s = swss / sw - ms * ms;
  if (var_r < kVarianceEps || var_s < kVarianceEps) return kMaxCost;
  const double cov = swrs / sw - mr * ms;
  const double ncc = std::clamp(cov / std::sqrt(var_r * var_s), -1.0, 1.0);
  return std::max(0.0, 1.0 - ncc);
}

double multi_view_cost(std::span<const double> costs,
                       std::span<const double> weights) {
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < costs.size(); ++k) {
    if (!(weights[k] > 0.0)) continue;
    num += weights[k] * costs[k];
    den += weights[k];
  }
  if (!(den > 0.0)) return kMaxCost;
  return std::clamp(num / den, 0.0, kMaxCost);
}

double deformable_cost(double center_cost, std::span<const double> anchor_costs,
                       double lambda) {
  if (anchor_costs.empty()) return center_cost;
  std::vector<double> sorted(anchor_costs.begin(), anchor_costs.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double c : sorted) sum += c;
  const double mean = sum / static_cast<double>(sorted.size());
  return lambda * center_cost + (1.0 - lambda) * mean;
}

double highlight_cost(std::span<const double> anchor_costs) {
  if (anchor_costs.empty()) return kMaxCost;
  return deformable_cost(0.0, anchor_costs, 0.0);
}

CostModel::CostModel(const CameraView& ref, const Grid<float>& ref_image,
                     std::vector<Source> sources, const CostParams& params)
    : ref_(&ref),
      ref_image_(&ref_image),
      sources_(std::move(sources)),
      params_(params) {
  pairs_.reserve(sources_.size());
  for (const auto& s : sources_) pairs_.emplace_back(ref, *s.camera);
}

ReferencePatch CostModel::center_patch(const Vec2i& p) const {
  return make_reference_patch(*ref_image_, p, params_.patch, params_.sigma_color,
                              params_.spatial_sigma(params_.patch));
}

ReferencePatch CostModel::sub_patch(const Vec2i& s) const {
  return make_reference_patch(*ref_image_, s, params_.subpatch,
                              params_.sigma_color,
                              params_.spatial_sigma(params_.subpatch));
}

void CostModel::homographies(const Vec3& n, double depth, const Vec2& p,
                             std::span<Homography> out) const {
  for (size_t k = 0; k < pairs_.size(); ++k) {
    out[k] = pairs_[k].homography(n, depth, p);
  }
}

double CostModel::view_cost(const ReferencePatch& patch, int k,
                            const Homography& H) const {
  if (H.degenerate) return kMaxCost;
  return ncc_cost(patch, *sources_[k].image, H.H, params_.max_dropped_fraction);
}

double CostModel::aggregate(const ReferencePatch& patch,
                            std::span<const Homography> H,
                            std::span<const double> weights,
                            double bound) const {
  double den = 0.0;
  for (double w : weights) {
    if (w > 0.0) den += w;
  }
  if (!(den > 0.0)) return kMaxCost;
  double num = 0.0;
  for (size_t k = 0; k < sources_.size(); ++k) {
    if (!(weights[k] > 0.0)) continue;
    num += weights[k] * view_cost(patch, static_cast<int>(k), H[k]);
    if (num / den >= bound) return num / den;
  }
  return std::clamp(num / den, 0.0, kMaxCost);
}

double CostModel::deformable(const ReferencePatch& center,
                             std::span<const ReferencePatch> anchors,
                             std::span<const std::uint32_t> masks,
                             std::span<const Homography> H,
                             std::span<const double> weights,
                             double bound) const {
  if (anchors.empty()) return aggregate(center, H, weights, bound);
  double den = 0.0;
  for (double w : weights) {
    if (w > 0.0) den += w;
  }
  if (!(den > 0.0)) return kMaxCost;
  const double lambda = params_.lambda;
  const double limit = bound * den;
  std::vector<double> costs;
  costs.reserve(anchors.size());
  double num = 0.0;
  for (size_t k = 0; k < sources_.size(); ++k) {
    const double wk = weights[k];
    if (!(wk > 0.0)) continue;
    const int kk = static_cast<int>(k);
    size_t visible = 0;
    for (size_t a = 0; a < anchors.size(); ++a) {
      if (masks.empty() || (masks[a] & (1u << k))) ++visible;
    }
    const double c = view_cost(center, kk, H[k]);
    // Costs are nonnegative, so partial anchor sums give a lower bound.
    const double center_term = visible > 0 ? lambda * c : c;
    if (num + wk * center_term >= limit) return (num + wk * center_term) / den;
    costs.clear();
    double partial = 0.0;
    for (size_t a = 0; a < anchors.size(); ++a) {
      if (!masks.empty() && !(masks[a] & (1u << k))) continue;
      const double ca = view_cost(anchors[a], kk, H[k]);
      costs.push_back(ca);
      partial += ca;
      const double lower =
          num + wk * (center_term + (1.0 - lambda) * partial / static_cast<double>(visible));
      if (lower >= limit) return lower / den;
    }
    num += wk * deformable_cost(c, costs, lambda);
    if (num >= limit) return num / den;
  }
  return std::clamp(num / den, 0.0, kMaxCost);
}

double CostModel::highlight(std::span<const ReferencePatch> anchors,
                            std::span<const std::uint32_t> masks,
                            std::span<const Homography> H,
                            std::span<const double> weights) const {
  double num = 0.0, den = 0.0;
  std::vector<double> costs;
  for (size_t k = 0; k < sources_.size(); ++k) {
    if (!(weights[k] > 0.0)) continue;
    costs.clear();
    for (size_t a = 0; a < anchors.size(); ++a) {
      if (!masks.empty() && !(masks[a] & (1u << k))) continue;
      costs.push_back(view_cost(anchors[a], static_cast<int>(k), H[k]));
    }
    num += weights[k] * highlight_cost(costs);
    den += weights[k];
  }
  if (!(den > 0.0)) return kMaxCost;
  return std::clamp(num / den, 0.0, kMaxCost);
}

}  // namespace dvp
