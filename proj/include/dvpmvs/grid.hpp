#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace dvp {

// Dense row-major H×W map. Used for images, depth/normal maps, masks and
// label maps alike.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width),
        height_(height),
        data_(static_cast<size_t>(width) * static_cast<size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) {
    assert(contains(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(contains(x, y));
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  void fill(const T& value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Grid& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

// Clamped integer lookup.
template <typename T>
const T& at_clamped(const Grid<T>& g, int x, int y) {
  x = x < 0 ? 0 : (x >= g.width() ? g.width() - 1 : x);
  y = y < 0 ? 0 : (y >= g.height() ? g.height() - 1 : y);
  return g(x, y);
}

// Bilinear sample at continuous pixel coordinates (pixel centers at integer
// positions). Returns false when (x, y) lies outside [0, W-1]×[0, H-1].
inline bool sample_bilinear(const Grid<float>& g, double x, double y,
                            float& out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= g.width() - 1 && y <= g.height() - 1)) {
    return false;
  }
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  if (x0 == g.width() - 1) --x0;
  if (y0 == g.height() - 1) --y0;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);
  const size_t row = static_cast<size_t>(y0) * g.width();
  const float* p = &g[row + x0];
  const float* q = p + g.width();
  if (g.width() == 1 || g.height() == 1) {
    out = p[0];
    return true;
  }
  const float top = p[0] + fx * (p[1] - p[0]);
  const float bottom = q[0] + fx * (q[1] - q[0]);
  out = top + fy * (bottom - top);
  return true;
}

}  // namespace dvp
