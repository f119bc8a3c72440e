#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dvp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec2i = Eigen::Vector2i;
using Vec3f = Eigen::Vector3f;

// Per-pixel plane hypothesis: camera-space unit normal plus the depth
// (camera z) of the pixel's viewing ray where it meets the plane.
struct PlaneHypothesis {
  Vec3f normal = Vec3f(0.f, 0.f, -1.f);
  float depth = 0.f;

  bool operator==(const PlaneHypothesis&) const = default;
};

// Inclusive world-depth search range.
struct DepthRange {
  double min = 0.0;
  double max = 0.0;

  bool contains(double d) const { return d >= min && d <= max; }
  bool valid() const { return min > 0.0 && max > min; }
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dvp
