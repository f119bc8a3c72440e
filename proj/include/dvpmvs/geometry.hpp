#pragma once

#include <cmath>

#include "dvpmvs/scene_io.hpp"
#include "dvpmvs/types.hpp"

namespace dvp {

// Maps camera-i coordinates to camera-j coordinates: X_j = R·X_i + t.
struct RelativePose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

RelativePose relative_pose(const CameraView& view_i, const CameraView& view_j);

// Viewing ray K⁻¹·(x, y, 1); its z component is 1, so depth scales it directly.
inline Vec3 pixel_ray(const Mat3& K_inv, const Vec2& p) {
  return K_inv * Vec3(p.x(), p.y(), 1.0);
}

Vec3 back_project(const Vec2& p, double depth, const CameraView& view);

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;  // ≤ 0 for points behind the camera
};

Projection project(const Vec3& world, const CameraView& view);

struct Homography {
  Mat3 H = Mat3::Identity();
  bool degenerate = false;
};

// Homography induced by the plane of hypothesis h at pixel p, from view i to
// view j.
Homography homography(const PlaneHypothesis& h, const Vec2& p,
                      const CameraView& view_i, const CameraView& view_j);

struct EpipolarLine {
  Vec2 direction = Vec2::UnitX();  // unit, pointing toward increasing depth
  Vec2 point = Vec2::Zero();
};

// Line in view j traced by back_project(p, d) for all d. Throws GeometryError
// when the camera centers coincide or p sits on the epipole.
EpipolarLine epipolar_line(const Vec2& p, const CameraView& view_i,
                           const CameraView& view_j);

// Plane offset `dist` of n·X + dist = 0 through the point at `depth` on `ray`.
inline double plane_offset(const Vec3& n, double depth, const Vec3& ray) {
  return -depth * n.dot(ray);
}

// Depth where `ray` meets the plane n·X + dist = 0, or 0 when it doesn't.
inline double plane_depth(const Vec3& n, double dist, const Vec3& ray) {
  const double denom = n.dot(ray);
  if (std::abs(denom) < 1e-12) return 0.0;
  return -dist / denom;
}

// Precomputed quantities for repeated i → j mappings.
class ViewPair {
 public:
  ViewPair(const CameraView& view_i, const CameraView& view_j);

  const RelativePose& pose() const { return pose_; }
  const Mat3& K_inv_i() const { return K_inv_i_; }

  // Pixel of view j seeing the point at `depth` on p's ray; depth_j ≤ 0 when
  // the point is behind camera j.
  Projection transfer(const Vec2& p, double depth) const;

  Homography homography(const Vec3& n, double depth, const Vec2& p) const;

  // Pixel u(d) = (d·a + b) / (d·a_z + b_z) along p's ray.
  Vec3 ray_image(const Vec2& p) const;  // a
  const Vec3& baseline_image() const { return b_; }  // b

  // Depth whose transfer lands on q (a point of p's epipolar line), or a
  // negative value when q is at or beyond the vanishing point.
  double depth_of_epipolar_point(const Vec2& p, const Vec2& q) const;

 private:
  RelativePose pose_;
  Mat3 K_inv_i_;
  Mat3 M_;  // K_j R K_i⁻¹
  Vec3 b_;  // K_j t
};

}  // namespace dvp
