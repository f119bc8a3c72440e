#include "dvpmvs/geometry.hpp"

#include <cmath>

namespace dvp {

RelativePose relative_pose(const CameraView& view_i, const CameraView& view_j) {
  RelativePose rel;
  rel.R = view_j.R * view_i.R.transpose();
  rel.t = view_j.T - rel.R * view_i.T;
  return rel;
}

Vec3 back_project(const Vec2& p, double depth, const CameraView& view) {
  const Vec3 X_c = depth * pixel_ray(view.K_inv(), p);
  return view.R.transpose() * (X_c - view.T);
}

Projection project(const Vec3& world, const CameraView& view) {
  const Vec3 X_c = view.R * world + view.T;
  const Vec3 h = view.K * X_c;
  Projection out;
  out.depth = X_c.z();
  if (std::abs(h.z()) > 0.0) out.pixel = h.head<2>() / h.z();
  return out;
}

Homography homography(const PlaneHypothesis& h, const Vec2& p,
                      const CameraView& view_i, const CameraView& view_j) {
  return ViewPair(view_i, view_j).homography(h.normal.cast<double>(), h.depth, p);
}

EpipolarLine epipolar_line(const Vec2& p, const CameraView& view_i,
                           const CameraView& view_j) {
  const ViewPair pair(view_i, view_j);
  const Vec3& b = pair.baseline_image();
  if (pair.pose().t.norm() < 1e-12) {
    throw GeometryError("epipolar line undefined: camera centers coincide");
  }
  const Vec3 a = pair.ray_image(p);
  // Homogeneous line through the epipole b and the vanishing point a.
  const Vec3 l = b.cross(a);
  const double ln = l.head<2>().norm();
  if (ln < 1e-12 * a.norm() * b.norm()) {
    throw GeometryError("epipolar line undefined: pixel lies on the epipole");
  }
  EpipolarLine line;
  Vec2 dir(a.x() * b.z() - a.z() * b.x(), a.y() * b.z() - a.z() * b.y());
  line.direction = dir.normalized();
  line.point = -l.z() * l.head<2>() / (ln * ln);
  return line;
}

ViewPair::ViewPair(const CameraView& view_i, const CameraView& view_j)
    : pose_(relative_pose(view_i, view_j)), K_inv_i_(view_i.K_inv()) {
  M_ = view_j.K * pose_.R * K_inv_i_;
  b_ = view_j.K * pose_.t;
}

Projection ViewPair::transfer(const Vec2& p, double depth) const {
  const Vec3 h = depth * (M_ * Vec3(p.x(), p.y(), 1.0)) + b_;
  Projection out;
  out.depth = h.z();
  if (std::abs(h.z()) > 0.0) out.pixel = h.head<2>() / h.z();
  return out;
}

Homography ViewPair::homography(const Vec3& n, double depth,
                                const Vec2& p) const {
  Homography out;
  const Vec3 ray = pixel_ray(K_inv_i_, p);
  const double dist = plane_offset(n, depth, ray);
  if (std::abs(dist) < 1e-12) {
    out.degenerate = true;
    return out;
  }
  const Vec3 m = K_inv_i_.transpose() * n;
  out.H = M_ - b_ * m.transpose() / dist;
  const double fro = out.H.norm();
  if (!(fro > 0.0) || std::abs((out.H / fro).determinant()) < 1e-12) {
    out.degenerate = true;
  }
  return out;
}

Vec3 ViewPair::ray_image(const Vec2& p) const {
  return M_ * Vec3(p.x(), p.y(), 1.0);
}

double ViewPair::depth_of_epipolar_point(const Vec2& p, const Vec2& q) const {
  const Vec3 a = ray_image(p);
  // Solve q_c = (d a_c + b_c) / (d a_z + b_z) on the better-conditioned axis.
  const double den_u = a.x() - q.x() * a.z();
  const double den_v = a.y() - q.y() * a.z();
  if (std::abs(den_u) >= std::abs(den_v)) {
    if (std::abs(den_u) < 1e-15) return -1.0;
    return (q.x() * b_.z() - b_.x()) / den_u;
  }
  return (q.y() * b_.z() - b_.y()) / den_v;
}

}  // namespace dvp
