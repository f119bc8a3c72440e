#include <cmath>

#include "doctest.h"
#include "dvpmvs/visibility.hpp"
#include "support.hpp"

using namespace dvp;

TEST_CASE("view selection weights") {
  VisibilityParams p;
  CHECK(view_selection_weight(0.0, p) == 1.0);
  CHECK(view_selection_weight(1.2, p) == 0.0);
  CHECK(view_selection_weight(1.9, p) == 0.0);
  const double at_good = std::exp(-0.8 * 0.8 / (2 * 0.3 * 0.3));
  CHECK(view_selection_weight(1.0, p) == doctest::Approx(at_good / 2));
  CHECK(view_selection_weight(0.5, p) == doctest::Approx(std::exp(-0.25 / 0.18)));
  std::vector<double> costs{0.0, 2.0}, w(2);
  view_selection(costs, p, w);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 0.0);
}

TEST_CASE("restored weight falls back to w_min") {
  VisibilityField f(1, 2, 1);
  f.restored[0](0, 0) = 1;
  f.w[0](1, 0) = 0.7f;
  CHECK(f.weight(0, 0, 0, 0.1) == 0.1);
  CHECK(f.weight(0, 1, 0, 0.1) == 0.0);
  f.restored[0](1, 0) = 1;
  CHECK(f.weight(0, 1, 0, 0.1) == doctest::Approx(0.7));
}

namespace {

struct Rig {
  CameraView vi = test::pinhole(0, 200, 160, 120, Mat3::Identity(), Vec3::Zero());
  CameraView vj = test::shifted(1, 200, 160, 120, 0.4);
  ViewPair ij{vi, vj}, ji{vj, vi};
  Grid<float> depth_j{160, 120, 4.f};
  Grid<float> cost_j{160, 120, 0.1f};
};

}  // namespace

TEST_CASE("consistent depths reproject onto themselves") {
  Rig r;
  for (Vec2i p : {Vec2i(80, 60), Vec2i(40, 20), Vec2i(150, 100)}) {
    double e = reprojection_error(p, 4.0, r.ij, r.ji, {&r.depth_j, &r.cost_j}, 11);
    CHECK(e <= 0.5);
  }
}

TEST_CASE("window substitution hides a single corrupted pixel") {
  Rig r;
  const Vec2i p(80, 60);
  Projection q = r.ij.transfer(p.cast<double>(), 4.0);
  const int qx = int(std::lround(q.pixel.x())), qy = int(std::lround(q.pixel.y()));
  r.depth_j(qx, qy) = 9.f;
  r.cost_j(qx, qy) = 1.5f;
  double e = reprojection_error(p, 4.0, r.ij, r.ji, {&r.depth_j, &r.cost_j}, 11);
  CHECK(e <= 0.5);
}

TEST_CASE("occluded pixels fail the reprojection test") {
  Rig r;
  const Vec2i p(80, 60);
  Projection q = r.ij.transfer(p.cast<double>(), 4.0);
  for (int y = 0; y < 120; ++y)
    for (int x = int(q.pixel.x()) - 20; x < int(q.pixel.x()) + 20; ++x) r.depth_j(x, y) = 2.f;
  double e = reprojection_error(p, 4.0, r.ij, r.ji, {&r.depth_j, &r.cost_j}, 11);
  CHECK(e > VisibilityParams{}.eps_reproj);
  // Points that leave view j are unseen.
  CHECK(std::isinf(reprojection_error({2, 60}, 4.0, r.ij, r.ji, {&r.depth_j, &r.cost_j}, 11)));
}

TEST_CASE("restore visibility pass zero copies the selection") {
  Rig r;
  VisibilityField f(1, 160, 120);
  f.w[0](3, 3) = 0.5f;
  Grid<float> depth_i(160, 120, 4.f);
  ViewPair ij[] = {r.ij}, ji[] = {r.ji};
  SourceDepth src[] = {{&r.depth_j, &r.cost_j}};
  restore_visibility(f, 0, depth_i, ij, ji, src, VisibilityParams{}, 1);
  int on = 0;
  for (auto v : f.restored[0].values()) on += v;
  CHECK(on == 1);
  CHECK(f.restored[0](3, 3) == 1);

  restore_visibility(f, 1, depth_i, ij, ji, src, VisibilityParams{}, 1);
  CHECK(f.restored[0](80, 60) == 1);
  CHECK(f.restored[0](2, 60) == 0);
}

TEST_CASE("camera facing away restores nothing") {
  Rig r;
  Mat3 flip = Eigen::AngleAxisd(M_PI, Vec3::UnitY()).toRotationMatrix();
  CameraView away = test::posed(1, 200, 160, 120, flip, Vec3(0.4, 0, 0));
  ViewPair ij[] = {ViewPair(r.vi, away)}, ji[] = {ViewPair(away, r.vi)};
  SourceDepth src[] = {{&r.depth_j, &r.cost_j}};
  VisibilityField f(1, 160, 120);
  restore_visibility(f, 1, Grid<float>(160, 120, 4.f), ij, ji, src, VisibilityParams{}, 1);
  int on = 0;
  for (auto v : f.restored[0].values()) on += v;
  CHECK(on == 0);
}
