#include <random>

#include "doctest.h"
#include "dvpmvs/geometry.hpp"
#include "support.hpp"

using namespace dvp;

TEST_CASE("principal point at depth one") {
  CameraView v = test::pinhole(0, 400, 101, 81, Mat3::Identity(), Vec3::Zero());
  Vec3 P = back_project(Vec2(50, 40), 1.0, v);
  CHECK(P.isApprox(Vec3(0, 0, 1)));
  Projection q = project(P, v);
  CHECK(q.depth == doctest::Approx(1.0));
  CHECK((q.pixel - Vec2(50, 40)).norm() < 1e-12);
}

TEST_CASE("point behind the camera has nonpositive depth") {
  CameraView v = test::pinhole(0, 400, 101, 81, Mat3::Identity(), Vec3::Zero());
  CHECK(project(Vec3(0.1, 0.2, -3), v).depth <= 0.0);
}

TEST_CASE("back projection and projection invert each other") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    CameraView v = test::posed(0, 300 + 200 * u(rng), 320, 240,
                               test::random_rotation(rng, 0.5),
                               Vec3(u(rng), u(rng), u(rng)));
    Vec2 p(319 * u(rng), 239 * u(rng));
    double d = 0.5 + 20 * u(rng);
    Projection q = project(back_project(p, d, v), v);
    CHECK(q.depth == doctest::Approx(d).epsilon(1e-9));
    CHECK((q.pixel - p).norm() < 1e-8);
  }
}

TEST_CASE("identical views give the identity homography") {
  CameraView v = test::pinhole(0, 400, 101, 81, Mat3::Identity(), Vec3(0.1, 0, 0));
  PlaneHypothesis h{Vec3f(0.2f, -0.1f, -0.97f).normalized(), 3.f};
  Homography H = homography(h, Vec2(10, 20), v, v);
  CHECK(!H.degenerate);
  Mat3 M = H.H / H.H(2, 2);
  CHECK(M.isApprox(Mat3::Identity(), 1e-12));
}

TEST_CASE("fronto-parallel plane under x translation shifts by f b / d") {
  const double f = 500, b = 0.3, d = 4.0;
  CameraView vi = test::pinhole(0, f, 640, 480, Mat3::Identity(), Vec3::Zero());
  CameraView vj = test::shifted(1, f, 640, 480, b);
  PlaneHypothesis h{Vec3f(0, 0, -1), static_cast<float>(d)};
  Homography H = homography(h, Vec2(300, 200), vi, vj);
  for (Vec2 q : {Vec2(10, 10), Vec2(300, 200), Vec2(600, 400)}) {
    Vec3 m = H.H * Vec3(q.x(), q.y(), 1);
    Vec2 r = m.head<2>() / m.z();
    CHECK(r.x() == doctest::Approx(q.x() - f * b / d).epsilon(1e-12));
    CHECK(r.y() == doctest::Approx(q.y()).epsilon(1e-12));
  }
}

TEST_CASE("homography at p agrees with the depth projection") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    CameraView vi = test::posed(0, 400, 320, 240, test::random_rotation(rng, 0.2),
                                Vec3::Zero());
    CameraView vj = test::posed(1, 420, 320, 240, test::random_rotation(rng, 0.2),
                                Vec3(u(rng) - 0.5, u(rng) - 0.5, 0.3 * u(rng)));
    Vec2 p(319 * u(rng), 239 * u(rng));
    double d = 2 + 8 * u(rng);
    Vec3f n(float(u(rng) - 0.5), float(u(rng) - 0.5), -1.f);
    PlaneHypothesis h{n.normalized(), float(d)};
    Homography H = homography(h, p, vi, vj);
    if (H.degenerate) continue;
    Vec3 m = H.H * Vec3(p.x(), p.y(), 1);
    Projection q = project(back_project(p, h.depth, vi), vj);
    worst = std::max(worst, (m.head<2>() / m.z() - q.pixel).norm());
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("rectified pair has a horizontal epipolar line") {
  CameraView vi = test::pinhole(0, 500, 640, 480, Mat3::Identity(), Vec3::Zero());
  CameraView vj = test::shifted(1, 500, 640, 480, 0.2);
  EpipolarLine l = epipolar_line(Vec2(100, 300), vi, vj);
  CHECK(std::abs(l.direction.y()) < 1e-12);
  CHECK(std::abs(std::abs(l.direction.x()) - 1) < 1e-12);
  CHECK(l.point.y() == doctest::Approx(300));
}

TEST_CASE("epipolar line contains the depth sweep and points toward depth") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    CameraView vi = test::posed(0, 400, 320, 240, test::random_rotation(rng, 0.2),
                                Vec3::Zero());
    CameraView vj = test::posed(1, 400, 320, 240, test::random_rotation(rng, 0.2),
                                Vec3(u(rng) + 0.2, u(rng) - 0.5, 0.2 * u(rng)));
    Vec2 p(319 * u(rng), 239 * u(rng));
    EpipolarLine l = epipolar_line(p, vi, vj);
    Vec2 prev;
    bool have_prev = false;
    for (double d = 1; d < 30; d *= 1.7) {
      Projection q = project(back_project(p, d, vi), vj);
      if (q.depth <= 0) continue;
      Vec2 off = q.pixel - l.point;
      CHECK(std::abs(off.x() * l.direction.y() - off.y() * l.direction.x()) < 1e-6);
      if (have_prev) CHECK((q.pixel - prev).dot(l.direction) > -1e-9);
      prev = q.pixel;
      have_prev = true;
    }
  }
}

TEST_CASE("coincident centers have no epipolar line") {
  CameraView vi = test::pinhole(0, 500, 64, 64, Mat3::Identity(), Vec3::Zero());
  std::mt19937_64 rng(1);
  CameraView vj = test::posed(1, 500, 64, 64, test::random_rotation(rng, 0.3),
                              Vec3::Zero());
  CHECK_THROWS_AS(epipolar_line(Vec2(10, 10), vi, vj), GeometryError);
}

TEST_CASE("view pair transfer matches project of back_project") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    CameraView vi = test::posed(0, 400, 320, 240, test::random_rotation(rng, 0.3),
                                Vec3(u(rng), 0, 0));
    CameraView vj = test::posed(1, 400, 320, 240, test::random_rotation(rng, 0.3),
                                Vec3(u(rng) - 0.5, u(rng), 0));
    ViewPair pair(vi, vj);
    Vec2 p(319 * u(rng), 239 * u(rng));
    double d = 1 + 10 * u(rng);
    Projection a = pair.transfer(p, d);
    Projection b = project(back_project(p, d, vi), vj);
    CHECK((a.pixel - b.pixel).norm() < 1e-8);
    CHECK(a.depth == doctest::Approx(b.depth).epsilon(1e-10));
    if (a.depth > 0) {
      CHECK(pair.depth_of_epipolar_point(p, a.pixel) ==
            doctest::Approx(d).epsilon(1e-6));
    }
  }
}
