#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dvpmvs/solver.hpp"
#include "dvpmvs/synth.hpp"
#include "support.hpp"

using namespace dvp;

TEST_CASE("reliability threshold") {
  Grid<float> c(3, 1);
  c[0] = 0.f; c[1] = 0.3f; c[2] = 2.f;
  Mask m = classify_reliability(c, 0.3);
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);
  CHECK(m[2] == 0);
}

TEST_CASE("pixel generator is a pure function of its seed") {
  CHECK(pixel_seed(7, 0, 1, 2, 3) == pixel_seed(7, 0, 1, 2, 3));
  CHECK(pixel_seed(7, 0, 1, 2, 3) != pixel_seed(7, 0, 1, 2, 4));
  CHECK(pixel_seed(7, 0, 1, 2, 3) != pixel_seed(8, 0, 1, 2, 3));
  PixelRng a(pixel_seed(1, 2, 3, 4, 5)), b(pixel_seed(1, 2, 3, 4, 5));
  for (int i = 0; i < 100; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  PixelRng c(99);
  for (int i = 0; i < 100; ++i) CHECK(c.unit_vector().norm() == doctest::Approx(1.0));
}

TEST_CASE("depth range resolution order") {
  Scene s;
  SceneView v;
  v.priors.mono_depth = Grid<float>(4, 4, 2.f);
  v.priors.mono_depth[0] = 1.f;
  v.priors.mono_depth[1] = 8.f;
  s.views.push_back(v);
  Config c;
  DepthRange r = resolve_depth_range(s, c);
  CHECK(r.min == doctest::Approx(0.5));
  CHECK(r.max == doctest::Approx(16.0));
  s.depth_range = DepthRange{1.5, 9.0};
  CHECK(resolve_depth_range(s, c).min == 1.5);
  c.depth_min = 0.7;
  c.depth_max = 3.0;
  CHECK(resolve_depth_range(s, c).max == 3.0);
}

TEST_CASE("rectified intervals follow the disparity model") {
  const double f = 400, b = 0.25;
  CameraView vi = test::pinhole(0, f, 320, 240, Mat3::Identity(), Vec3::Zero());
  CameraView vj = test::shifted(1, f, 320, 240, b);
  ViewPair pair(vi, vj);
  IntervalParams ip;
  DepthRange range{0.1, 1000};
  for (double d : {1.0, 3.0, 7.5}) {
    const double D = f * b / d;
    auto iv = view_interval(Vec2(160, 120), d, pair, range, ip);
    REQUIRE(iv.has_value());
    CHECK(iv->ll == doctest::Approx(f * b / (D + ip.alpha + ip.beta)).epsilon(1e-9));
    CHECK(iv->lr == doctest::Approx(f * b / (D + ip.alpha)).epsilon(1e-9));
    CHECK(iv->rl == doctest::Approx(f * b / (D - ip.alpha)).epsilon(1e-9));
    CHECK(iv->rr == doctest::Approx(f * b / (D - ip.alpha - ip.beta)).epsilon(1e-9));
  }
}

TEST_CASE("intervals bracket the depth and mu one is the envelope") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);
  CameraView vi = test::pinhole(0, 400, 320, 240, Mat3::Identity(), Vec3::Zero());
  std::vector<ViewPair> pairs;
  for (int k = 0; k < 5; ++k) {
    CameraView vj = test::posed(k + 1, 400, 320, 240, test::random_rotation(rng, 0.1),
                                Vec3(u(rng) - 0.5, u(rng) - 0.5, 0.1 * u(rng)));
    pairs.emplace_back(vi, vj);
  }
  std::vector<double> w(5, 1.0);
  DepthRange range{0.5, 50};
  for (int i = 0; i < 200; ++i) {
    Vec2 p(319 * u(rng), 239 * u(rng));
    double d = 1 + 10 * u(rng);
    IntervalParams ip;
    DepthIntervals iv = epipolar_intervals(p, d, pairs, w, range, ip);
    REQUIRE(iv.valid);
    CHECK(iv.ll <= iv.lr);
    CHECK(iv.lr < d);
    CHECK(d < iv.rl);
    CHECK(iv.rl <= iv.rr);

    ip.mu = 1;
    DepthIntervals env = epipolar_intervals(p, d, pairs, w, range, ip);
    double ll = 1e300, lr = -1e300, rl = 1e300, rr = -1e300;
    for (const auto& pr : pairs) {
      auto v = view_interval(p, d, pr, range, ip);
      if (!v) continue;
      ll = std::min(ll, v->ll);
      lr = std::max(lr, v->lr);
      rl = std::min(rl, v->rl);
      rr = std::max(rr, v->rr);
    }
    CHECK(env.ll == doctest::Approx(ll).epsilon(1e-12));
    CHECK(env.lr == doctest::Approx(lr).epsilon(1e-12));
    CHECK(env.rl == doctest::Approx(rl).epsilon(1e-12));
    CHECK(env.rr == doctest::Approx(rr).epsilon(1e-12));
  }
}

TEST_CASE("hemisphere predicate") {
  std::vector<Vec3> centers{Vec3(0.5, 0, 0), Vec3(-0.5, 0.2, 0)};
  std::vector<double> w{1.0, 1.0};
  const Vec3 P(0, 0, 5);
  CHECK(hemisphere_admissible(Vec3(0, 0, -1), P, centers, w));
  CHECK(!hemisphere_admissible((centers[0] - P).normalized() * -1.0, P, centers, w));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    Vec3 n = Vec3(g(rng), g(rng), g(rng)).normalized();
    bool brute = n.dot(P) <= 0;
    for (const auto& c : centers) brute = brute && n.dot(P - c) <= 0;
    CHECK(hemisphere_admissible(n, P, centers, w) == brute);
    Vec3 fixed = repair_normal(n, P, centers, w);
    CHECK(fixed.norm() == doctest::Approx(1.0));
    CHECK(hemisphere_admissible(fixed, P, centers, w));
  }
}

TEST_CASE("fully masked reference is degenerate") {
  SceneSpec spec = fixture("specular_disk");
  spec.width = 64;
  spec.height = 48;
  spec.focal = 60;
  RenderedScene r = render(spec);
  for (auto& v : r.scene.views[0].priors.highlight_mask.values()) v = 1;
  Config c;
  c.passes = 1;
  c.sweeps_per_pass = 1;
  c.threads = 1;
  auto res = solve_scene(r.scene, c, {{r.scene.views[0].camera.id}, {}});
  REQUIRE(res.size() == 1);
  CHECK(res[0].degenerate);
}

TEST_CASE("small scene solve is deterministic and accurate") {
  SceneSpec spec = fixture("occluder");
  spec.width = 128;
  spec.height = 96;
  spec.focal = 120;
  RenderedScene r = render(spec);
  Config c;
  c.seed = 3;
  c.threads = 1;
  std::vector<std::string> lines;
  SolveOptions opt;
  opt.log = [&](const std::string& s) { lines.push_back(s); };
  auto a = solve_scene(r.scene, c, opt);
  auto b = solve_scene(r.scene, c);
  REQUIRE(a.size() == r.scene.views.size());
  CHECK(lines.size() == 3 * r.scene.views.size());
  CHECK(lines[0].rfind("view=", 0) == 0);
  CHECK(lines[0].find("pass=1 mean_cost=") != std::string::npos);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].depth == b[i].depth);
    CHECK(a[i].normal == b[i].normal);
  }
  // Median relative depth error on reliable pixels.
  std::vector<double> err;
  const auto& gt = r.gt.depth[0];
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0 && a[0].reliable[i]) err.push_back(std::abs(a[0].depth[i] - gt[i]) / gt[i]);
  }
  REQUIRE(err.size() > gt.size() / 3);
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  CHECK(err[err.size() / 2] < 0.01);
  // Normals face the camera.
  for (int y = 0; y < 96; y += 7)
    for (int x = 0; x < 128; x += 7) {
      Vec3 ray = r.scene.views[0].camera.K_inv() * Vec3(x, y, 1);
      CHECK(a[0].normal(x, y).cast<double>().dot(ray) <= 1e-6);
    }
}
