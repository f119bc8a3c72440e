#include <cmath>
#include <random>

#include "doctest.h"
#include "dvpmvs/deformation.hpp"

using namespace dvp;

TEST_CASE("twice area") {
  CHECK(twice_area({1, 0}, {0, 1}, {0, 0}) == 1);
  CHECK(twice_area({1, 1}, {0, 1}, {0, 0}) == 1);
  CHECK(twice_area({2, 0}, {5, 0}, {0, 0}) == 0);
}

TEST_CASE("area gain of the unit example") {
  // Neighbors (1,0) and (0,1), candidate (1,1): 0.5 + 0.5 − 0.5 = 0.5.
  Vec2i p(0, 0), a(1, 0), b(0, 1), c(1, 1);
  const double gain = 0.5 * (twice_area(a, c, p) + twice_area(c, b, p) - twice_area(a, b, p));
  CHECK(gain == 0.5);
}

TEST_CASE("sector of offsets") {
  CHECK(sector_of({1, 0}, 8) == 0);
  CHECK(sector_of({1, 1}, 8) == 1);
  CHECK(sector_of({0, 1}, 8) == 2);
  CHECK(sector_of({-1, 0}, 8) == 4);
  CHECK(sector_of({0, -1}, 8) == 6);
  CHECK(sector_of({1, -1}, 8) == 7);
}

TEST_CASE("reliable ring fills every sector") {
  Mask reliable(101, 101, 0);
  Grid<float> cost(101, 101, 0.1f);
  for (int y = 0; y < 101; ++y)
    for (int x = 0; x < 101; ++x) {
      const double r = std::hypot(x - 50, y - 50);
      if (r >= 19.5 && r <= 20.5) reliable(x, y) = 1;
    }
  AnchorSearch search;
  auto c = collect_candidates({50, 50}, reliable, cost, nullptr, search);
  REQUIRE(c.sectors.size() == 8);
  for (const auto& s : c.sectors) {
    CHECK(!s.empty());
    for (const auto& a : s) CHECK(std::sqrt(double(a.dist2)) == doctest::Approx(20).epsilon(0.05));
  }
  auto anchors = select_area_max(c, {50, 50});
  CHECK(anchors.size() == 8);
}

TEST_CASE("region boundary blocks candidates") {
  Mask reliable(101, 101, 0);
  Grid<float> cost(101, 101, 0.1f);
  Grid<std::int32_t> labels(101, 101, 1);
  for (int y = 0; y < 101; ++y)
    for (int x = 0; x < 101; ++x) {
      if (std::abs(std::hypot(x - 50, y - 50) - 20) <= 0.5) reliable(x, y) = 1;
      if (x > 55) labels(x, y) = 2;
    }
  auto c = collect_candidates({50, 50}, reliable, cost, &labels, AnchorSearch{});
  for (int s : {0, 7}) CHECK(c.sectors[s].empty());
  for (int s : {3, 4, 5}) CHECK(!c.sectors[s].empty());

  Mask none(101, 101, 0);
  auto empty = collect_candidates({50, 50}, none, cost, nullptr, AnchorSearch{});
  for (const auto& s : empty.sectors) CHECK(s.empty());
}

TEST_CASE("area gain prefers the candidate that widens the fan") {
  SectorCandidates c;
  c.sectors.resize(8);
  const Vec2i p(0, 0);
  c.sectors[0] = {{{10, 0}, 0.1f, 100}};
  c.sectors[2] = {{{0, 10}, 0.1f, 100}};
  c.sectors[1] = {{{4, 4}, 0.1f, 32}, {{8, 9}, 0.1f, 145}};
  auto out = select_area_max(c, p);
  REQUIRE(out.size() == 3);
  CHECK(out[1].pixel == Vec2i(8, 9));
}

TEST_CASE("sector without a neighbor takes the farthest candidate") {
  SectorCandidates c;
  c.sectors.resize(8);
  c.sectors[3] = {{{-5, 5}, 0.1f, 50}, {{-9, 12}, 0.5f, 225}};
  auto out = select_area_max(c, {0, 0});
  REQUIRE(out.size() == 1);
  CHECK(out[0].pixel == Vec2i(-9, 12));
}

TEST_CASE("nearest selection") {
  SectorCandidates c;
  c.sectors.resize(8);
  c.sectors[0] = {{{3, 0}, 0.1f, 9}, {{9, 1}, 0.0f, 82}};
  c.sectors[5] = {{{-4, -5}, 0.2f, 41}};
  auto out = select_nearest(c);
  REQUIRE(out.size() == 2);
  CHECK(out[0].pixel == Vec2i(3, 0));
  CHECK(out[1].pixel == Vec2i(-4, -5));
}

TEST_CASE("visibility filter sets one bit per visible source") {
  std::vector<AnchorCandidate> anchors{{{1, 1}, 0.f, 0}, {{2, 2}, 0.f, 0}};
  Grid<float> w0(4, 4, 1.f), w1(4, 4, 0.f);
  w1(2, 2) = 0.5f;
  const Grid<float>* ws[] = {&w0, &w1};
  auto masks = filter_visibility(anchors, ws);
  CHECK(masks[0] == 1u);
  CHECK(masks[1] == 3u);
}
