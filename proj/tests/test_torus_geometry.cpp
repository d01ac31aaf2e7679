#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rlab/measures.hpp"
#include "rlab/rng.hpp"
#include "rlab/torus_geometry.hpp"

using namespace rlab;

namespace {
const TorusAutomorphism cat = TorusAutomorphism::cat_map();
}

TEST_CASE("ellipse enumeration") {
  auto s = enumerate_ellipses(cat, 1, 0.01);
  REQUIRE(s.ellipses.size() == 1);
  CHECK(s.ellipses[0].center.nx == 0);
  CHECK(s.ellipses[0].center.ny == 0);
  s = enumerate_ellipses(cat, 3, 0.001);
  CHECK(s.ellipses.size() == 16);
  CHECK_FALSE(s.overlap);
  // pairwise: centres further apart than the sum of the largest semi-axes
  for (std::size_t i = 0; i < s.ellipses.size(); ++i)
    for (std::size_t j = i + 1; j < s.ellipses.size(); ++j) {
      const auto& p = s.ellipses[i].center;
      const auto& q = s.ellipses[j].center;
      const double d = torus_distance(p.to_fixed(), q.to_fixed());
      CHECK(d > 2 * std::max(s.ellipses[i].semi_axis_stable, s.ellipses[i].semi_axis_unstable));
    }
  s = enumerate_ellipses(cat, 4, 0.0);
  CHECK(s.radius == 0.0);
  CHECK(exact_event_measure(cat, 4, 0.0) == 0.0);
}

TEST_CASE("exact event measure") {
  for (unsigned k = 2; k <= 8; ++k) CHECK(std::fabs(exact_event_measure(cat, k, 0.01) - 0.01) <= 1e-12);
  const auto s = enumerate_ellipses(cat, 2, 0.02);
  CHECK(s.ellipses.size() == 5);
  CHECK(s.ellipse_area == doctest::Approx(0.004).epsilon(1e-12));
  CHECK(exact_event_measure(cat, 2, 0.02) == doctest::Approx(0.02).epsilon(1e-12));
  // count x single area = pi r^2
  for (unsigned k = 2; k <= 8; ++k) {
    const auto e = enumerate_ellipses(cat, k, 0.005);
    CHECK(static_cast<double>(e.ellipses.size()) * e.ellipse_area == doctest::Approx(M_PI * e.radius * e.radius).epsilon(1e-12));
  }
  // radius > 1/2 at k = 1 forces overlap
  CHECK_THROWS_AS(exact_event_measure(cat, 1, 0.9), OverlapError);
}

TEST_CASE("three membership tests agree") {
  for (unsigned k = 1; k <= 8; ++k) {
    const double mass = 0.01;
    const auto set = enumerate_ellipses(cat, k, mass);
    REQUIRE_FALSE(set.overlap);
    const EllipseIndex index(set);
    const Mat2 b = power_minus_identity_mod(cat, k);
    SampleRng rng(k);
    for (int i = 0; i < 100000; ++i) {
      const TorusPoint x{rng(), rng()};
      // slow path: iterate k times and measure the displacement
      const double d = torus_distance(oracle::iterate(cat.matrix(), x, k), x);
      const bool slow = d < set.radius;
      const bool fast = in_event_set(b, set.radius, x);
      const bool ell = index.find(x).has_value();
      if (std::fabs(d - set.radius) < 1e-12) continue;
      REQUIRE(slow == fast);
      REQUIRE(slow == ell);
    }
  }
}

TEST_CASE("separation constants") {
  CHECK(std::isinf(separation_constant(cat, 1, 0.01)));
  const double c = separation_constant(cat, 4, 0.01);
  CHECK(std::isfinite(c));
  CHECK(c > 0);
  CHECK(rectangles_disjoint(cat, 4, 0.01, 0.9 * c));
  CHECK_FALSE(rectangles_disjoint(cat, 4, 0.01, 2 * c));
  const std::vector<unsigned> ls{2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> rhos{1e-4, 1e-3, 1e-2, 1e-1};
  const auto rep = separation_probe(cat, ls, rhos);
  CHECK(rep.rows.size() == ls.size() * rhos.size());
  MESSAGE("c_A over l in 2..10, rho in [1e-4, 1e-1]: ", rep.c_a);
  CHECK(rep.c_a > 0.01);
}

TEST_CASE("intersection bounds") {
  const auto cm = intersection_bound_check(cat, 3, 3, RadiusSchedule::constant(0.005), IntersectionMode::exact);
  CHECK(cm.intersection >= 0);
  CHECK(cm.covers_disjoint);
  CHECK(cm.required_c <= 10);
  const auto zero = intersection_bound_check(cat, 3, 2, RadiusSchedule::table({0.01, 0.01, 0.01}), IntersectionMode::exact);
  CHECK(zero.intersection == 0.0);
  const auto mc = intersection_bound_check(cat, 2, 8, RadiusSchedule::constant(0.005), IntersectionMode::monte_carlo,
                                           400000, 5, 2);
  const double prod = mc.m_k * mc.m_kl;
  MESSAGE("k=2, l=8: joint ", mc.intersection, " +- ", mc.std_error, ", product ", prod);
  CHECK(std::fabs(mc.intersection - 0.005 * 0.005) <= 3 * mc.std_error);
  CHECK_THROWS(intersection_bound_check(cat, 8, 5, RadiusSchedule::constant(0.005), IntersectionMode::exact));
}

TEST_CASE("pair joint at k = l = 10 against the rectangle cover") {
  const auto mc = intersection_bound_check(cat, 10, 10, RadiusSchedule::constant(0.01), IntersectionMode::monte_carlo,
                                           200000, 8, 2);
  CHECK(mc.intersection <= mc.bound_unit * 10 + 3 * mc.std_error);
}
