#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "rlab/interval_geometry.hpp"
#include "rlab/measures.hpp"

using namespace rlab;

namespace {

const IntervalMap x3 = IntervalMap::linear(3);
const MeasureModel leb = MeasureModel::lebesgue_interval();

double gap(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass, double t) {
  double y = t;
  for (unsigned i = 0; i < k; ++i) y = map.step(y);
  return std::fabs(y - t) - radius_for_mass(model, t, mass);
}

}  // namespace

TEST_CASE("first-level component of x3 at the left edge") {
  const auto comps = event_components(x3, leb, 1, 0.1);
  REQUIRE(comps.size() == 3);
  const auto& c = comps[0];
  CHECK(c.a == doctest::Approx(0.0));
  CHECK(c.b == doctest::Approx(1.0 / 30).epsilon(1e-12));
  CHECK(c.image_lo == doctest::Approx(0.0));
  CHECK(c.image_hi == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.image_mass == doctest::Approx(0.1).epsilon(1e-12));
  double total = 0;
  for (const auto& e : comps) total += e.mass;
  CHECK(total == doctest::Approx(interval_event_measure(x3, leb, 1, 0.1)).epsilon(1e-12));
}

TEST_CASE("zero mass gives empty components") {
  for (const auto& c : event_components(x3, leb, 3, 0.0)) CHECK(c.mass == 0.0);
  CHECK(interval_event_measure(x3, leb, 3, 0.0) == 0.0);
  const auto tb = check_three_ball_cover(x3, leb, 3, 0.0);
  CHECK(tb.max_ratio == 0.0);
  CHECK(check_component_mass(x3, leb, 3, 0.0).max_constant == 0.0);
  const auto jm = exact_joint_measure(x3, leb, 3, 2, 0.05, 0.0);
  CHECK(jm.joint == 0.0);
}

TEST_CASE("word cap") {
  CHECK_THROWS_AS(event_components(x3, leb, 13, 0.05), std::invalid_argument);
  CHECK_NOTHROW(interval_event_measure(x3, leb, 13, 0.05));
}

TEST_CASE("endpoints solve the defining equation") {
  const auto p5 = IntervalMap::perturbed(5, 0.1);
  const auto gibbs = build_gibbs(p5, PotentialSpec::geometric(p5), 12);
  const auto rev = IntervalMap::linear(3, {false, true, false});
  struct Case {
    const IntervalMap* map;
    const MeasureModel* model;
  };
  for (const Case& cs : {Case{&x3, &leb}, Case{&rev, &leb}, Case{&p5, &gibbs}})
    for (unsigned k = 1; k <= 4; ++k)
      for (const auto& c : event_components(*cs.map, *cs.model, k, 0.05)) {
        // clamp flags refer to the image; reversed branches swap the ends
        const bool clamp_a = c.orientation > 0 ? c.clamped_lo : c.clamped_hi;
        const bool clamp_b = c.orientation > 0 ? c.clamped_hi : c.clamped_lo;
        if (!clamp_a && c.a > 0) CHECK(std::fabs(gap(*cs.map, *cs.model, k, 0.05, c.a)) <= 1e-10);
        if (!clamp_b && c.b < 1) CHECK(std::fabs(gap(*cs.map, *cs.model, k, 0.05, c.b)) <= 1e-10);
        CHECK(c.a <= c.p);
        CHECK(c.p <= c.b);
      }
}

TEST_CASE("components are exhaustive on an exact grid") {
  // grid points i / 2^20 iterate exactly under x3
  const std::uint64_t n = std::uint64_t{1} << 20;
  for (unsigned k = 1; k <= 6; ++k) {
    const double mass = 0.05 / std::pow(std::log(k + 10.0), 2);
    const auto comps = event_components(x3, leb, k, mass);
    std::vector<std::pair<double, double>> ivs;
    for (const auto& c : comps)
      if (c.b > c.a) ivs.emplace_back(c.a, c.b);
    std::sort(ivs.begin(), ivs.end());
    std::uint64_t count = 0;
    std::size_t j = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n);
      const bool direct = oracle::linear_event(i, n, 3, k, mass);
      count += direct;
      while (j < ivs.size() && ivs[j].second <= x) ++j;
      const bool inside = j < ivs.size() && ivs[j].first < x && x < ivs[j].second;
      const bool near = j < ivs.size() && std::min(std::fabs(x - ivs[j].first), std::fabs(x - ivs[j].second)) < 1e-12;
      if (!near) REQUIRE(direct == inside);
    }
    const double measure = interval_event_measure(x3, leb, k, mass);
    CHECK(std::fabs(static_cast<double>(count) / n - measure) <= 2.0 * (ivs.size() + 1) / n);
  }
}

TEST_CASE("closed-form event measure agrees with the component list") {
  for (unsigned k = 1; k <= 9; ++k) {
    double sum = 0;
    for (const auto& c : event_components(x3, leb, k, 0.03)) sum += c.mass;
    CHECK(interval_event_measure(x3, leb, k, 0.03) == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("three-ball cover on x3") {
  for (unsigned k = 1; k <= 8; ++k) {
    const double mass = 0.05 / std::pow(std::log(k + 10.0), 2);
    const auto rep = check_three_ball_cover(x3, leb, k, mass);
    CHECK(rep.ok);
    CHECK(rep.components == static_cast<std::size_t>(std::pow(3, k)));
    CHECK(rep.max_ratio <= 3 + 1e-9);
    CHECK(rep.max_ratio >= 1.0);
  }
}

TEST_CASE("reversed branches satisfy the single-ball cover") {
  const auto rev = IntervalMap::linear(4, {true, false, true, true});
  for (unsigned k = 1; k <= 5; ++k) {
    const auto rep = check_three_ball_cover(rev, leb, k, 0.04);
    CHECK(rep.cover_failures == 0);
    CHECK(rep.ok);
    // direct: T^k I within B(p, r(p)) for negative orientation
    for (const auto& c : event_components(rev, leb, k, 0.04)) {
      if (c.orientation > 0 || c.b <= c.a) continue;
      const double r = radius_for_mass(leb, c.p, 0.04);
      CHECK(c.image_lo >= c.p - r - 1e-12);
      CHECK(c.image_hi <= c.p + r + 1e-12);
    }
  }
}

TEST_CASE("component mass constants") {
  const auto rep = check_component_mass(x3, leb, 6, 0.05);
  MESSAGE("x3 Lebesgue component constant ", rep.max_constant);
  CHECK(rep.max_constant >= 1.0);
  CHECK(rep.max_constant <= 2.0);
  const auto bern = build_gibbs(x3, PotentialSpec::bernoulli({0.5, 0.3, 0.2}), 20);
  double first = 0;
  for (unsigned k = 4; k <= 8; ++k) {
    const auto r = check_component_mass(x3, bern, k, 0.05);
    MESSAGE("Bernoulli k=", k, ": constant ", r.max_constant, ", unresolved cylinders ", r.skipped);
    CHECK(std::isfinite(r.max_constant));
    CHECK(r.skipped < static_cast<std::size_t>(std::pow(3, k)));
    if (k == 4) first = r.max_constant;
    CHECK(r.max_constant <= 1.2 * first);
    CHECK(r.max_constant >= first / 1.2);
  }
}

TEST_CASE("joint measures against an exact grid count") {
  const std::uint64_t n = std::uint64_t{1} << 22;
  const unsigned k = 3, l = 2;
  const double mk = 0.05, mkl = 0.05;
  const auto jm = exact_joint_measure(x3, leb, k, l, mk, mkl);
  std::uint64_t both = 0;
  for (std::uint64_t i = 0; i < n; ++i)
    both += oracle::linear_event(i, n, 3, k, mk) && oracle::linear_event(i, n, 3, k + l, mkl);
  CHECK(std::fabs(static_cast<double>(both) / n - jm.joint) <= 4.0 * 243 / n);
  CHECK(jm.m_k == doctest::Approx(interval_event_measure(x3, leb, k, mk)).epsilon(1e-12));
  CHECK(jm.m_kl == doctest::Approx(interval_event_measure(x3, leb, k + l, mkl)).epsilon(1e-12));
  CHECK_THROWS_AS(exact_joint_measure(x3, leb, 10, 10, 0.02, 0.02, 1, 1000), std::length_error);
}

TEST_CASE("short returns at k = 5") {
  const auto rep = short_return_check(x3, leb, RadiusSchedule::constant(0.05), 5, 6);
  CHECK(rep.ok);
  CHECK(rep.lambda == doctest::Approx(3.0).epsilon(1e-6));
  REQUIRE(rep.rows.size() == 6);
  const auto& last = rep.rows.back();
  MESSAGE("k=5, l=6: joint ", last.joint, " product ", last.product);
  CHECK(last.joint == doctest::Approx(last.product).epsilon(0.1));
  CHECK_THROWS(short_return_check(x3, leb, RadiusSchedule::constant(0.05), 8, 6));
}
