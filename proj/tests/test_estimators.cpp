#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rlab/estimators.hpp"
#include "rlab/interval_geometry.hpp"
#include "rlab/torus_geometry.hpp"

using namespace rlab;

namespace {
const DynamicalSampler cat_sampler(TorusAutomorphism::cat_map(), MeasureModel::lebesgue_torus(),
                                   RadiusSchedule::constant(0.01));
}

TEST_CASE("event measure on the torus matches the closed form") {
  const auto a = TorusAutomorphism::cat_map();
  for (unsigned k : {2u, 5u, 8u}) {
    const auto e = estimate_event_measure(cat_sampler, k, 100000, 7 + k, 2);
    CHECK(std::fabs(e.estimate - exact_event_measure(a, k, 0.01)) <= 3 * e.std_error);
    CHECK(e.target == 0.01);
  }
  const DynamicalSampler zero(a, MeasureModel::lebesgue_torus(), RadiusSchedule::table({}));
  CHECK(estimate_event_measure(zero, 3, 2000, 1).estimate == 0.0);
  CHECK_THROWS(estimate_event_measure(cat_sampler, 3, 999, 1));
}

TEST_CASE("event measure on the x3 map matches the exact union of intervals") {
  const auto map = IntervalMap::linear(3);
  const auto model = MeasureModel::lebesgue_interval();
  const DynamicalSampler s(map, model, RadiusSchedule::constant(0.1));
  const auto e = estimate_event_measure(s, 1, 200000, 3, 2);
  const double exact = interval_event_measure(map, model, 1, 0.1);
  // near 0 and 1 the ball is truncated: 3x < 0.1 on each side, plus |2x - 1| < 0.05
  CHECK(exact == doctest::Approx(7.0 / 60).epsilon(1e-12));
  CHECK(std::fabs(e.estimate - exact) <= 3 * e.std_error);
}

TEST_CASE("standard error halves when samples quadruple") {
  const auto a = estimate_event_measure(cat_sampler, 4, 40000, 1, 2);
  const auto b = estimate_event_measure(cat_sampler, 4, 160000, 1, 2);
  CHECK(b.std_error / a.std_error == doctest::Approx(0.5).epsilon(0.3));
  // doubling: ratio 1/sqrt(2)
  const auto c = estimate_event_measure(cat_sampler, 4, 80000, 1, 2);
  CHECK(c.std_error / a.std_error == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.3));
}

TEST_CASE("estimates do not depend on the thread count") {
  const auto a = estimate_event_measure(cat_sampler, 6, 20000, 42, 1);
  const auto b = estimate_event_measure(cat_sampler, 6, 20000, 42, 8);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  const auto p1 = estimate_pair_joint(cat_sampler, 3, 4, 20000, 42, 0.25, {}, 1);
  const auto p8 = estimate_pair_joint(cat_sampler, 3, 4, 20000, 42, 0.25, {}, 8);
  CHECK(p1.joint == p8.joint);
  CHECK(p1.marginal_kl == p8.marginal_kl);
  const auto v1 = estimate_block_variance(cat_sampler, 10, 200, 5000, 42, 1);
  const auto v3 = estimate_block_variance(cat_sampler, 10, 200, 5000, 42, 3);
  CHECK(v1.variance == v3.variance);
}

TEST_CASE("regimes partition the (k, l) plane") {
  for (std::uint64_t k = 1; k <= 200; k += 7)
    for (std::uint64_t l = 1; l <= 400; l += 3) {
      const double lk = std::log(static_cast<double>(k));
      const Regime expected = l <= lk * lk ? Regime::small_l : (k <= 0.25 * l ? Regime::large_l : Regime::mid_l);
      CHECK(classify_regime(k, l, 0.25) == expected);
    }
  CHECK(to_string(Regime::mid_l) == "mid-l");
}

TEST_CASE("pair estimates for independent events") {
  const oracle::IndependentSampler iid([](std::uint64_t) { return 0.1; });
  const auto p = estimate_pair_joint(iid, 10, 20, 200000, 9, 0.25, {}, 2);
  CHECK(std::fabs(p.joint - 0.01) <= 3 * p.joint_std_error);
  CHECK(p.product == doctest::Approx(p.marginal_k * p.marginal_kl));
  CHECK(p.bound_mixing >= p.product);
  const oracle::IndependentSampler none([](std::uint64_t) { return 0.0; });
  CHECK(estimate_pair_joint(none, 5, 5, 1000, 1, 0.25, {}).joint == 0.0);
}

TEST_CASE("block variance for independent events") {
  const oracle::IndependentSampler iid([](std::uint64_t k) { return 0.05 + 0.1 / static_cast<double>(k); });
  const auto v = estimate_block_variance(iid, 1, 100, 20000, 5, 2);
  // independence: Var = sum M_k (1 - M_k) < sum M_k
  double var = 0, sum = 0;
  for (int k = 1; k <= 100; ++k) {
    const double m = 0.05 + 0.1 / k;
    var += m * (1 - m);
    sum += m;
  }
  CHECK(v.mass_sum == doctest::Approx(sum));
  REQUIRE(v.ratio);
  CHECK(*v.ratio <= 1 + 3 * v.ratio_std_error);
  CHECK(*v.ratio == doctest::Approx(var / sum).epsilon(0.05));
  const oracle::IndependentSampler none([](std::uint64_t) { return 0.0; });
  CHECK_FALSE(estimate_block_variance(none, 1, 10, 1000, 1).ratio.has_value());
}

TEST_CASE("exponential decay fits") {
  std::vector<DecayPoint> pts;
  for (int s = 1; s <= 10; ++s) pts.push_back({static_cast<double>(s), 2 * std::exp(-0.5 * s)});
  const auto f = fit_exponential_decay(pts);
  REQUIRE(f.status == DecayStatus::fitted);
  CHECK(*f.rate == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(f.constant == doctest::Approx(2.0).epsilon(1e-6));
  std::vector<DecayPoint> flat;
  for (int s = 1; s <= 10; ++s) flat.push_back({static_cast<double>(s), 0.3});
  CHECK(fit_exponential_decay(flat).status == DecayStatus::failed);
  std::vector<DecayPoint> growing;
  for (int s = 1; s <= 10; ++s) growing.push_back({static_cast<double>(s), std::exp(0.2 * s)});
  CHECK_FALSE(fit_exponential_decay(growing).success());
  std::vector<DecayPoint> tiny;
  for (int s = 1; s <= 10; ++s) tiny.push_back({static_cast<double>(s), 1e-15});
  CHECK(fit_exponential_decay(tiny, 1e-12).status == DecayStatus::below_floor);
}
