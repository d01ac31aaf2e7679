#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "rlab/measures.hpp"
#include "rlab/numeric.hpp"
#include "rlab/rng.hpp"

using namespace rlab;

namespace {

const IntervalMap x3 = IntervalMap::linear(3);

const MeasureModel& bernoulli_model() {
  static const MeasureModel m = build_gibbs(x3, PotentialSpec::bernoulli({0.5, 0.3, 0.2}), 16);
  return m;
}

const MeasureModel& perturbed_model() {
  static const MeasureModel m = [] {
    const auto map = IntervalMap::perturbed(5, 0.1);
    return build_gibbs(map, PotentialSpec::geometric(map), 12);
  }();
  return m;
}

}  // namespace

TEST_CASE("ball mass and radius for Lebesgue") {
  const auto li = MeasureModel::lebesgue_interval();
  CHECK(ball_mass(li, 0.5, 0.05) == doctest::Approx(0.1));
  CHECK(ball_mass(li, 0.0, 0.1) == doctest::Approx(0.1));
  CHECK(radius_for_mass(li, 0.5, 0.1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(radius_for_mass(li, 0.0, 0.1) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(radius_for_mass(li, 0.3, 0.0) == 0.0);
  const auto lt = MeasureModel::lebesgue_torus();
  const TorusPoint o = TorusPoint::from_double(0.2, 0.7);
  CHECK(ball_mass(lt, o, 0.056419) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(std::fabs(ball_mass(lt, o, 0.056419) - 0.01) < 1e-6);
  CHECK(radius_for_mass(lt, o, 0.01) == doctest::Approx(std::sqrt(0.01 / M_PI)).epsilon(1e-9));
  CHECK(torus_disk_area(0.3) == doctest::Approx(M_PI * 0.09));
  CHECK(torus_disk_area(1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(radius_for_mass(li, 0.5, 1.5), std::domain_error);
}

TEST_CASE("radius matches the closed form on [0,1]") {
  const auto li = MeasureModel::lebesgue_interval();
  SampleRng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(), m = 0.5 * rng.uniform();
    CHECK(radius_for_mass(li, x, m) == doctest::Approx(oracle::interval_radius(x, m)).epsilon(1e-9).scale(1));
  }
}

TEST_CASE("radius is the generalized inverse and 1-Lipschitz") {
  for (const MeasureModel* model : {&bernoulli_model(), &perturbed_model()}) {
    SampleRng rng(17);
    for (int i = 0; i < 500; ++i) {
      const double x = rng.uniform(), y = rng.uniform(), m = 0.3 * rng.uniform();
      const double r = radius_for_mass(*model, x, m);
      CHECK(ball_mass(*model, x, r) >= m - 1e-9);
      if (r > 2e-9) CHECK(ball_mass(*model, x, r - 2e-9) < m);
      CHECK(std::fabs(r - radius_for_mass(*model, y, m)) <= std::fabs(x - y) + 1e-8);
      const double y2 = std::clamp(x + 1e-3 * (rng.uniform() - 0.5), 0.0, 1.0);
      CHECK(std::fabs(r - radius_for_mass(*model, y2, m)) <= std::fabs(x - y2) + 1e-8);
    }
  }
}

TEST_CASE("radius sweep equals bisection") {
  const auto& model = perturbed_model();
  RadiusSweep sweep(model, 0.37);
  double m = 0.2;
  for (int k = 0; k < 100; ++k) {
    m *= 0.97;
    CHECK(sweep.next(m) == doctest::Approx(radius_for_mass(model, 0.37, m)).epsilon(1e-9).scale(1));
  }
  CHECK_THROWS_AS(sweep.next(0.5), std::logic_error);
}

TEST_CASE("constant potential on the x3 map gives Lebesgue") {
  const auto m = build_gibbs(x3, PotentialSpec::constant(-std::log(3.0)), 12);
  for (int i = 0; i <= 100; ++i) CHECK(std::fabs(m.cdf(i / 100.0) - i / 100.0) < 1e-10);
  CHECK(m.diagnostics().normalized_eigenvalue == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Bernoulli product measure") {
  const auto& m = bernoulli_model();
  CHECK(std::fabs(cylinder_measure(m, x3, CylinderWord{{0}}) - 0.5) <= m.tolerance());
  CHECK(std::fabs(cylinder_measure(m, x3, CylinderWord{{0, 1}}) - 0.15) <= m.tolerance());
  CHECK(std::fabs(cylinder_measure(m, x3, CylinderWord{{2, 2}}) - 0.04) <= m.tolerance());
  CHECK(cylinder_measure(m, x3, CylinderWord{}) == doctest::Approx(1.0));
  const double p[3] = {0.5, 0.3, 0.2};
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto masses = level_masses(m, x3, k);
    for (std::uint64_t i = 0; i < masses.size(); ++i) {
      double prod = 1;
      for (int d : word_from_index(i, 3, k).digits) prod *= p[d];
      CHECK(std::fabs(masses[i] - prod) <= m.tolerance());
    }
  }
  // the true ratio is 1; each table mass may be off by tau
  const double tau = m.tolerance();
  double envelope = 1;
  for (std::size_t lw = 1; lw < 3; ++lw)
    for (std::uint64_t a = 0; a < static_cast<std::uint64_t>(std::pow(3, lw)); ++a)
      for (std::size_t lv = 1; lw + lv <= 3; ++lv)
        for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(std::pow(3, lv)); ++b) {
          double pw = 1, pv = 1;
          for (int d : word_from_index(a, 3, lw).digits) pw *= p[d];
          for (int d : word_from_index(b, 3, lv).digits) pv *= p[d];
          envelope = std::max({envelope, (pw * pv + tau) / ((pw - tau) * (pv - tau)),
                               (pw + tau) * (pv + tau) / (pw * pv - tau)});
        }
  const auto qb = quasi_bernoulli_probe(m, x3, 3);
  MESSAGE("Bernoulli quasi-Bernoulli constant ", qb.constant, " envelope ", envelope);
  CHECK(qb.constant >= 1.0);
  CHECK(qb.constant <= envelope);
  const auto cd = cylinder_decay(m, x3, 8);
  CHECK(cd.ok);
  CHECK(cd.lambda == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("Lebesgue cylinder masses") {
  const auto li = MeasureModel::lebesgue_interval();
  CHECK(cylinder_measure(li, x3, CylinderWord{{0, 2}}) == doctest::Approx(1.0 / 9));
  CHECK(cylinder_measure(li, x3, CylinderWord{}) == 1.0);
  const auto cd = cylinder_decay(li, x3, 8);
  CHECK(cd.lambda == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(quasi_bernoulli_probe(li, x3, 6).constant == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("perturbed map, geometric potential") {
  const auto& m = perturbed_model();
  const auto map = IntervalMap::perturbed(5, 0.1);
  CHECK(std::fabs(m.diagnostics().normalized_eigenvalue - 1.0) <= 1e-8);
  CHECK(m.error_bound() >= 0.0);
  CHECK(m.cdf(0.0) == 0.0);
  CHECK(m.cdf(1.0) == doctest::Approx(1.0).epsilon(1e-12));
  // absolutely continuous with density bounded away from 0 and infinity
  CHECK(m.diagnostics().h_min > 0.2);
  CHECK(m.diagnostics().h_max < 5.0);
  for (std::size_t k = 1; k <= 5; ++k) {
    CompensatedSum s;
    for (double v : level_masses(m, map, k)) s.add(v);
    CHECK(std::fabs(s.value() - 1.0) <= std::pow(5.0, k) * 2 * m.error_bound() + 1e-12);
  }
  // invariance: mu(T^-1 [0, t]) = mu([0, t])
  for (double t : {0.1, 0.33, 0.5, 0.8}) {
    double pre = 0;
    for (int j = 0; j < 5; ++j) {
      const double a = map.inverse_branch(j, 0.0), b = map.inverse_branch(j, t);
      pre += m.cdf(std::max(a, b)) - m.cdf(std::min(a, b));
    }
    CHECK(pre == doctest::Approx(m.cdf(t)).epsilon(1e-3));
  }
}

TEST_CASE("Gibbs tables survive a save and load") {
  const auto& m = perturbed_model();
  const auto path = std::filesystem::temp_directory_path() / "rlab_gibbs_roundtrip.bin";
  save_gibbs(m, path);
  const auto back = load_gibbs(path);
  std::filesystem::remove(path);
  CHECK(back.grid_level() == m.grid_level());
  CHECK(back.map_name() == m.map_name());
  CHECK(back.potential_name() == m.potential_name());
  REQUIRE(back.cdf_table().size() == m.cdf_table().size());
  for (std::size_t i = 0; i < m.cdf_table().size(); ++i) CHECK(back.cdf_table()[i] == m.cdf_table()[i]);
  CHECK(back.error_bound() == m.error_bound());
}

TEST_CASE("regularity exponents") {
  const auto t = regularity_probe(MeasureModel::lebesgue_torus(), 2000, 3, 2);
  CHECK(t.frostman_s == doctest::Approx(2.0).epsilon(0.1));
  CHECK(t.annuli_alpha == doctest::Approx(1.0).epsilon(0.1));
  const auto i = regularity_probe(MeasureModel::lebesgue_interval(), 2000, 3, 2);
  CHECK(i.frostman_s == doctest::Approx(1.0).epsilon(0.1));
  CHECK(i.annuli_alpha == doctest::Approx(1.0).epsilon(0.1));
  CHECK(i.frostman_ok);
  const auto b = regularity_probe(bernoulli_model(), 2000, 3, 2);
  MESSAGE("Bernoulli(0.5,0.3,0.2) Frostman exponent ", b.frostman_s);
  CHECK(b.frostman_s > 0.0);
}
