#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlab/numeric.hpp"
#include "rlab/partition.hpp"
#include "rlab/rng.hpp"

using namespace rlab;

namespace {

const DensityGrid& spiked() {
  static const DensityGrid d = DensityGrid::spiked(64, 40, 40, 0.5, 0.3, 0.3, 0.08);
  return d;
}

const DensityGrid& spike_on_uniform() {
  static const DensityGrid d = DensityGrid::spiked(64, 40, 40, 0.5, 0, 0, 0);
  return d;
}

// mass of a rectangle by visiting every base cell
double naive_mass(const DensityGrid& d, double x0, double x1, double y0, double y1) {
  const int r = d.resolution();
  double s = 0;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      const double ox = std::max(0.0, std::min(x1, (i + 1.0) / r) - std::max(x0, static_cast<double>(i) / r));
      const double oy = std::max(0.0, std::min(y1, (j + 1.0) / r) - std::max(y0, static_cast<double>(j) / r));
      s += d.cell_mass(i, j) * ox * oy * r * r;
    }
  return s;
}

}  // namespace

TEST_CASE("density grids") {
  const auto& d = spiked();
  double total = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) total += d.cell_mass(i, j);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.cell_mass(40, 40) >= 0.5);
  SampleRng rng(1);
  for (int t = 0; t < 200; ++t) {
    double x0 = rng.uniform(), x1 = rng.uniform(), y0 = rng.uniform(), y1 = rng.uniform();
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    CHECK(d.rectangle_mass(x0, x1, y0, y1) == doctest::Approx(naive_mass(d, x0, x1, y0, y1)).epsilon(1e-12).scale(1));
    CHECK(d.column_mass(x0, x1) == doctest::Approx(naive_mass(d, x0, x1, 0, 1)).epsilon(1e-12).scale(1));
  }
  CHECK_THROWS_AS(DensityGrid::from_masses(2, {0.5, 0.5, 0.5, 0.5}), std::invalid_argument);
  CHECK(DensityGrid::uniform().is_uniform());
  CHECK_FALSE(d.is_uniform());
}

TEST_CASE("separable integrals of affine profiles") {
  const Profile f{{0.1, 0.3, 0.6}, [](double x) { return x < 0.3 ? (x - 0.1) / 0.2 : 1.0; }};
  const Profile g{{0.0, 0.5, 1.0}, [](double y) { return y < 0.5 ? 2 * y : 2 - 2 * y; }};
  CHECK(f.integral(0, 1) == doctest::Approx(0.1 + 0.3));
  const auto& d = spiked();
  // midpoint quadrature on a grid aligned with the base cells and breaks
  const int q = 64 * 40;
  double s = 0;
  for (int i = 0; i < q; ++i) {
    const double x = (i + 0.5) / q;
    const double fx = x < 0.1 || x > 0.6 ? 0.0 : f.value(x);
    if (fx == 0) continue;
    for (int j = 0; j < q; ++j) {
      const double y = (j + 0.5) / q;
      s += fx * g.value(y) * d.cell_mass(i * 64 / q, j * 64 / q) * 64 * 64 / (double(q) * q);
    }
  }
  CHECK(d.integrate(f, g) == doctest::Approx(s).epsilon(1e-9));
}

TEST_CASE("uniform partition at kappa 0.5, n 4") {
  const auto p = build_partition(DensityGrid::uniform(), 0.5, 4);
  CHECK(p.big_theta == 7);
  CHECK(p.small_theta == 2980);
  CHECK(p.kept_count == 49);
  CHECK(p.carved_mass == 0.0);
  for (const auto& c : p.cells) CHECK(c.mass > std::exp(-6.0));
}

TEST_CASE("a single block covers the square") {
  const auto p = build_partition(spiked(), 0.1, 1);
  REQUIRE(p.big_theta == 1);
  REQUIRE(p.cells.size() == 1);
  CHECK(p.cells[0].x0 == 0.0);
  CHECK(p.cells[0].x1 == 1.0);
  CHECK(p.cells[0].mass == doctest::Approx(1.0));
  const auto rep = verify_partition(p, spiked());
  CHECK(rep.ok());
  CHECK(p.psi(p.cells[0], 0.999, 0.001) == 1.0);
}

TEST_CASE("spiked density carves light cells") {
  const auto& d = spiked();
  const auto p = build_partition(d, 0.4, 6);
  const double thr = std::exp(-3 * 0.4 * 6);
  const auto& spike = p.cells[p.cell_index_at(40.5 / 64, 40.5 / 64)];
  CHECK(spike.kept);
  CHECK(spike.mass >= 0.5);
  std::size_t carved = 0;
  double carved_mass = 0;
  for (const auto& c : p.cells) {
    CHECK(c.kept == (c.mass >= thr));
    if (!c.kept) {
      ++carved;
      carved_mass += c.mass;
    }
  }
  CHECK(carved > 0);
  CHECK(carved_mass == doctest::Approx(p.carved_mass));
  CHECK(carved_mass <= std::exp(-0.4 * 6));
}

TEST_CASE("selected strips are light and the cells tile the square") {
  for (const DensityGrid* d : {&spiked(), static_cast<const DensityGrid*>(nullptr)}) {
    const DensityGrid dens = d ? *d : DensityGrid::strip(64, 0.5);
    for (unsigned n = 4; n <= 7; ++n) {
      const auto p = build_partition(dens, 0.4, n);
      const double f = static_cast<double>(p.fine);
      for (std::size_t s = 1; s < p.cols.size() - 1; ++s) {
        CHECK(p.cols[s] > (s - 1) * p.small_theta);
        CHECK(p.cols[s] <= s * p.small_theta);
        CHECK(dens.column_mass((p.cols[s] - 1) / f, p.cols[s] / f) <= 1.0 / p.small_theta * (1 + 1e-9));
        CHECK(dens.row_mass((p.rows[s] - 1) / f, p.rows[s] / f) <= 1.0 / p.small_theta * (1 + 1e-9));
      }
      CompensatedSum total;
      for (const auto& c : p.cells) total.add(c.mass);
      CHECK(std::fabs(total.value() - 1.0) <= 1e-8);
      CHECK(p.carved_mass <= std::exp(-0.4 * n));
    }
  }
}

TEST_CASE("bump sandwich and disjoint supports") {
  const auto p = build_partition(spiked(), 0.4, 4);
  const double f = static_cast<double>(p.fine);
  SampleRng rng(3);
  for (int t = 0; t < 20000; ++t) {
    // half the points near grid lines where the ramps live
    double x = rng.uniform(), y = rng.uniform();
    if (t % 2) {
      const auto s = 1 + rng() % (p.big_theta - 1 ? p.big_theta - 1 : 1);
      x = (static_cast<double>(p.cols[s]) + 2 * rng.uniform() - 1.5) / f;
    }
    int positive = 0;
    for (const auto& c : p.cells) {
      const double v = p.psi(c, x, y);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      const bool in_q = x >= c.x0 && x <= c.x1 - (c.k == static_cast<int>(p.big_theta) ? 0 : 1 / f) && y >= c.y0 &&
                        y <= c.y1 - (c.l == static_cast<int>(p.big_theta) ? 0 : 1 / f);
      const bool in_r = x >= c.x0 - (c.k == 1 ? 0 : 0.5 / f) && x <= c.x1 - (c.k == static_cast<int>(p.big_theta) ? 0 : 0.5 / f) &&
                        y >= c.y0 - (c.l == 1 ? 0 : 0.5 / f) && y <= c.y1 - (c.l == static_cast<int>(p.big_theta) ? 0 : 0.5 / f);
      if (in_q) CHECK(v == 1.0);
      if (!in_r) CHECK(v == 0.0);
      if (v > 0) ++positive;
    }
    CHECK(positive <= 1);
    const auto idx = p.support_at(x, y);
    CHECK(idx.has_value() == (positive == 1));
  }
}

TEST_CASE("verification at kappa 0.4") {
  for (const DensityGrid* d : {&spike_on_uniform(), static_cast<const DensityGrid*>(nullptr)}) {
    const DensityGrid dens = d ? *d : DensityGrid::uniform();
    std::vector<PartitionReport> reps;
    for (unsigned n = 4; n <= 7; ++n) {
      reps.push_back(verify_partition(build_partition(dens, 0.4, n), dens, 2));
      const auto& r = reps.back();
      CHECK(r.count_ok);
      CHECK(r.carve_ok);
      CHECK(r.balance_ok);
      CHECK(r.strips_ok);
      CHECK(r.s0_ok);
      CHECK(r.mass_balance <= 1e-8);
    }
    const auto drift = check_drift(reps);
    CHECK_MESSAGE(drift.ok, drift.message);
  }
}

TEST_CASE("Gaussian background: sup constant stays under the S0 bound") {
  // S0 keeps every cell with mass >= e^{-3 kappa n}, so sup rho e^{-3 kappa n} <= 1
  std::vector<PartitionReport> reps;
  for (unsigned n = 4; n <= 9; ++n) {
    reps.push_back(verify_partition(build_partition(spiked(), 0.4, n), spiked(), 2));
    const auto& r = reps.back();
    MESSAGE("n=", n, " sup constant ", r.sup_rho_const);
    CHECK(r.ok());
    CHECK(r.sup_rho_const <= 1.0 + 1e-12);
  }
  MESSAGE("drift: ", check_drift(reps).message);
}

TEST_CASE("spike on a uniform background") {
  const auto& d = spike_on_uniform();
  CHECK(d.cell_mass(40, 40) == doctest::Approx(0.5 + 0.5 / 4096));
  CHECK(d.cell_mass(0, 63) == doctest::Approx(0.5 / 4096));
}

TEST_CASE("drift detection") {
  PartitionReport a, b;
  for (auto* r : {&a, &b}) {
    r->count_ok = r->carve_ok = r->balance_ok = r->strips_ok = r->s0_ok = true;
    r->diam_const = r->sup_rho_const = r->lip_rho_const = r->l1_const = 1.0;
  }
  const std::vector<PartitionReport> ok{a, b};
  CHECK(check_drift(ok).ok);
  b.l1_const = 2.5;
  const std::vector<PartitionReport> bad{a, b};
  CHECK_FALSE(check_drift(bad).ok);
}

TEST_CASE("guards") {
  CHECK_THROWS_AS(build_partition(DensityGrid::uniform(), 1.5, 7), std::invalid_argument);
  CHECK_THROWS_AS(build_partition(DensityGrid::uniform(), 1.0, 8), std::length_error);
  CHECK_THROWS_AS(build_partition(DensityGrid::uniform(), 0.75, 10), std::invalid_argument);
}

TEST_CASE("test functions") {
  CHECK(lipschitz_norm(TestFunction::constant) == 1.0);
  CHECK(lipschitz_norm(TestFunction::first_coordinate) == 2.0);
  CHECK(lipschitz_norm(TestFunction::bump_product) == doctest::Approx(1 + 4 * std::sqrt(2.0)));
  // sampled difference quotients stay below the Lipschitz part of the norm
  SampleRng rng(9);
  for (auto f : {TestFunction::first_coordinate, TestFunction::bump_product}) {
    const double lip = lipschitz_norm(f) - 1.0;
    for (int t = 0; t < 20000; ++t) {
      std::array<double, 2> x{rng.uniform(), rng.uniform()}, y{rng.uniform(), rng.uniform()},
          z{rng.uniform(), rng.uniform()};
      auto x2 = x, y2 = y, z2 = z;
      const double e = 1e-3;
      x2[0] = std::clamp(x[0] + e * (rng.uniform() - 0.5), 0.0, 0.999999);
      y2[1] = std::clamp(y[1] + e * (rng.uniform() - 0.5), 0.0, 0.999999);
      z2[0] = std::clamp(z[0] + e * (rng.uniform() - 0.5), 0.0, 0.999999);
      const double dist = std::fabs(x2[0] - x[0]) + std::fabs(y2[1] - y[1]) + std::fabs(z2[0] - z[0]);
      if (dist == 0) continue;
      CHECK(std::fabs(evaluate(f, x2, y2, z2) - evaluate(f, x, y, z)) <= lip * dist * (1 + 1e-9));
      CHECK(std::fabs(evaluate(f, x, y, z)) <= 1.0);
    }
  }
}

TEST_CASE("localized integrals") {
  const auto a = TorusAutomorphism::cat_map();
  const auto dens = DensityGrid::uniform();
  for (unsigned n = 4; n <= 6; ++n) {
    const auto p = build_partition(dens, 0.4, n);
    const auto rep = verify_partition(p, dens, 2);
    for (auto f : {TestFunction::constant, TestFunction::first_coordinate, TestFunction::bump_product}) {
      const auto r = localized_integral(p, rep, f, a, 5, 5, 100000, 11, 2);
      CHECK_MESSAGE(r.bounded, "n=", n, " ", to_string(f), " ratio ", r.ratio, " bound ", r.bound);
      if (f == TestFunction::constant) {
        CHECK(r.lhs == 1.0);
        CHECK(std::fabs(r.difference) <= (rep.carve_const + rep.l1_const) * std::exp(-0.4 * n) + 3 * r.difference_std_error);
      }
    }
  }
  const auto spk = build_partition(spiked(), 0.4, 4);
  CHECK_THROWS(localized_integral(spk, verify_partition(spk, spiked()), TestFunction::constant, a, 5, 5, 1000, 1));
}
