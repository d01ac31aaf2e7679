#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlab/systems.hpp"

namespace rlab {

// Function that is affine between consecutive breaks and zero outside
// [breaks.front(), breaks.back()]. Jumps may sit on breaks.
struct Profile {
  std::vector<double> breaks;
  std::function<double(double)> value;

  // exact: midpoint rule on every affine piece
  double integral(double lo, double hi) const;
};

// Probability measure on [0,1]^2 with constant density on each cell of an
// R x R base grid. Masses of arbitrary rectangles are exact.
class DensityGrid {
 public:
  static DensityGrid uniform();
  // masses[i * R + j] for the cell [i/R,(i+1)/R] x [j/R,(j+1)/R]. Throws
  // std::invalid_argument unless nonnegative and summing to 1 within 1e-8.
  static DensityGrid from_masses(int resolution, std::vector<double> masses, std::string name = "grid");
  // spike_mass on one base cell, the rest a Gaussian bump discretized on
  // the base grid, or uniform when sigma == 0
  static DensityGrid spiked(int resolution, int spike_i, int spike_j, double spike_mass, double center_x,
                            double center_y, double sigma);
  // half the mass on a thin vertical strip around x = strip_x, the rest
  // uniform
  static DensityGrid strip(int resolution, double strip_x);

  int resolution() const { return r_; }
  double cell_mass(int i, int j) const { return masses_[static_cast<std::size_t>(i) * static_cast<std::size_t>(r_) + static_cast<std::size_t>(j)]; }
  bool is_uniform() const;
  const std::string& name() const { return name_; }

  double column_mass(double x0, double x1) const;  // mu([x0,x1] x [0,1])
  double row_mass(double y0, double y1) const;     // mu([0,1] x [y0,y1])
  double rectangle_mass(double x0, double x1, double y0, double y1) const;
  // int f(x) g(y) dmu
  double integrate(const Profile& f, const Profile& g) const;
  // int x dmu and int y dmu over a rectangle
  std::array<double, 2> rectangle_moment(double x0, double x1, double y0, double y1) const;

 private:
  int r_ = 1;
  std::vector<double> masses_;
  std::vector<double> col_, row_;  // marginal masses of base columns and rows
  std::string name_;
};

struct PartitionCell {
  int k = 0, l = 0;  // 1-based block indices
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double mass = 0.0;
  bool kept = false;
  double anchor_x = 0.0, anchor_y = 0.0;
};

// Partition of [0,1]^2 minus Y_n from sparse columns i_s and rows j_s of the
// (Theta theta)^2 grid, with bump densities psi_{k,l} = a_k(x) b_l(y).
struct PartitionCL {
  double kappa = 0.0;
  unsigned n = 0;
  std::uint64_t big_theta = 1;    // floor(e^{kappa n})
  std::uint64_t small_theta = 1;  // floor(e^{4 kappa n})
  std::uint64_t fine = 1;         // Theta theta grid lines per axis
  std::vector<std::uint64_t> cols, rows;  // i_0 = 0, ..., i_Theta = fine
  std::vector<PartitionCell> cells;       // (k, l) in row-major order of k
  double carved_mass = 0.0;
  std::size_t kept_count = 0;
  bool uniform_density = false;
  std::string density_name;

  const PartitionCell& cell(int k, int l) const;
  // one-dimensional ramps: 1 on Q, 0 off R, slope 2 fine on half columns
  double ramp_x(int k, double x) const;
  double ramp_y(int l, double y) const;
  // breaks of the ramp: 0 before the first, 1 between the middle two, 0 after
  std::array<double, 4> ramp_breaks(const std::vector<std::uint64_t>& lines, int k) const;
  double psi(const PartitionCell& c, double x, double y) const;
  // the cell P containing (x, y)
  std::size_t cell_index_at(double x, double y) const;
  // the cell whose bump is positive at (x, y), if any
  std::optional<std::size_t> support_at(double x, double y) const;
};

// Throws std::invalid_argument for kappa n > 10 or a fine grid beyond 2^53
// lines, std::length_error for more than 2048 blocks per axis, and
// std::runtime_error if a block has no sparse column.
PartitionCL build_partition(const DensityGrid& density, double kappa, unsigned n);

struct PartitionReport {
  unsigned n = 0;
  double kappa = 0.0;
  std::size_t num_cells = 0;
  double max_diam = 0.0;
  double carved_mass = 0.0;
  double count_const = 0.0;    // #P / e^{2 kappa n}
  double diam_const = 0.0;     // max diam e^{kappa n}
  double carve_const = 0.0;    // mu(Y_n) e^{kappa n}
  double sup_rho_const = 0.0;  // max sup rho / e^{3 kappa n}
  double lip_rho_const = 0.0;  // max Lip rho / e^{8 kappa n}
  double l1_const = 0.0;       // max ||rho - 1_P / mu(P)||_1 e^{kappa n}
  double mass_balance = 0.0;   // |sum mu(P) + mu(Y) - 1|
  bool count_ok = false;
  bool carve_ok = false;
  bool balance_ok = false;
  bool strips_ok = false;  // selected strips carry mass <= 1/theta
  bool s0_ok = false;      // kept cells have mass >= e^{-3 kappa n}
  bool ok() const { return count_ok && carve_ok && balance_ok && strips_ok && s0_ok; }
};

PartitionReport verify_partition(const PartitionCL& p, const DensityGrid& density, unsigned threads = 0);

struct DriftCheck {
  bool ok = true;
  std::string message;
};

// Reports for consecutive n: every report ok and the diam, sup, Lip and L1
// constants grow by at most a factor 2 from one n to the next.
DriftCheck check_drift(std::span<const PartitionReport> reports);

enum class TestFunction { constant, first_coordinate, bump_product };
std::string to_string(TestFunction f);
// h(x, y, z) for points of [0,1)^2
double evaluate(TestFunction f, const std::array<double, 2>& x, const std::array<double, 2>& y,
                const std::array<double, 2>& z);
// sup norm plus Lipschitz constant for the sum metric on X^3
double lipschitz_norm(TestFunction f);

struct LocalizedReport {
  unsigned n = 0;
  TestFunction function = TestFunction::constant;
  std::size_t samples = 0;
  double lhs = 0.0;  // int h(x, T^k x, T^{k+l} x) dmu
  double rhs = 0.0;  // sum_P mu(P) int rho_P(x) h(x_P, T^k x, T^{k+l} x) dmu
  double difference = 0.0;
  double difference_std_error = 0.0;
  double ratio = 0.0;  // |difference| / (||h||_Lip e^{-kappa n})
  double ratio_std_error = 0.0;
  double bound = 0.0;  // carve + diam + L1 constants
  bool bounded = false;
};

// Monte Carlo for Lebesgue measure on the torus; needs a partition built
// from a uniform density.
LocalizedReport localized_integral(const PartitionCL& p, const PartitionReport& verified, TestFunction h,
                                   const TorusAutomorphism& a, unsigned k, unsigned l, std::size_t samples,
                                   std::uint64_t seed, unsigned threads = 0);

}  // namespace rlab
