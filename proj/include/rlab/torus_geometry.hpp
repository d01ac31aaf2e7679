#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rlab/recurrence.hpp"
#include "rlab/systems.hpp"

namespace rlab {

// Eigen-decomposition of A in extended precision: v = alpha e_u + beta e_s.
struct EigenFrame {
  long double lambda_u = 0, lambda_s = 0;
  std::array<long double, 2> e_u{}, e_s{};  // unit eigenvectors
  std::array<long double, 2> f_u{}, f_s{};  // dual rows: alpha = f_u . v
  long double sin_angle = 1;

  std::array<long double, 2> coords(long double vx, long double vy) const {
    return {f_u[0] * vx + f_u[1] * vy, f_s[0] * vx + f_s[1] * vy};
  }
};

EigenFrame eigen_frame(const TorusAutomorphism& a);

// The component of E_k around a k-periodic point: {p + v : |(A^k - I) v| < r}.
// The semi-axes are the extents along the eigen-directions.
struct EllipseSpec {
  RationalTorusPoint center;
  double semi_axis_stable = 0.0;    // r / |lambda_s^k - 1|
  double semi_axis_unstable = 0.0;  // r / |lambda_u^k - 1|
  std::array<double, 2> dir_stable{};
  std::array<double, 2> dir_unstable{};
};

struct EllipseSet {
  unsigned k = 0;
  double mass = 0.0;
  double radius = 0.0;
  Mat2 b{};  // A^k - I
  std::vector<EllipseSpec> ellipses;
  bool overlap = false;
  double ellipse_area = 0.0;  // pi r^2 / |det(A^k - I)|
  double c_stable = 0.0;      // semi_axis_stable / r
  double c_unstable = 0.0;    // semi_axis_unstable / (lambda^-k r)
};

class OverlapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// True when two translates of {v : |B v| < r} around points of
// B^{-1}Z^2 mod 1 intersect (including a component meeting itself).
bool ellipses_overlap(const Mat2& b, double r);

EllipseSet enumerate_ellipses(const TorusAutomorphism& a, unsigned k, double mass);

// m(E_k) = pi r^2, cross-checked against count * single area. Throws
// OverlapError when the components intersect (use Monte Carlo instead).
double exact_event_measure(const TorusAutomorphism& a, unsigned k, double mass);

// A^k - I reduced mod 2^64; exact as a map of the fixed-point torus for
// every k.
Mat2 power_minus_identity_mod(const TorusAutomorphism& a, unsigned k);

// x in E_k by the defining inequality |(A^k - I) x mod 1| < r.
bool in_event_set(const Mat2& power_minus_identity, double r, TorusPoint x);

// Bucket grid over ellipse centres for membership queries.
class EllipseIndex {
 public:
  explicit EllipseIndex(const EllipseSet& set);
  // index of an ellipse containing x, if any
  std::optional<std::size_t> find(TorusPoint x) const;

 private:
  const EllipseSet* set_;
  int grid_ = 1;
  int reach_x_ = 1;
  int reach_y_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;
};

// Rectangles with stable side rho and unstable side c lambda^-l / rho around
// the distinct l-periodic points are pairwise disjoint.
bool rectangles_disjoint(const TorusAutomorphism& a, unsigned l, double rho, double c);

// Largest c for which rectangles_disjoint holds; +infinity when there is
// only one periodic point.
double separation_constant(const TorusAutomorphism& a, unsigned l, double rho);

struct SeparationRow {
  unsigned l = 0;
  double rho = 0.0;
  double c_max = 0.0;
};

struct SeparationReport {
  std::vector<SeparationRow> rows;
  double c_a = 0.0;  // minimum over rows
};

SeparationReport separation_probe(const TorusAutomorphism& a, std::span<const unsigned> ls,
                                  std::span<const double> rhos);

enum class IntersectionMode { exact, monte_carlo };

struct IntersectionReport {
  unsigned k = 0, l = 0;
  IntersectionMode mode = IntersectionMode::exact;
  double m_k = 0.0, m_kl = 0.0;
  double intersection = 0.0;
  double std_error = 0.0;  // zero in exact mode
  std::size_t samples = 0;
  double lambda = 0.0;
  // m_k m_kl + lambda^-l sqrt(m_k m_kl); the bound is C times this
  double bound_unit = 0.0;
  double required_c = 0.0;
  bool covers_disjoint = true;  // rectangles within each level are disjoint
};

// Exact mode measures the intersection of the rectangle covers of E_k and
// E_{k+l} (requires k + l <= 12); Monte Carlo samples E_k and E_{k+l}.
IntersectionReport intersection_bound_check(const TorusAutomorphism& a, unsigned k, unsigned l,
                                            const RadiusSchedule& schedule, IntersectionMode mode,
                                            std::size_t samples = 0, std::uint64_t seed = 0, unsigned threads = 0);

}  // namespace rlab
