#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rlab {

// ---------------------------------------------------------------- torus

struct Mat2 {
  std::int64_t a = 1, b = 0, c = 0, d = 1;  // [[a, b], [c, d]]
  bool operator==(const Mat2&) const = default;
};

// Exact product; throws std::overflow_error when an entry leaves int64.
Mat2 checked_mul(const Mat2& p, const Mat2& q);

// Product of the matrices reduced mod 2^64 (two's complement wraparound).
Mat2 wrapping_mul(const Mat2& p, const Mat2& q);

// Torus coordinates as 64-bit fractions of 1: value = integer / 2^64.
struct TorusPoint {
  std::uint64_t x = 0;
  std::uint64_t y = 0;

  static TorusPoint from_double(double fx, double fy);
  double fx() const;
  double fy() const;
  auto operator<=>(const TorusPoint&) const = default;
};

// Point of the torus with rational coordinates (nx/den, ny/den), 0 <= n < den.
struct RationalTorusPoint {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t den = 1;

  double x() const { return static_cast<double>(nx) / static_cast<double>(den); }
  double y() const { return static_cast<double>(ny) / static_cast<double>(den); }
  // nearest fixed-point representation (floor of value * 2^64)
  TorusPoint to_fixed() const;
  auto operator<=>(const RationalTorusPoint&) const = default;
};

class TorusAutomorphism {
 public:
  // Throws std::invalid_argument unless |det| = 1 and no eigenvalue has
  // modulus one.
  explicit TorusAutomorphism(const Mat2& m);
  static TorusAutomorphism cat_map();

  const Mat2& matrix() const { return m_; }
  std::int64_t det() const { return m_.a * m_.d - m_.b * m_.c; }
  std::int64_t trace() const { return m_.a + m_.d; }

  // Signed eigenvalues with |unstable| > 1 > |stable|.
  long double unstable_eigenvalue() const { return lambda_u_; }
  long double stable_eigenvalue() const { return lambda_s_; }
  // Spectral radius |lambda_u|.
  double lambda() const { return static_cast<double>(lambda_u_ < 0 ? -lambda_u_ : lambda_u_); }

  // A^k with exact integers; throws std::overflow_error past int64.
  Mat2 power(unsigned k) const;
  TorusPoint step(TorusPoint p) const;

  std::string name() const;

 private:
  Mat2 m_;
  long double lambda_u_ = 0;
  long double lambda_s_ = 0;
};

// x -> M x mod 1 on the fixed-point grid; exact for any integer matrix.
TorusPoint apply_mod1(const Mat2& m, TorusPoint p);
TorusPoint step_torus(const TorusAutomorphism& a, TorusPoint p);

// Quotient Euclidean metric on R^2/Z^2.
double torus_distance(TorusPoint p, TorusPoint q);
double torus_distance_sq(TorusPoint p, TorusPoint q);

// Reductions of an integer 2x2 matrix: U * B * V = diag(d1, d2), d1 | d2,
// U and V unimodular, d1, d2 >= 0.
struct SmithForm {
  Mat2 u, s, v;
};
SmithForm smith_normal_form(const Mat2& b);

// Largest number of periodic points periodic_points_torus will materialize.
inline constexpr std::int64_t kMaxPeriodicPoints = std::int64_t{1} << 24;

// |det(A^k - I)|; throws std::overflow_error if A^k does not fit int64.
std::int64_t periodic_point_count(const TorusAutomorphism& a, unsigned k);

// All x in [0,1)^2 with A^k x = x mod 1, sorted lexicographically by (x, y).
// Throws std::overflow_error for k beyond int64 range and std::length_error
// when the count exceeds kMaxPeriodicPoints.
std::vector<RationalTorusPoint> periodic_points_torus(const TorusAutomorphism& a, unsigned k);

// Exact check of A^k p = p mod 1 in integer arithmetic.
bool is_periodic(const TorusAutomorphism& a, unsigned k, const RationalTorusPoint& p);

// ------------------------------------------------------------- interval

enum class IntervalMapKind { piecewise_linear_exact, smooth_float };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

struct CylinderWord {
  std::vector<int> digits;

  std::size_t level() const { return digits.size(); }
  // digits joined directly when every branch index is a single decimal
  // digit, dot separated otherwise
  std::string to_string() const;
  bool operator==(const CylinderWord&) const = default;
};

// Word with the given level whose digits are the base-m expansion of index,
// most significant digit first.
CylinderWord word_from_index(std::uint64_t index, int m, std::size_t level);

// Full-branch expanding map of [0,1], described by its inverse branches g_j.
class IntervalMap {
 public:
  // x -> m x mod 1, optionally with orientation-reversing branches
  // (T x = j + 1 - m x on branch j). Requires m >= 3.
  static IntervalMap linear(int branches, std::vector<bool> reversed = {});
  // g_j(y) = (j + y + a sin(pi y)) / m, checked to satisfy |T'| >= 3.
  static IntervalMap perturbed(int branches = 5, double amplitude = 0.1);

  IntervalMapKind kind() const { return kind_; }
  int branch_count() const { return m_; }
  bool reversed(int j) const { return reversed_[static_cast<std::size_t>(j)]; }
  bool any_reversed() const;
  double amplitude() const { return amplitude_; }

  double inverse_branch(int j, double y) const;
  // signed derivative g_j'(y)
  double inverse_derivative(int j, double y) const;
  // left endpoint of the branch domain C_j
  double branch_start(int j) const { return starts_[static_cast<std::size_t>(j)]; }
  // index j with x in [a_j, a_{j+1}); x = 1 belongs to the last branch
  int branch_of(double x) const;

  double step(double x) const;
  // exact step on 64-bit fractions; only for piecewise_linear_exact maps
  std::uint64_t step_fixed(std::uint64_t x) const;

  // bounds 3 <= |T'| <= D verified at construction
  double min_expansion() const { return min_expansion_; }
  double max_expansion() const { return max_expansion_; }

  std::string name() const;

 private:
  IntervalMap() = default;
  void validate();

  IntervalMapKind kind_ = IntervalMapKind::piecewise_linear_exact;
  int m_ = 0;
  double amplitude_ = 0.0;
  std::vector<bool> reversed_;
  std::vector<double> starts_;
  double min_expansion_ = 0.0;
  double max_expansion_ = 0.0;
};

double step_interval(const IntervalMap& map, double x);

// g_{w_1}(g_{w_2}(... g_{w_k}(u))) ; maps [0,1] onto the closure of C_w.
double compose_inverse(const IntervalMap& map, const CylinderWord& w, double u);

// Throws std::invalid_argument if a digit is outside [0, m).
void validate_word(const IntervalMap& map, const CylinderWord& w);

Interval cylinder_interval(const IntervalMap& map, const CylinderWord& w);

// Unique fixed point of T^k inside C_w.
double periodic_point_of_cylinder(const IntervalMap& map, const CylinderWord& w);

// ------------------------------------------------------------ variants

using System = std::variant<TorusAutomorphism, IntervalMap>;
// TorusPoint for torus systems, a coordinate in [0,1] for interval maps.
using Point = std::variant<TorusPoint, double>;

}  // namespace rlab
