#include "rlab/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

namespace rlab {

namespace {

using i128 = __int128;
using u128 = unsigned __int128;

std::int64_t narrow(i128 v, const char* what) {
  if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
    throw std::overflow_error(fmt::format("{}: integer overflow", what));
  return static_cast<std::int64_t>(v);
}

// floor mod for 128-bit values, result in [0, m)
i128 mod_floor(i128 v, i128 m) {
  i128 r = v % m;
  if (r < 0) r += m;
  return r;
}

}  // namespace

Mat2 checked_mul(const Mat2& p, const Mat2& q) {
  auto e = [](std::int64_t x1, std::int64_t y1, std::int64_t x2, std::int64_t y2) {
    return narrow(static_cast<i128>(x1) * y1 + static_cast<i128>(x2) * y2, "matrix product");
  };
  return {e(p.a, q.a, p.b, q.c), e(p.a, q.b, p.b, q.d), e(p.c, q.a, p.d, q.c), e(p.c, q.b, p.d, q.d)};
}

Mat2 wrapping_mul(const Mat2& p, const Mat2& q) {
  auto e = [](std::int64_t x1, std::int64_t y1, std::int64_t x2, std::int64_t y2) {
    const std::uint64_t v = static_cast<std::uint64_t>(x1) * static_cast<std::uint64_t>(y1) +
                            static_cast<std::uint64_t>(x2) * static_cast<std::uint64_t>(y2);
    return static_cast<std::int64_t>(v);
  };
  return {e(p.a, q.a, p.b, q.c), e(p.a, q.b, p.b, q.d), e(p.c, q.a, p.d, q.c), e(p.c, q.b, p.d, q.d)};
}

// ------------------------------------------------------------ points

TorusPoint TorusPoint::from_double(double fx, double fy) {
  auto conv = [](double v) {
    v -= std::floor(v);
    const long double scaled = std::ldexp(static_cast<long double>(v), 64);
    if (scaled >= 0x1.0p64L) return std::uint64_t{0};
    return static_cast<std::uint64_t>(scaled);
  };
  return {conv(fx), conv(fy)};
}

double TorusPoint::fx() const { return std::ldexp(static_cast<double>(x), -64); }
double TorusPoint::fy() const { return std::ldexp(static_cast<double>(y), -64); }

TorusPoint RationalTorusPoint::to_fixed() const {
  auto conv = [this](std::int64_t n) {
    return static_cast<std::uint64_t>((static_cast<u128>(n) << 64) / static_cast<u128>(den));
  };
  return {conv(nx), conv(ny)};
}

TorusPoint apply_mod1(const Mat2& m, TorusPoint p) {
  const auto a = static_cast<std::uint64_t>(m.a), b = static_cast<std::uint64_t>(m.b);
  const auto c = static_cast<std::uint64_t>(m.c), d = static_cast<std::uint64_t>(m.d);
  return {a * p.x + b * p.y, c * p.x + d * p.y};
}

TorusPoint step_torus(const TorusAutomorphism& a, TorusPoint p) { return apply_mod1(a.matrix(), p); }

double torus_distance_sq(TorusPoint p, TorusPoint q) {
  const double dx = std::ldexp(static_cast<double>(static_cast<std::int64_t>(p.x - q.x)), -64);
  const double dy = std::ldexp(static_cast<double>(static_cast<std::int64_t>(p.y - q.y)), -64);
  return dx * dx + dy * dy;
}

double torus_distance(TorusPoint p, TorusPoint q) { return std::sqrt(torus_distance_sq(p, q)); }

// ------------------------------------------------------- automorphism

TorusAutomorphism::TorusAutomorphism(const Mat2& m) : m_(m) {
  const i128 det = static_cast<i128>(m.a) * m.d - static_cast<i128>(m.b) * m.c;
  if (det != 1 && det != -1) throw std::invalid_argument("torus automorphism needs |det| = 1");
  const i128 t = static_cast<i128>(m.a) + m.d;
  // characteristic polynomial x^2 - t x + det; a root of modulus one is
  // either +-1 or a complex pair (modulus^2 = det = 1)
  if (1 - t + det == 0 || 1 + t + det == 0)
    throw std::invalid_argument("torus automorphism has eigenvalue +-1");
  const i128 disc = t * t - 4 * det;
  if (disc <= 0) throw std::invalid_argument("torus automorphism has eigenvalues on the unit circle");
  const long double tl = static_cast<long double>(t);
  const long double s = std::sqrt(static_cast<long double>(disc));
  lambda_u_ = tl >= 0 ? (tl + s) / 2 : (tl - s) / 2;
  lambda_s_ = static_cast<long double>(det) / lambda_u_;
}

TorusAutomorphism TorusAutomorphism::cat_map() { return TorusAutomorphism({2, 1, 1, 1}); }

Mat2 TorusAutomorphism::power(unsigned k) const {
  Mat2 r{};
  for (unsigned i = 0; i < k; ++i) r = checked_mul(r, m_);
  return r;
}

TorusPoint TorusAutomorphism::step(TorusPoint p) const { return apply_mod1(m_, p); }

std::string TorusAutomorphism::name() const {
  return fmt::format("torus[[{},{}],[{},{}]]", m_.a, m_.b, m_.c, m_.d);
}

// ----------------------------------------------------- periodic points

SmithForm smith_normal_form(const Mat2& b) {
  i128 s[2][2] = {{b.a, b.b}, {b.c, b.d}};
  i128 u[2][2] = {{1, 0}, {0, 1}};
  i128 v[2][2] = {{1, 0}, {0, 1}};
  auto swap_rows = [&] {
    std::swap(s[0], s[1]);
    std::swap(u[0], u[1]);
  };
  auto swap_cols = [&] {
    for (int i = 0; i < 2; ++i) {
      std::swap(s[i][0], s[i][1]);
      std::swap(v[i][0], v[i][1]);
    }
  };
  auto any_nonzero = [&] { return s[0][0] != 0 || s[0][1] != 0 || s[1][0] != 0 || s[1][1] != 0; };
  auto absv = [](i128 x) { return x < 0 ? -x : x; };

  while (any_nonzero()) {
    // smallest nonzero entry to the pivot position
    int bi = -1, bj = -1;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (s[i][j] != 0 && (bi < 0 || absv(s[i][j]) < absv(s[bi][bj]))) {
          bi = i;
          bj = j;
        }
    if (bi == 1) swap_rows();
    if (bj == 1) swap_cols();
    const i128 p = s[0][0];
    const i128 qr = s[1][0] / p;
    for (int j = 0; j < 2; ++j) {
      s[1][j] -= qr * s[0][j];
      u[1][j] -= qr * u[0][j];
    }
    if (s[1][0] != 0) continue;
    const i128 qc = s[0][1] / p;
    for (int i = 0; i < 2; ++i) {
      s[i][1] -= qc * s[i][0];
      v[i][1] -= qc * v[i][0];
    }
    if (s[0][1] != 0) continue;
    if (s[1][1] % p != 0) {
      for (int j = 0; j < 2; ++j) {
        s[0][j] += s[1][j];
        u[0][j] += u[1][j];
      }
      continue;
    }
    break;
  }
  for (int i = 0; i < 2; ++i)
    if (s[i][i] < 0)
      for (int j = 0; j < 2; ++j) {
        s[i][j] = -s[i][j];
        u[i][j] = -u[i][j];
      }
  auto to_mat = [](i128 m[2][2]) {
    return Mat2{narrow(m[0][0], "smith form"), narrow(m[0][1], "smith form"), narrow(m[1][0], "smith form"),
                narrow(m[1][1], "smith form")};
  };
  return {to_mat(u), to_mat(s), to_mat(v)};
}

namespace {

Mat2 power_minus_identity(const TorusAutomorphism& a, unsigned k) {
  if (k == 0) throw std::invalid_argument("period must be positive");
  Mat2 p = a.power(k);
  p.a = narrow(static_cast<i128>(p.a) - 1, "A^k - I");
  p.d = narrow(static_cast<i128>(p.d) - 1, "A^k - I");
  return p;
}

}  // namespace

std::int64_t periodic_point_count(const TorusAutomorphism& a, unsigned k) {
  const Mat2 b = power_minus_identity(a, k);
  const i128 det = static_cast<i128>(b.a) * b.d - static_cast<i128>(b.b) * b.c;
  return narrow(det < 0 ? -det : det, "det(A^k - I)");
}

std::vector<RationalTorusPoint> periodic_points_torus(const TorusAutomorphism& a, unsigned k) {
  const Mat2 b = power_minus_identity(a, k);
  const std::int64_t count = periodic_point_count(a, k);
  if (count > kMaxPeriodicPoints)
    throw std::length_error(fmt::format("{} periodic points of period {} exceed the enumeration limit {}", count, k,
                                        kMaxPeriodicPoints));
  const SmithForm snf = smith_normal_form(b);
  const i128 d1 = snf.s.a, d2 = snf.s.d;
  // (A^k - I) x in Z^2  <=>  S y in Z^2 with y = V^{-1} x, so x = V (i/d1, j/d2)
  const i128 e = d2 / d1;
  std::vector<RationalTorusPoint> out;
  out.reserve(static_cast<std::size_t>(count));
  for (i128 i = 0; i < d1; ++i)
    for (i128 j = 0; j < d2; ++j) {
      const i128 nx = mod_floor(snf.v.a * (i * e) + snf.v.b * j, d2);
      const i128 ny = mod_floor(snf.v.c * (i * e) + snf.v.d * j, d2);
      out.push_back({static_cast<std::int64_t>(nx), static_cast<std::int64_t>(ny), static_cast<std::int64_t>(d2)});
    }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_periodic(const TorusAutomorphism& a, unsigned k, const RationalTorusPoint& p) {
  const Mat2 b = power_minus_identity(a, k);
  const i128 rx = static_cast<i128>(b.a) * p.nx + static_cast<i128>(b.b) * p.ny;
  const i128 ry = static_cast<i128>(b.c) * p.nx + static_cast<i128>(b.d) * p.ny;
  return rx % p.den == 0 && ry % p.den == 0;
}

// ------------------------------------------------------------ interval

std::string CylinderWord::to_string() const {
  const bool compact = std::all_of(digits.begin(), digits.end(), [](int d) { return d >= 0 && d < 10; });
  std::string s;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (!compact && i > 0) s += '.';
    s += std::to_string(digits[i]);
  }
  return s;
}

CylinderWord word_from_index(std::uint64_t index, int m, std::size_t level) {
  CylinderWord w;
  w.digits.assign(level, 0);
  for (std::size_t i = level; i-- > 0;) {
    w.digits[i] = static_cast<int>(index % static_cast<std::uint64_t>(m));
    index /= static_cast<std::uint64_t>(m);
  }
  return w;
}

IntervalMap IntervalMap::linear(int branches, std::vector<bool> reversed) {
  if (branches < 3) throw std::invalid_argument("linear interval map needs at least 3 branches (|T'| >= 3)");
  if (!reversed.empty() && reversed.size() != static_cast<std::size_t>(branches))
    throw std::invalid_argument("orientation flags must match the branch count");
  IntervalMap map;
  map.kind_ = IntervalMapKind::piecewise_linear_exact;
  map.m_ = branches;
  map.reversed_ = reversed.empty() ? std::vector<bool>(static_cast<std::size_t>(branches), false) : reversed;
  map.validate();
  return map;
}

IntervalMap IntervalMap::perturbed(int branches, double amplitude) {
  if (branches < 3) throw std::invalid_argument("perturbed map needs at least 3 branches");
  if (!(std::fabs(amplitude) * std::numbers::pi < 1.0))
    throw std::invalid_argument("perturbation amplitude must satisfy |a| pi < 1");
  IntervalMap map;
  map.kind_ = IntervalMapKind::smooth_float;
  map.m_ = branches;
  map.amplitude_ = amplitude;
  map.reversed_.assign(static_cast<std::size_t>(branches), false);
  map.validate();
  return map;
}

void IntervalMap::validate() {
  starts_.resize(static_cast<std::size_t>(m_));
  for (int j = 0; j < m_; ++j) starts_[static_cast<std::size_t>(j)] = static_cast<double>(j) / m_;
  if (kind_ == IntervalMapKind::piecewise_linear_exact) {
    min_expansion_ = max_expansion_ = m_;
    return;
  }
  // dense grid check of 3 <= |T'| <= D
  constexpr int kGrid = 4096;
  double gmin = std::numeric_limits<double>::infinity(), gmax = 0;
  for (int j = 0; j < m_; ++j)
    for (int i = 0; i <= kGrid; ++i) {
      const double g = std::fabs(inverse_derivative(j, static_cast<double>(i) / kGrid));
      gmin = std::min(gmin, g);
      gmax = std::max(gmax, g);
    }
  min_expansion_ = 1.0 / gmax;
  max_expansion_ = 1.0 / gmin;
  if (min_expansion_ < 3.0) throw std::invalid_argument(fmt::format("|T'| drops to {} < 3", min_expansion_));
  for (int j = 0; j < m_; ++j) {
    if (std::fabs(inverse_branch(j, 0.0) - starts_[static_cast<std::size_t>(j)]) > 1e-15 ||
        std::fabs(inverse_branch(j, 1.0) - static_cast<double>(j + 1) / m_) > 1e-15)
      throw std::invalid_argument("inverse branches are not full");
  }
}

bool IntervalMap::any_reversed() const { return std::find(reversed_.begin(), reversed_.end(), true) != reversed_.end(); }

double IntervalMap::inverse_branch(int j, double y) const {
  const double m = m_;
  if (kind_ == IntervalMapKind::piecewise_linear_exact) return reversed(j) ? (j + 1 - y) / m : (j + y) / m;
  return (j + y + amplitude_ * std::sin(std::numbers::pi * y)) / m;
}

double IntervalMap::inverse_derivative(int j, double y) const {
  const double m = m_;
  if (kind_ == IntervalMapKind::piecewise_linear_exact) return reversed(j) ? -1.0 / m : 1.0 / m;
  return (1.0 + amplitude_ * std::numbers::pi * std::cos(std::numbers::pi * y)) / m;
}

int IntervalMap::branch_of(double x) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), x);
  const auto j = static_cast<int>(it - starts_.begin()) - 1;
  return std::clamp(j, 0, m_ - 1);
}

double IntervalMap::step(double x) const {
  const int j = branch_of(x);
  if (kind_ == IntervalMapKind::piecewise_linear_exact) {
    double y = m_ * x - j;
    y = std::clamp(y, 0.0, 1.0);
    return reversed(j) ? 1.0 - y : y;
  }
  // solve g_j(y) = x: safeguarded Newton on [0, 1]
  const bool inc = inverse_derivative(j, 0.5) > 0;
  double lo = 0.0, hi = 1.0;
  const double a = starts_[static_cast<std::size_t>(j)];
  const double b = j + 1 < m_ ? starts_[static_cast<std::size_t>(j + 1)] : 1.0;
  double y = std::clamp((x - a) / (b - a), 0.0, 1.0);
  if (!inc) y = 1.0 - y;
  for (int it = 0; it < 100; ++it) {
    const double f = inverse_branch(j, y) - x;
    if (f == 0.0) return y;
    // f increasing in y when inc
    if ((f < 0) == inc)
      lo = y;
    else
      hi = y;
    double next = y - f / inverse_derivative(j, y);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - y) <= 1e-16 || hi - lo <= 1e-15) return next;
    y = next;
  }
  return y;
}

std::uint64_t IntervalMap::step_fixed(std::uint64_t x) const {
  if (kind_ != IntervalMapKind::piecewise_linear_exact)
    throw std::logic_error("fixed-point stepping needs a piecewise-linear map");
  const u128 p = static_cast<u128>(x) * static_cast<u128>(m_);
  const auto j = static_cast<std::size_t>(p >> 64);
  const auto frac = static_cast<std::uint64_t>(p);
  return reversed_[j] ? std::uint64_t{0} - frac : frac;
}

std::string IntervalMap::name() const {
  if (kind_ == IntervalMapKind::smooth_float) return fmt::format("perturbed(m={},a={})", m_, amplitude_);
  std::string s = fmt::format("linear(m={}", m_);
  if (any_reversed()) {
    s += ",flip=";
    for (bool r : reversed_) s += r ? '1' : '0';
  }
  return s + ")";
}

double step_interval(const IntervalMap& map, double x) { return map.step(x); }

void validate_word(const IntervalMap& map, const CylinderWord& w) {
  for (int d : w.digits)
    if (d < 0 || d >= map.branch_count())
      throw std::invalid_argument(fmt::format("digit {} outside [0, {})", d, map.branch_count()));
}

double compose_inverse(const IntervalMap& map, const CylinderWord& w, double u) {
  for (std::size_t i = w.digits.size(); i-- > 0;) u = map.inverse_branch(w.digits[i], u);
  return u;
}

Interval cylinder_interval(const IntervalMap& map, const CylinderWord& w) {
  validate_word(map, w);
  const double p = compose_inverse(map, w, 0.0);
  const double q = compose_inverse(map, w, 1.0);
  return {std::min(p, q), std::max(p, q)};
}

double periodic_point_of_cylinder(const IntervalMap& map, const CylinderWord& w) {
  validate_word(map, w);
  if (w.digits.empty()) throw std::invalid_argument("periodic point needs a nonempty word");
  double u = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double next = compose_inverse(map, w, u);
    if (std::fabs(next - u) <= 1e-17) return next;
    u = next;
  }
  return u;
}

}  // namespace rlab
