#include "rlab/torus_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "rlab/measures.hpp"
#include "rlab/parallel.hpp"
#include "rlab/rng.hpp"

namespace rlab {

namespace {

using ld = long double;

std::array<ld, 2> eigenvector(const Mat2& m, ld lambda) {
  ld vx, vy;
  if (m.b != 0) {
    vx = static_cast<ld>(m.b);
    vy = lambda - static_cast<ld>(m.a);
  } else {
    vx = lambda - static_cast<ld>(m.d);
    vy = static_cast<ld>(m.c);
  }
  const ld n = std::hypot(vx, vy);
  return {vx / n, vy / n};
}

ld power_ld(ld x, unsigned k) {
  ld r = 1;
  for (unsigned i = 0; i < k; ++i) r *= x;
  return r;
}

// minimal-image difference of two coordinates in [0,1)
double wrap(double d) { return d - std::nearbyint(d); }

// Visits every z in Z^2 with |alpha(z)| < a and |beta(z)| < b.
template <class F>
void scan_window(const EigenFrame& fr, ld a, ld b, F&& visit) {
  const ld ext_x = a * std::fabs(fr.e_u[0]) + b * std::fabs(fr.e_s[0]);
  const ld ext_y = a * std::fabs(fr.e_u[1]) + b * std::fabs(fr.e_s[1]);
  const bool scan_x = ext_x <= ext_y;
  const int s_axis = scan_x ? 0 : 1, t_axis = scan_x ? 1 : 0;
  const ld ext = scan_x ? ext_x : ext_y;
  const auto s_max = static_cast<long long>(std::floor(ext));
  for (long long s = -s_max; s <= s_max; ++s) {
    ld lo = -std::numeric_limits<ld>::infinity(), hi = std::numeric_limits<ld>::infinity();
    bool empty = false;
    auto constrain = [&](const std::array<ld, 2>& f, ld bound) {
      const ld fs = f[s_axis] * static_cast<ld>(s), ft = f[t_axis];
      if (ft == 0) {
        if (!(std::fabs(fs) < bound)) empty = true;
        return;
      }
      ld t1 = (-bound - fs) / ft, t2 = (bound - fs) / ft;
      if (t1 > t2) std::swap(t1, t2);
      lo = std::max(lo, t1);
      hi = std::min(hi, t2);
    };
    constrain(fr.f_u, a);
    constrain(fr.f_s, b);
    if (empty || !(lo < hi)) continue;
    for (auto t = static_cast<long long>(std::floor(lo)); t <= static_cast<long long>(std::ceil(hi)); ++t) {
      const long long zx = scan_x ? s : t, zy = scan_x ? t : s;
      const auto c = fr.coords(static_cast<ld>(zx), static_cast<ld>(zy));
      if (std::fabs(c[0]) < a && std::fabs(c[1]) < b) visit(zx, zy, c[0], c[1]);
    }
  }
}

Mat2 minus_identity(Mat2 p) {
  if (p.a == std::numeric_limits<std::int64_t>::min() || p.d == std::numeric_limits<std::int64_t>::min())
    throw std::overflow_error("A^k - I overflows");
  --p.a;
  --p.d;
  return p;
}

// z in B Z^2  <=>  adj(B) z = 0 mod det(B)
bool in_image_lattice(const Mat2& b, long long zx, long long zy) {
  using i128 = __int128;
  const i128 det = static_cast<i128>(b.a) * b.d - static_cast<i128>(b.b) * b.c;
  const i128 ux = static_cast<i128>(b.d) * zx - static_cast<i128>(b.b) * zy;
  const i128 uy = -static_cast<i128>(b.c) * zx + static_cast<i128>(b.a) * zy;
  return ux % det == 0 && uy % det == 0;
}

}  // namespace

EigenFrame eigen_frame(const TorusAutomorphism& a) {
  EigenFrame fr;
  fr.lambda_u = a.unstable_eigenvalue();
  fr.lambda_s = a.stable_eigenvalue();
  fr.e_u = eigenvector(a.matrix(), fr.lambda_u);
  fr.e_s = eigenvector(a.matrix(), fr.lambda_s);
  const ld det = fr.e_u[0] * fr.e_s[1] - fr.e_s[0] * fr.e_u[1];
  fr.sin_angle = std::fabs(det);
  // inverse of the column matrix [e_u e_s]
  fr.f_u = {fr.e_s[1] / det, -fr.e_s[0] / det};
  fr.f_s = {-fr.e_u[1] / det, fr.e_u[0] / det};
  return fr;
}

bool ellipses_overlap(const Mat2& b, double r) {
  if (!(r > 0)) return false;
  using i128 = __int128;
  const i128 det = static_cast<i128>(b.a) * b.d - static_cast<i128>(b.b) * b.c;
  if (det == 0) throw std::invalid_argument("singular matrix");
  // distinct centres: the nearest nonzero coset of Z^2 / B Z^2 is a unit
  // vector, since B Z^2 cannot contain both (1,0) and (0,1) unless det = +-1
  if ((det > 1 || det < -1) && 2 * r > 1) return true;
  // one component meeting its own translate: shortest vector of B Z^2,
  // found by Lagrange-Gauss reduction of the columns
  ld ux = static_cast<ld>(b.a), uy = static_cast<ld>(b.c);
  ld vx = static_cast<ld>(b.b), vy = static_cast<ld>(b.d);
  for (int it = 0; it < 1000; ++it) {
    if (ux * ux + uy * uy > vx * vx + vy * vy) {
      std::swap(ux, vx);
      std::swap(uy, vy);
    }
    const ld q = std::nearbyint((ux * vx + uy * vy) / (ux * ux + uy * uy));
    if (q == 0) break;
    vx -= q * ux;
    vy -= q * uy;
  }
  const ld shortest = std::sqrt(std::min(ux * ux + uy * uy, vx * vx + vy * vy));
  return shortest < 2 * static_cast<ld>(r);
}

EllipseSet enumerate_ellipses(const TorusAutomorphism& a, unsigned k, double mass) {
  if (k == 0) throw std::invalid_argument("period must be positive");
  EllipseSet set;
  set.k = k;
  set.mass = mass;
  const MeasureModel torus = MeasureModel::lebesgue_torus();
  set.radius = radius_for_mass(torus, TorusPoint{}, mass);
  set.b = minus_identity(a.power(k));
  const std::int64_t count = periodic_point_count(a, k);
  set.overlap = ellipses_overlap(set.b, set.radius);
  set.ellipse_area = std::numbers::pi * set.radius * set.radius / static_cast<double>(count);
  const EigenFrame fr = eigen_frame(a);
  const ld du = std::fabs(power_ld(fr.lambda_u, k) - 1), ds = std::fabs(power_ld(fr.lambda_s, k) - 1);
  const double su = static_cast<double>(set.radius / du), ss = static_cast<double>(set.radius / ds);
  set.c_stable = static_cast<double>(1 / ds);
  set.c_unstable = static_cast<double>(power_ld(std::fabs(fr.lambda_u), k) / du);
  const std::array<double, 2> eu = {static_cast<double>(fr.e_u[0]), static_cast<double>(fr.e_u[1])};
  const std::array<double, 2> es = {static_cast<double>(fr.e_s[0]), static_cast<double>(fr.e_s[1])};
  for (const auto& p : periodic_points_torus(a, k)) set.ellipses.push_back({p, ss, su, es, eu});
  return set;
}

double exact_event_measure(const TorusAutomorphism& a, unsigned k, double mass) {
  if (!(mass > 0)) return 0.0;
  const MeasureModel torus = MeasureModel::lebesgue_torus();
  const double r = radius_for_mass(torus, TorusPoint{}, mass);
  const Mat2 b = minus_identity(a.power(k));
  if (ellipses_overlap(b, r))
    throw OverlapError(fmt::format("components of E_{} overlap at mass {}; use a Monte Carlo estimate", k, mass));
  const double area = std::numbers::pi * r * r;
  const auto count = static_cast<double>(periodic_point_count(a, k));
  const double by_count = count * (std::numbers::pi * r * r / count);
  if (std::fabs(area - by_count) > 1e-12)
    throw std::logic_error(fmt::format("area identity failed: {} vs {}", area, by_count));
  return area;
}

Mat2 power_minus_identity_mod(const TorusAutomorphism& a, unsigned k) {
  Mat2 p{1, 0, 0, 1};
  for (unsigned i = 0; i < k; ++i) p = wrapping_mul(p, a.matrix());
  p.a = static_cast<std::int64_t>(static_cast<std::uint64_t>(p.a) - 1);
  p.d = static_cast<std::int64_t>(static_cast<std::uint64_t>(p.d) - 1);
  return p;
}

bool in_event_set(const Mat2& power_minus_identity, double r, TorusPoint x) {
  return torus_distance(apply_mod1(power_minus_identity, x), TorusPoint{}) < r;
}

// ------------------------------------------------------------ index

EllipseIndex::EllipseIndex(const EllipseSet& set) : set_(&set) {
  const Mat2& b = set.b;
  const double det = std::fabs(static_cast<double>(b.a) * static_cast<double>(b.d) -
                               static_cast<double>(b.b) * static_cast<double>(b.c));
  // bounding box half-widths of {v : |B v| < r}: r |row_i(B^{-1})|
  const double hx = set.radius * std::hypot(static_cast<double>(b.d), static_cast<double>(b.b)) / det;
  const double hy = set.radius * std::hypot(static_cast<double>(b.c), static_cast<double>(b.a)) / det;
  const double h = std::max({hx, hy, 1e-9});
  grid_ = static_cast<int>(std::clamp(std::floor(1.0 / (2 * h)), 1.0, 1024.0));
  reach_x_ = std::min(grid_, static_cast<int>(std::ceil(hx * grid_)) + 1);
  reach_y_ = std::min(grid_, static_cast<int>(std::ceil(hy * grid_)) + 1);
  cells_.assign(static_cast<std::size_t>(grid_) * static_cast<std::size_t>(grid_), {});
  for (std::size_t i = 0; i < set.ellipses.size(); ++i) {
    const auto& c = set.ellipses[i].center;
    const int cx = std::min(grid_ - 1, static_cast<int>(c.x() * grid_));
    const int cy = std::min(grid_ - 1, static_cast<int>(c.y() * grid_));
    cells_[static_cast<std::size_t>(cx) * static_cast<std::size_t>(grid_) + static_cast<std::size_t>(cy)].push_back(
        static_cast<std::uint32_t>(i));
  }
}

std::optional<std::size_t> EllipseIndex::find(TorusPoint x) const {
  const double px = x.fx(), py = x.fy();
  const int cx = std::min(grid_ - 1, static_cast<int>(px * grid_));
  const int cy = std::min(grid_ - 1, static_cast<int>(py * grid_));
  const Mat2& b = set_->b;
  const double r2 = set_->radius * set_->radius;
  const int sx = std::min(2 * reach_x_ + 1, grid_), sy = std::min(2 * reach_y_ + 1, grid_);
  for (int i = 0; i < sx; ++i)
    for (int j = 0; j < sy; ++j) {
      const int gx = ((cx - reach_x_ + i) % grid_ + grid_) % grid_;
      const int gy = ((cy - reach_y_ + j) % grid_ + grid_) % grid_;
      for (auto idx : cells_[static_cast<std::size_t>(gx) * static_cast<std::size_t>(grid_) + static_cast<std::size_t>(gy)]) {
        const auto& c = set_->ellipses[idx].center;
        const double dx = wrap(px - c.x()), dy = wrap(py - c.y());
        const double wx = static_cast<double>(b.a) * dx + static_cast<double>(b.b) * dy;
        const double wy = static_cast<double>(b.c) * dx + static_cast<double>(b.d) * dy;
        if (wx * wx + wy * wy < r2) return idx;
      }
    }
  return std::nullopt;
}

// ------------------------------------------------------------ separation

namespace {

struct LatticeSetup {
  EigenFrame fr;
  Mat2 b;
  ld du = 0, ds = 0;  // |lambda_u^l - 1|, |lambda_s^l - 1|
  std::int64_t count = 0;
};

LatticeSetup lattice_setup(const TorusAutomorphism& a, unsigned l) {
  if (l == 0) throw std::invalid_argument("period must be positive");
  LatticeSetup s;
  s.fr = eigen_frame(a);
  s.b = minus_identity(a.power(l));
  s.du = std::fabs(power_ld(s.fr.lambda_u, l) - 1);
  s.ds = std::fabs(power_ld(s.fr.lambda_s, l) - 1);
  s.count = periodic_point_count(a, l);
  return s;
}

// Smallest |alpha_d| over differences d of distinct l-periodic points (mod
// Z^2) with |beta_d| < rho, searching |alpha_d| < w; infinity if none.
ld min_alpha_in_window(const LatticeSetup& s, ld rho, ld w) {
  // d = B^{-1} z has coordinates (alpha_z / du, beta_z / ds) up to sign
  ld best = std::numeric_limits<ld>::infinity();
  scan_window(s.fr, w * s.du, rho * s.ds, [&](long long zx, long long zy, ld alpha, ld) {
    if (in_image_lattice(s.b, zx, zy)) return;
    best = std::min(best, std::fabs(alpha) / s.du);
  });
  return best;
}

}  // namespace

bool rectangles_disjoint(const TorusAutomorphism& a, unsigned l, double rho, double c) {
  if (!(rho > 0) || !(c >= 0)) throw std::invalid_argument("rectangle sides must be positive");
  const LatticeSetup s = lattice_setup(a, l);
  if (s.count == 1 || c == 0) return true;
  if (std::isinf(c)) return false;
  const ld w = static_cast<ld>(c) * std::pow(static_cast<ld>(a.lambda()), -static_cast<ld>(l)) / rho;
  return !std::isfinite(min_alpha_in_window(s, rho, w));
}

double separation_constant(const TorusAutomorphism& a, unsigned l, double rho) {
  if (!(rho > 0)) throw std::invalid_argument("rho must be positive");
  const LatticeSetup s = lattice_setup(a, l);
  if (s.count == 1) return std::numeric_limits<double>::infinity();
  // the window holds about 4 rho w sin(theta) count lattice points
  ld w = 1 / (rho * static_cast<ld>(s.count));
  for (int it = 0; it < 60; ++it, w *= 4) {
    const ld best = min_alpha_in_window(s, rho, w);
    if (std::isfinite(best))
      return static_cast<double>(static_cast<ld>(rho) * power_ld(static_cast<ld>(a.lambda()), l) * best);
  }
  throw std::runtime_error("separation search did not find a neighbouring periodic point");
}

SeparationReport separation_probe(const TorusAutomorphism& a, std::span<const unsigned> ls,
                                  std::span<const double> rhos) {
  SeparationReport rep;
  rep.c_a = std::numeric_limits<double>::infinity();
  for (unsigned l : ls) {
    if (l > 12) throw std::invalid_argument("separation probe supports l <= 12");
    for (double rho : rhos) {
      const double c = separation_constant(a, l, rho);
      rep.rows.push_back({l, rho, c});
      rep.c_a = std::min(rep.c_a, c);
    }
  }
  return rep;
}

// ------------------------------------------------------------ intersections

IntersectionReport intersection_bound_check(const TorusAutomorphism& a, unsigned k, unsigned l,
                                            const RadiusSchedule& schedule, IntersectionMode mode,
                                            std::size_t samples, std::uint64_t seed, unsigned threads) {
  if (k == 0 || l == 0) throw std::invalid_argument("intersection check needs k, l >= 1");
  IntersectionReport rep;
  rep.k = k;
  rep.l = l;
  rep.mode = mode;
  rep.lambda = a.lambda();
  const MeasureModel torus = MeasureModel::lebesgue_torus();
  const double mk = schedule.mass(k), mkl = schedule.mass(k + l);
  const double rk = radius_for_mass(torus, TorusPoint{}, mk), rkl = radius_for_mass(torus, TorusPoint{}, mkl);
  rep.m_k = torus_disk_area(rk);
  rep.m_kl = torus_disk_area(rkl);
  rep.bound_unit = rep.m_k * rep.m_kl + std::pow(rep.lambda, -static_cast<double>(l)) * std::sqrt(rep.m_k * rep.m_kl);

  if (mode == IntersectionMode::monte_carlo) {
    if (samples < 1000) throw std::invalid_argument("Monte Carlo intersection needs at least 1000 samples");
    const Mat2 bk = power_minus_identity_mod(a, k), bkl = power_minus_identity_mod(a, k + l);
    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (samples + kBlock - 1) / kBlock;
    std::vector<std::uint64_t> counts(blocks, 0);
    parallel_for(blocks, threads, [&](std::size_t blk) {
      const std::size_t end = std::min(samples, (blk + 1) * kBlock);
      std::uint64_t c = 0;
      for (std::size_t i = blk * kBlock; i < end; ++i) {
        SampleRng rng(seed, i);
        const std::uint64_t x0 = rng();
        const TorusPoint x{x0, rng()};
        if (in_event_set(bk, rk, x) && in_event_set(bkl, rkl, x)) ++c;
      }
      counts[blk] = c;
    });
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    rep.samples = samples;
    rep.intersection = static_cast<double>(total) / static_cast<double>(samples);
    rep.std_error = std::sqrt(rep.intersection * (1 - rep.intersection) / static_cast<double>(samples));
  } else {
    if (k + l > 12) throw std::invalid_argument("exact intersections need k + l <= 12");
    if (!(mk > 0) || !(mkl > 0)) {
      rep.intersection = 0;
    } else {
      const EigenFrame fr = eigen_frame(a);
      const ld sn = fr.sin_angle;
      auto half_sides = [&](unsigned j, double r) {
        const ld du = std::fabs(power_ld(fr.lambda_u, j) - 1), ds = std::fabs(power_ld(fr.lambda_s, j) - 1);
        return std::array<ld, 2>{r / (sn * du), r / (sn * ds)};
      };
      const auto h1 = half_sides(k, rk), h2 = half_sides(k + l, rkl);
      // a nonzero integer vector inside the doubled rectangle would make
      // two rectangles of one level overlap
      bool disjoint = true;
      for (double r : {rk, rkl})
        scan_window(fr, 2 * r / sn, 2 * r / sn, [&](long long zx, long long zy, ld, ld) {
          if (zx != 0 || zy != 0) disjoint = false;
        });
      rep.covers_disjoint = disjoint;
      auto extent = [&](int axis) {
        return (h1[0] + h2[0]) * std::fabs(fr.e_u[axis]) + (h1[1] + h2[1]) * std::fabs(fr.e_s[axis]);
      };
      const double ex = static_cast<double>(extent(0)), ey = static_cast<double>(extent(1));
      if (ex >= 0.5 || ey >= 0.5) throw std::invalid_argument("rectangle covers too large for exact intersection");
      const auto pk = periodic_points_torus(a, k);
      const auto pkl = periodic_points_torus(a, k + l);
      const int grid = static_cast<int>(std::clamp(std::floor(1.0 / std::max(ex, ey)), 1.0, 2048.0));
      const int reach_x = std::min(grid, static_cast<int>(std::ceil(ex * grid)));
      const int reach_y = std::min(grid, static_cast<int>(std::ceil(ey * grid)));
      std::vector<std::vector<std::uint32_t>> cells(static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid));
      for (std::size_t i = 0; i < pkl.size(); ++i) {
        const int cx = std::min(grid - 1, static_cast<int>(pkl[i].x() * grid));
        const int cy = std::min(grid - 1, static_cast<int>(pkl[i].y() * grid));
        cells[static_cast<std::size_t>(cx) * static_cast<std::size_t>(grid) + static_cast<std::size_t>(cy)].push_back(
            static_cast<std::uint32_t>(i));
      }
      std::vector<ld> partial(pk.size(), 0);
      parallel_for(pk.size(), threads, [&](std::size_t i) {
        const double px = pk[i].x(), py = pk[i].y();
        const int cx = std::min(grid - 1, static_cast<int>(px * grid));
        const int cy = std::min(grid - 1, static_cast<int>(py * grid));
        const int sx = std::min(2 * reach_x + 1, grid), sy = std::min(2 * reach_y + 1, grid);
        ld sum = 0;
        for (int di = 0; di < sx; ++di)
          for (int dj = 0; dj < sy; ++dj) {
            const int gx = ((cx - reach_x + di) % grid + grid) % grid;
            const int gy = ((cy - reach_y + dj) % grid + grid) % grid;
            for (auto q : cells[static_cast<std::size_t>(gx) * static_cast<std::size_t>(grid) + static_cast<std::size_t>(gy)]) {
              const auto c = fr.coords(wrap(pkl[q].x() - px), wrap(pkl[q].y() - py));
              const ld oa = std::min(h1[0], c[0] + h2[0]) - std::max(-h1[0], c[0] - h2[0]);
              const ld ob = std::min(h1[1], c[1] + h2[1]) - std::max(-h1[1], c[1] - h2[1]);
              if (oa > 0 && ob > 0) sum += oa * ob * sn;
            }
          }
        partial[i] = sum;
      });
      ld total = 0;
      for (ld v : partial) total += v;
      rep.intersection = static_cast<double>(total);
    }
  }
  rep.required_c = rep.bound_unit > 0 ? rep.intersection / rep.bound_unit : 0.0;
  return rep;
}

}  // namespace rlab
