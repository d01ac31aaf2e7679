#include "rlab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "rlab/parallel.hpp"
#include "rlab/rng.hpp"

namespace rlab {

double Profile::integral(double lo, double hi) const {
  if (breaks.size() < 2 || !(hi > lo)) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double s = std::max(lo, breaks[i]), t = std::min(hi, breaks[i + 1]);
    if (t > s) sum += (t - s) * value(0.5 * (s + t));
  }
  return sum;
}

// ------------------------------------------------------------ density grid

namespace {

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

// base cells [i/R, (i+1)/R] meeting [x0, x1]
std::pair<int, int> cell_range(int r, double x0, double x1) {
  const int lo = std::clamp(static_cast<int>(std::floor(x0 * r)), 0, r - 1);
  const int hi = std::clamp(static_cast<int>(std::ceil(x1 * r)) - 1, lo, r - 1);
  return {lo, hi};
}

}  // namespace

DensityGrid DensityGrid::uniform() { return from_masses(1, {1.0}, "lebesgue"); }

DensityGrid DensityGrid::from_masses(int resolution, std::vector<double> masses, std::string name) {
  if (resolution < 1 || resolution > 4096) throw std::invalid_argument("base grid resolution must lie in [1, 4096]");
  const auto r = static_cast<std::size_t>(resolution);
  if (masses.size() != r * r) throw std::invalid_argument("density grid needs R^2 cell masses");
  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0) || !std::isfinite(m)) throw std::invalid_argument("cell masses must be finite and nonnegative");
    total += m;
  }
  if (std::fabs(total - 1.0) > 1e-8)
    throw std::invalid_argument(fmt::format("cell masses sum to {} instead of 1", total));
  DensityGrid g;
  g.r_ = resolution;
  g.masses_ = std::move(masses);
  g.name_ = std::move(name);
  g.col_.assign(r, 0.0);
  g.row_.assign(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      g.col_[i] += g.masses_[i * r + j];
      g.row_[j] += g.masses_[i * r + j];
    }
  return g;
}

DensityGrid DensityGrid::spiked(int resolution, int spike_i, int spike_j, double spike_mass, double center_x,
                                double center_y, double sigma) {
  if (spike_i < 0 || spike_j < 0 || spike_i >= resolution || spike_j >= resolution)
    throw std::invalid_argument("spike cell outside the grid");
  if (!(spike_mass >= 0 && spike_mass <= 1) || !(sigma >= 0)) throw std::invalid_argument("bad spiked density");
  const auto r = static_cast<std::size_t>(resolution);
  auto weights = [&](double c) {
    std::vector<double> w(r);
    if (sigma == 0) {
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(r));
      return w;
    }
    double s = 0;
    for (std::size_t i = 0; i < r; ++i) {
      const double a = static_cast<double>(i) / resolution, b = static_cast<double>(i + 1) / resolution;
      w[i] = 0.5 * (std::erf((b - c) / (sigma * std::numbers::sqrt2)) - std::erf((a - c) / (sigma * std::numbers::sqrt2)));
      s += w[i];
    }
    for (auto& v : w) v /= s;
    return w;
  };
  const auto wx = weights(center_x), wy = weights(center_y);
  std::vector<double> m(r * r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) m[i * r + j] = (1 - spike_mass) * wx[i] * wy[j];
  m[static_cast<std::size_t>(spike_i) * r + static_cast<std::size_t>(spike_j)] += spike_mass;
  return from_masses(resolution, std::move(m), fmt::format("spiked(R={},cell={},{})", resolution, spike_i, spike_j));
}

DensityGrid DensityGrid::strip(int resolution, double strip_x) {
  if (!(strip_x >= 0 && strip_x < 1)) throw std::invalid_argument("strip position outside [0,1)");
  const auto r = static_cast<std::size_t>(resolution);
  const auto col = static_cast<std::size_t>(strip_x * resolution);
  std::vector<double> m(r * r, 0.5 / static_cast<double>(r * r));
  for (std::size_t j = 0; j < r; ++j) m[col * r + j] += 0.5 / static_cast<double>(r);
  return from_masses(resolution, std::move(m), fmt::format("strip(R={},x={})", resolution, strip_x));
}

bool DensityGrid::is_uniform() const {
  const double first = masses_.front();
  return std::all_of(masses_.begin(), masses_.end(), [&](double m) { return std::fabs(m - first) <= 1e-15; });
}

double DensityGrid::column_mass(double x0, double x1) const {
  if (!(x1 > x0)) return 0.0;
  const auto [lo, hi] = cell_range(r_, x0, x1);
  double s = 0.0;
  for (int i = lo; i <= hi; ++i)
    s += col_[static_cast<std::size_t>(i)] * overlap(x0, x1, static_cast<double>(i) / r_, static_cast<double>(i + 1) / r_) * r_;
  return s;
}

double DensityGrid::row_mass(double y0, double y1) const {
  if (!(y1 > y0)) return 0.0;
  const auto [lo, hi] = cell_range(r_, y0, y1);
  double s = 0.0;
  for (int j = lo; j <= hi; ++j)
    s += row_[static_cast<std::size_t>(j)] * overlap(y0, y1, static_cast<double>(j) / r_, static_cast<double>(j + 1) / r_) * r_;
  return s;
}

double DensityGrid::rectangle_mass(double x0, double x1, double y0, double y1) const {
  if (!(x1 > x0) || !(y1 > y0)) return 0.0;
  const auto [ilo, ihi] = cell_range(r_, x0, x1);
  const auto [jlo, jhi] = cell_range(r_, y0, y1);
  const double area = static_cast<double>(r_) * r_;
  double s = 0.0;
  for (int i = ilo; i <= ihi; ++i) {
    const double ox = overlap(x0, x1, static_cast<double>(i) / r_, static_cast<double>(i + 1) / r_);
    for (int j = jlo; j <= jhi; ++j)
      s += cell_mass(i, j) * ox * overlap(y0, y1, static_cast<double>(j) / r_, static_cast<double>(j + 1) / r_) * area;
  }
  return s;
}

std::array<double, 2> DensityGrid::rectangle_moment(double x0, double x1, double y0, double y1) const {
  if (!(x1 > x0) || !(y1 > y0)) return {0.0, 0.0};
  const auto [ilo, ihi] = cell_range(r_, x0, x1);
  const auto [jlo, jhi] = cell_range(r_, y0, y1);
  const double area = static_cast<double>(r_) * r_;
  std::array<double, 2> s{0.0, 0.0};
  for (int i = ilo; i <= ihi; ++i) {
    const double a = std::max(x0, static_cast<double>(i) / r_), b = std::min(x1, static_cast<double>(i + 1) / r_);
    if (!(b > a)) continue;
    for (int j = jlo; j <= jhi; ++j) {
      const double c = std::max(y0, static_cast<double>(j) / r_), d = std::min(y1, static_cast<double>(j + 1) / r_);
      if (!(d > c)) continue;
      const double dens = cell_mass(i, j) * area;
      s[0] += dens * 0.5 * (b * b - a * a) * (d - c);
      s[1] += dens * (b - a) * 0.5 * (d * d - c * c);
    }
  }
  return s;
}

double DensityGrid::integrate(const Profile& f, const Profile& g) const {
  if (f.breaks.size() < 2 || g.breaks.size() < 2) return 0.0;
  const auto [ilo, ihi] = cell_range(r_, f.breaks.front(), f.breaks.back());
  const auto [jlo, jhi] = cell_range(r_, g.breaks.front(), g.breaks.back());
  std::vector<double> gy(static_cast<std::size_t>(jhi - jlo + 1));
  for (int j = jlo; j <= jhi; ++j)
    gy[static_cast<std::size_t>(j - jlo)] = g.integral(static_cast<double>(j) / r_, static_cast<double>(j + 1) / r_);
  const double area = static_cast<double>(r_) * r_;
  double s = 0.0;
  for (int i = ilo; i <= ihi; ++i) {
    const double fx = f.integral(static_cast<double>(i) / r_, static_cast<double>(i + 1) / r_);
    if (fx == 0.0) continue;
    double row = 0.0;
    for (int j = jlo; j <= jhi; ++j) row += cell_mass(i, j) * gy[static_cast<std::size_t>(j - jlo)];
    s += fx * row * area;
  }
  return s;
}

// ------------------------------------------------------------ partition

const PartitionCell& PartitionCL::cell(int k, int l) const {
  return cells[static_cast<std::size_t>(k - 1) * big_theta + static_cast<std::size_t>(l - 1)];
}

std::array<double, 4> PartitionCL::ramp_breaks(const std::vector<std::uint64_t>& lines, int k) const {
  const auto n = static_cast<double>(fine);
  const auto lo = static_cast<double>(lines[static_cast<std::size_t>(k - 1)]);
  const auto hi = static_cast<double>(lines[static_cast<std::size_t>(k)]);
  // no ramp against the domain edge
  const bool first = k == 1, last = static_cast<std::uint64_t>(k) == big_theta;
  return {first ? 0.0 : (lo - 0.5) / n, first ? 0.0 : lo / n, last ? 1.0 : (hi - 1) / n, last ? 1.0 : (hi - 0.5) / n};
}

namespace {

double ramp_value(const std::array<double, 4>& b, double x) {
  if (x < b[0] || x > b[3]) return 0.0;
  if (x >= b[1] && x <= b[2]) return 1.0;
  if (x < b[1]) return (x - b[0]) / (b[1] - b[0]);
  return (b[3] - x) / (b[3] - b[2]);
}

}  // namespace

double PartitionCL::ramp_x(int k, double x) const { return ramp_value(ramp_breaks(cols, k), x); }
double PartitionCL::ramp_y(int l, double y) const { return ramp_value(ramp_breaks(rows, l), y); }

double PartitionCL::psi(const PartitionCell& c, double x, double y) const { return ramp_x(c.k, x) * ramp_y(c.l, y); }

namespace {

// block index s with lines[s-1] < t * fine <= lines[s], given offsets
int block_of(const std::vector<std::uint64_t>& lines, std::uint64_t fine, double t, double shift) {
  const double pos = t * static_cast<double>(fine) + shift;
  const auto it = std::lower_bound(lines.begin() + 1, lines.end() - 1, pos,
                                   [](std::uint64_t line, double p) { return static_cast<double>(line) < p; });
  return static_cast<int>(it - lines.begin());
}

}  // namespace

std::size_t PartitionCL::cell_index_at(double x, double y) const {
  const int k = block_of(cols, fine, x, 0.0), l = block_of(rows, fine, y, 0.0);
  return static_cast<std::size_t>(k - 1) * big_theta + static_cast<std::size_t>(l - 1);
}

std::optional<std::size_t> PartitionCL::support_at(double x, double y) const {
  // bumps switch over at the midlines of the selected strips
  const int k = block_of(cols, fine, x, 0.5), l = block_of(rows, fine, y, 0.5);
  const std::size_t idx = static_cast<std::size_t>(k - 1) * big_theta + static_cast<std::size_t>(l - 1);
  if (psi(cells[idx], x, y) > 0) return idx;
  return std::nullopt;
}

namespace {

std::vector<std::uint64_t> select_lines(const DensityGrid& density, bool columns, std::uint64_t big, std::uint64_t small) {
  const std::uint64_t fine = big * small;
  const auto n = static_cast<double>(fine);
  const double limit = 1.0 / static_cast<double>(small);
  std::vector<std::uint64_t> lines(big + 1, 0);
  for (std::uint64_t s = 1; s <= big; ++s) {
    std::uint64_t chosen = 0;
    for (std::uint64_t i = s * small; i > (s - 1) * small; --i) {
      const double a = static_cast<double>(i - 1) / n, b = static_cast<double>(i) / n;
      const double m = columns ? density.column_mass(a, b) : density.row_mass(a, b);
      if (m <= limit * (1 + 1e-12)) {
        chosen = i;
        break;
      }
    }
    if (chosen == 0)
      throw std::runtime_error(fmt::format("no {} of mass <= 1/theta in block {}; the density does not sum to 1",
                                           columns ? "column" : "row", s));
    lines[s] = chosen;
  }
  lines[big] = fine;  // the last block closes at the domain edge
  return lines;
}

}  // namespace

PartitionCL build_partition(const DensityGrid& density, double kappa, unsigned n) {
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  const double kn = kappa * n;
  if (kn > 10) throw std::invalid_argument(fmt::format("kappa n = {} exceeds 10", kn));
  const auto big = static_cast<std::uint64_t>(std::floor(std::exp(kn)));
  const double small_d = std::floor(std::exp(4 * kn));
  if (big > 2048) throw std::length_error(fmt::format("Theta_n = {} blocks per axis exceeds 2048", big));
  if (small_d * static_cast<double>(big) > 9007199254740992.0)
    throw std::invalid_argument("fine grid exceeds 2^53 lines per axis");
  PartitionCL p;
  p.kappa = kappa;
  p.n = n;
  p.big_theta = big;
  p.small_theta = static_cast<std::uint64_t>(small_d);
  p.fine = big * p.small_theta;
  p.uniform_density = density.is_uniform();
  p.density_name = density.name();
  p.cols = select_lines(density, true, big, p.small_theta);
  p.rows = select_lines(density, false, big, p.small_theta);
  const double threshold = std::exp(-3 * kn);
  const auto fine = static_cast<double>(p.fine);
  p.cells.reserve(big * big);
  for (std::uint64_t k = 1; k <= big; ++k)
    for (std::uint64_t l = 1; l <= big; ++l) {
      PartitionCell c;
      c.k = static_cast<int>(k);
      c.l = static_cast<int>(l);
      c.x0 = static_cast<double>(p.cols[k - 1]) / fine;
      c.x1 = static_cast<double>(p.cols[k]) / fine;
      c.y0 = static_cast<double>(p.rows[l - 1]) / fine;
      c.y1 = static_cast<double>(p.rows[l]) / fine;
      c.mass = density.rectangle_mass(c.x0, c.x1, c.y0, c.y1);
      c.kept = c.mass >= threshold;
      if (c.kept) {
        ++p.kept_count;
        // mass centroid snapped to the centre of a fine square inside P
        const auto mom = density.rectangle_moment(c.x0, c.x1, c.y0, c.y1);
        auto snap = [&](double centroid, std::uint64_t lo, std::uint64_t hi) {
          const auto i = std::clamp<double>(std::floor(centroid * fine) + 1, static_cast<double>(lo + 1), static_cast<double>(hi));
          return (i - 0.5) / fine;
        };
        c.anchor_x = snap(mom[0] / c.mass, p.cols[k - 1], p.cols[k]);
        c.anchor_y = snap(mom[1] / c.mass, p.rows[l - 1], p.rows[l]);
      } else {
        p.carved_mass += c.mass;
        c.anchor_x = 0.5 * (c.x0 + c.x1);
        c.anchor_y = 0.5 * (c.y0 + c.y1);
      }
      p.cells.push_back(c);
    }
  return p;
}

PartitionReport verify_partition(const PartitionCL& p, const DensityGrid& density, unsigned threads) {
  PartitionReport rep;
  rep.n = p.n;
  rep.kappa = p.kappa;
  rep.num_cells = p.kept_count;
  rep.carved_mass = p.carved_mass;
  const double kn = p.kappa * p.n;
  const double fine = static_cast<double>(p.fine);
  const double limit = 1.0 / static_cast<double>(p.small_theta);
  rep.strips_ok = true;
  for (std::uint64_t s = 1; s < p.big_theta; ++s) {
    const auto i = static_cast<double>(p.cols[s]), j = static_cast<double>(p.rows[s]);
    if (density.column_mass((i - 1) / fine, i / fine) > limit * (1 + 1e-12)) rep.strips_ok = false;
    if (density.row_mass((j - 1) / fine, j / fine) > limit * (1 + 1e-12)) rep.strips_ok = false;
  }
  const double threshold = std::exp(-3 * kn);
  rep.s0_ok = true;
  double total = 0.0;
  for (const auto& c : p.cells) {
    total += c.mass;
    if (c.kept != (c.mass >= threshold)) rep.s0_ok = false;
  }
  rep.mass_balance = std::fabs(total - 1.0);
  rep.balance_ok = rep.mass_balance <= 1e-8;
  rep.count_const = static_cast<double>(p.kept_count) / std::exp(2 * kn);
  rep.carve_const = p.carved_mass * std::exp(kn);
  rep.count_ok = rep.count_const <= 1.0 + 1e-12;
  rep.carve_ok = p.carved_mass <= std::exp(-kn);

  const bool ramps = p.big_theta > 1;
  const double lip_psi = ramps ? 2 * fine * std::numbers::sqrt2 : 0.0;
  struct CellStats {
    double diam = 0, sup = 0, lip = 0, l1 = 0;
  };
  std::vector<CellStats> stats(p.cells.size());
  parallel_for(p.cells.size(), threads, [&](std::size_t idx) {
    const auto& c = p.cells[idx];
    if (!c.kept) return;
    CellStats& st = stats[idx];
    st.diam = std::hypot(c.x1 - c.x0, c.y1 - c.y0);
    st.sup = 1.0 / c.mass;
    st.lip = lip_psi / c.mass;
    const auto bx = p.ramp_breaks(p.cols, c.k), by = p.ramp_breaks(p.rows, c.l);
    auto profile = [](std::array<double, 4> b, double lo, double hi, auto fn) {
      std::vector<double> br{b[0], b[1], b[2], b[3], lo, hi};
      std::sort(br.begin(), br.end());
      return Profile{br, fn};
    };
    auto in = [](double t, double lo, double hi) { return t > lo && t <= hi; };
    // |psi - 1_P| = 1_P (1 - a b) + 1_{P^c} a b, split into products of
    // one-dimensional nonnegative factors
    const Profile x_p_one_minus = profile(bx, c.x0, c.x1, [&](double t) { return in(t, c.x0, c.x1) ? 1 - ramp_value(bx, t) : 0.0; });
    const Profile x_p_ramp = profile(bx, c.x0, c.x1, [&](double t) { return in(t, c.x0, c.x1) ? ramp_value(bx, t) : 0.0; });
    const Profile x_out_ramp = profile(bx, c.x0, c.x1, [&](double t) { return in(t, c.x0, c.x1) ? 0.0 : ramp_value(bx, t); });
    const Profile y_p = profile(by, c.y0, c.y1, [&](double t) { return in(t, c.y0, c.y1) ? 1.0 : 0.0; });
    const Profile y_p_one_minus = profile(by, c.y0, c.y1, [&](double t) { return in(t, c.y0, c.y1) ? 1 - ramp_value(by, t) : 0.0; });
    const Profile y_ramp = profile(by, c.y0, c.y1, [&](double t) { return ramp_value(by, t); });
    const Profile y_out_ramp = profile(by, c.y0, c.y1, [&](double t) { return in(t, c.y0, c.y1) ? 0.0 : ramp_value(by, t); });
    const double gap = density.integrate(x_p_one_minus, y_p) + density.integrate(x_p_ramp, y_p_one_minus) +
                       density.integrate(x_out_ramp, y_ramp) + density.integrate(x_p_ramp, y_out_ramp);
    st.l1 = gap / c.mass;
  });
  for (const auto& st : stats) {
    rep.max_diam = std::max(rep.max_diam, st.diam);
    rep.sup_rho_const = std::max(rep.sup_rho_const, st.sup);
    rep.lip_rho_const = std::max(rep.lip_rho_const, st.lip);
    rep.l1_const = std::max(rep.l1_const, st.l1);
  }
  rep.diam_const = rep.max_diam * std::exp(kn);
  rep.sup_rho_const /= std::exp(3 * kn);
  rep.lip_rho_const /= std::exp(8 * kn);
  rep.l1_const *= std::exp(kn);
  return rep;
}

DriftCheck check_drift(std::span<const PartitionReport> reports) {
  DriftCheck out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.ok()) {
      out.ok = false;
      out.message = fmt::format("n={}: count {} carve {} balance {} strips {} S0 {}", r.n, r.count_ok, r.carve_ok,
                                r.balance_ok, r.strips_ok, r.s0_ok);
      return out;
    }
    if (i == 0) continue;
    const auto& q = reports[i - 1];
    const std::pair<const char*, std::pair<double, double>> pairs[] = {
        {"diam", {q.diam_const, r.diam_const}},
        {"sup", {q.sup_rho_const, r.sup_rho_const}},
        {"lip", {q.lip_rho_const, r.lip_rho_const}},
        {"l1", {q.l1_const, r.l1_const}},
    };
    for (const auto& [name, v] : pairs)
      if (v.second > 2 * v.first * (1 + 1e-12) && v.second > 0) {
        out.ok = false;
        out.message = fmt::format("{} constant drifts from {} at n={} to {} at n={}", name, v.first, q.n, v.second, r.n);
        return out;
      }
  }
  return out;
}

// ------------------------------------------------------------ localization

std::string to_string(TestFunction f) {
  switch (f) {
    case TestFunction::constant:
      return "constant";
    case TestFunction::first_coordinate:
      return "first_coordinate";
    case TestFunction::bump_product:
      return "bump_product";
  }
  return "unknown";
}

namespace {

double tent(double u) { return std::max(0.0, 1.0 - std::fabs(u - 0.5) / 0.25); }

}  // namespace

double evaluate(TestFunction f, const std::array<double, 2>& x, const std::array<double, 2>& y,
                const std::array<double, 2>& z) {
  switch (f) {
    case TestFunction::constant:
      return 1.0;
    case TestFunction::first_coordinate:
      return x[0];
    case TestFunction::bump_product:
      return tent(x[0]) * tent(x[1]) * tent(y[0]) * tent(y[1]) * tent(z[0]) * tent(z[1]);
  }
  return 0.0;
}

double lipschitz_norm(TestFunction f) {
  switch (f) {
    case TestFunction::constant:
      return 1.0;
    case TestFunction::first_coordinate:
      return 2.0;
    case TestFunction::bump_product:
      // tents of slope 4 in each coordinate of each factor
      return 1.0 + 4.0 * std::numbers::sqrt2;
  }
  return 0.0;
}

LocalizedReport localized_integral(const PartitionCL& p, const PartitionReport& verified, TestFunction h,
                                   const TorusAutomorphism& a, unsigned k, unsigned l, std::size_t samples,
                                   std::uint64_t seed, unsigned threads) {
  if (!p.uniform_density) throw std::invalid_argument("localized integral needs a partition of Lebesgue measure");
  if (samples < 1000) throw std::invalid_argument("localized integral needs at least 1000 samples");
  Mat2 ak{}, al{};
  for (unsigned i = 0; i < k; ++i) ak = wrapping_mul(ak, a.matrix());
  for (unsigned i = 0; i < l; ++i) al = wrapping_mul(al, a.matrix());
  constexpr std::size_t kBlock = 1024;
  struct Sums {
    long double lhs = 0, rhs = 0, diff = 0, diff2 = 0;
  };
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<Sums> acc(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    Sums s;
    const std::size_t end = std::min(samples, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      SampleRng rng(seed, i);
      const std::uint64_t x0 = rng();
      const TorusPoint x{x0, rng()};
      const TorusPoint y = apply_mod1(ak, x);
      const TorusPoint z = apply_mod1(al, y);
      const std::array<double, 2> xd{x.fx(), x.fy()}, yd{y.fx(), y.fy()}, zd{z.fx(), z.fy()};
      const double lhs = evaluate(h, xd, yd, zd);
      double rhs = 0.0;
      if (const auto idx = p.support_at(xd[0], xd[1])) {
        const auto& c = p.cells[*idx];
        if (c.kept) rhs = p.psi(c, xd[0], xd[1]) * evaluate(h, {c.anchor_x, c.anchor_y}, yd, zd);
      }
      s.lhs += lhs;
      s.rhs += rhs;
      s.diff += lhs - rhs;
      s.diff2 += static_cast<long double>(lhs - rhs) * (lhs - rhs);
    }
    acc[b] = s;
  });
  Sums t;
  for (const auto& s : acc) {
    t.lhs += s.lhs;
    t.rhs += s.rhs;
    t.diff += s.diff;
    t.diff2 += s.diff2;
  }
  const auto nn = static_cast<long double>(samples);
  LocalizedReport rep;
  rep.n = p.n;
  rep.function = h;
  rep.samples = samples;
  rep.lhs = static_cast<double>(t.lhs / nn);
  rep.rhs = static_cast<double>(t.rhs / nn);
  const long double mean = t.diff / nn;
  const long double var = std::max<long double>(0, (t.diff2 / nn - mean * mean) * nn / (nn - 1));
  rep.difference = static_cast<double>(mean);
  rep.difference_std_error = static_cast<double>(std::sqrt(var / nn));
  const double scale = lipschitz_norm(h) * std::exp(-p.kappa * p.n);
  rep.ratio = std::fabs(rep.difference) / scale;
  rep.ratio_std_error = rep.difference_std_error / scale;
  rep.bound = verified.carve_const + verified.diam_const + verified.l1_const;
  rep.bounded = rep.ratio <= rep.bound + 3 * rep.ratio_std_error;
  return rep;
}

}  // namespace rlab
