#include "rlab/measures.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "rlab/numeric.hpp"
#include "rlab/parallel.hpp"
#include "rlab/rng.hpp"

namespace rlab {

// ------------------------------------------------------------ potentials

PotentialSpec PotentialSpec::geometric(const IntervalMap& map) {
  PotentialSpec p;
  p.name = "geometric";
  p.value = [map](int j, double y) { return std::log(std::fabs(map.inverse_derivative(j, y))); };
  return p;
}

PotentialSpec PotentialSpec::bernoulli(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("bernoulli potential needs weights");
  double total = 0;
  for (double w : weights) {
    if (!(w > 0)) throw std::invalid_argument("bernoulli weights must be positive");
    total += w;
  }
  std::string name = "bernoulli(";
  for (std::size_t i = 0; i < weights.size(); ++i) name += fmt::format("{}{}", i ? "," : "", weights[i]);
  name += ")";
  PotentialSpec p;
  p.name = name;
  std::vector<double> logs;
  for (double w : weights) logs.push_back(std::log(w / total));
  p.value = [logs](int j, double) {
    if (j < 0 || static_cast<std::size_t>(j) >= logs.size())
      throw std::invalid_argument("bernoulli potential has fewer weights than branches");
    return logs[static_cast<std::size_t>(j)];
  };
  p.normalized = std::fabs(total - 1.0) < 1e-12;
  return p;
}

PotentialSpec PotentialSpec::constant(double c) {
  PotentialSpec p;
  p.name = fmt::format("constant({})", c);
  p.value = [c](int, double) { return c; };
  return p;
}

// ------------------------------------------------------------ model basics

MeasureModel MeasureModel::lebesgue_interval() {
  MeasureModel m;
  m.kind_ = MeasureKind::lebesgue_interval;
  return m;
}

MeasureModel MeasureModel::lebesgue_torus() {
  MeasureModel m;
  m.kind_ = MeasureKind::lebesgue_torus;
  return m;
}

MeasureModel MeasureModel::gibbs_from_tables(int grid_level, std::vector<double> cdf, std::vector<double> density,
                                             double error_bound, GibbsDiagnostics diagnostics, std::string map_name,
                                             std::string potential_name) {
  if (grid_level < 1 || grid_level > 24) throw std::invalid_argument("grid level must lie in [1, 24]");
  const std::size_t n = std::size_t{1} << grid_level;
  if (cdf.size() != n + 1 || density.size() != n) throw std::invalid_argument("gibbs tables have the wrong size");
  if (cdf.front() != 0.0 || cdf.back() != 1.0) throw std::invalid_argument("cdf must run from 0 to 1");
  for (std::size_t i = 0; i < n; ++i)
    if (!(cdf[i + 1] >= cdf[i])) throw std::invalid_argument("cdf must be nondecreasing");
  MeasureModel m;
  m.kind_ = MeasureKind::gibbs_interval;
  m.grid_level_ = grid_level;
  m.cdf_ = std::move(cdf);
  m.density_ = std::move(density);
  m.error_bound_ = error_bound;
  m.diagnostics_ = diagnostics;
  m.map_name_ = std::move(map_name);
  m.potential_name_ = std::move(potential_name);
  return m;
}

double MeasureModel::cdf(double t) const {
  if (kind_ == MeasureKind::lebesgue_torus) throw std::logic_error("torus model has no distribution function");
  if (!(t > 0.0)) return 0.0;
  if (t >= 1.0) return 1.0;
  if (kind_ == MeasureKind::lebesgue_interval) return t;
  const double scaled = std::ldexp(t, grid_level_);
  const auto i = static_cast<std::size_t>(scaled);
  const double frac = scaled - static_cast<double>(i);
  return cdf_[i] + frac * (cdf_[i + 1] - cdf_[i]);
}

double MeasureModel::inverse_cdf(double u) const {
  if (kind_ == MeasureKind::lebesgue_torus) throw std::logic_error("torus model has no distribution function");
  if (!(u > 0.0)) return 0.0;
  if (u >= 1.0) return 1.0;
  if (kind_ == MeasureKind::lebesgue_interval) return u;
  // first grid point with cdf >= u
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  const auto hi = static_cast<std::size_t>(it - cdf_.begin());
  const std::size_t lo = hi - 1;
  const double cell = cdf_[hi] - cdf_[lo];
  const double frac = cell > 0 ? (u - cdf_[lo]) / cell : 1.0;
  return std::ldexp(static_cast<double>(lo) + frac, -grid_level_);
}

double MeasureModel::tolerance() const {
  if (kind_ == MeasureKind::gibbs_interval) return std::max(1e-9, 2.0 * error_bound_);
  return 1e-12;
}

std::string MeasureModel::name() const {
  switch (kind_) {
    case MeasureKind::lebesgue_interval:
      return "lebesgue-interval";
    case MeasureKind::lebesgue_torus:
      return "lebesgue-torus";
    case MeasureKind::gibbs_interval:
      return fmt::format("gibbs[{};{};L={}]", map_name_, potential_name_, grid_level_);
  }
  return "unknown";
}

// ------------------------------------------------------------ Ulam build

namespace {

struct UlamEntry {
  std::uint32_t cell;
  double weight;
};

struct UlamOperator {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;  // per target cell c
  std::vector<UlamEntry> entries;    // source cells i with weights W[c][i]
};

UlamOperator assemble(const IntervalMap& map, const PotentialSpec& phi, int level) {
  UlamOperator op;
  op.n = std::size_t{1} << level;
  const double nd = static_cast<double>(op.n);
  op.offsets.reserve(op.n + 1);
  op.offsets.push_back(0);
  op.entries.reserve(op.n * static_cast<std::size_t>(map.branch_count()) * 2);
  for (std::size_t c = 0; c < op.n; ++c) {
    const double y0 = static_cast<double>(c) / nd, y1 = static_cast<double>(c + 1) / nd;
    for (int j = 0; j < map.branch_count(); ++j) {
      const double xa = map.inverse_branch(j, y0), xb = map.inverse_branch(j, y1);
      const bool inc = xb >= xa;
      const double lo = std::min(xa, xb), hi = std::max(xa, xb);
      const double span = hi - lo;
      if (!(span > 0)) continue;
      const auto i_lo = static_cast<std::size_t>(std::floor(lo * nd));
      const auto i_hi = std::min(op.n - 1, static_cast<std::size_t>(std::ceil(hi * nd)) - 1);
      for (std::size_t i = i_lo; i <= i_hi; ++i) {
        const double a = std::max(lo, static_cast<double>(i) / nd);
        const double b = std::min(hi, static_cast<double>(i + 1) / nd);
        if (!(b > a)) continue;
        const double frac = (b - a) / span;
        const double pos = (0.5 * (a + b) - lo) / span;
        const double ymid = inc ? y0 + pos / nd : y1 - pos / nd;
        op.entries.push_back({static_cast<std::uint32_t>(i), std::exp(phi.value(j, ymid)) * frac});
      }
    }
    op.offsets.push_back(op.entries.size());
  }
  return op;
}

constexpr int kMaxPowerIterations = 100000;
constexpr double kPowerTolerance = 1e-13;

// nu <- W^T nu (measures), normalized to total 1; returns eigenvalue estimate
double left_power(const UlamOperator& op, std::vector<double>& nu, double scale, int& iterations) {
  std::vector<double> next(op.n);
  double estimate = 0;
  for (int it = 1; it <= kMaxPowerIterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < op.n; ++c) {
      const double v = nu[c] * scale;
      if (v == 0) continue;
      for (std::size_t e = op.offsets[c]; e < op.offsets[c + 1]; ++e) next[op.entries[e].cell] += op.entries[e].weight * v;
    }
    CompensatedSum total;
    for (double v : next) total.add(v);
    estimate = total.value();
    if (!(estimate > 0)) throw std::runtime_error("transfer operator annihilated the measure");
    double diff = 0;
    for (std::size_t i = 0; i < op.n; ++i) {
      next[i] /= estimate;
      diff += std::fabs(next[i] - nu[i]);
    }
    nu.swap(next);
    if (diff < kPowerTolerance) {
      iterations = it;
      return estimate;
    }
  }
  throw std::runtime_error(fmt::format("power iteration for the conformal measure did not converge in {} steps",
                                       kMaxPowerIterations));
}

// h <- W h (functions), normalized to mean 1
double right_power(const UlamOperator& op, std::vector<double>& h, int& iterations) {
  std::vector<double> next(op.n);
  double estimate = 0;
  for (int it = 1; it <= kMaxPowerIterations; ++it) {
    CompensatedSum total;
    for (std::size_t c = 0; c < op.n; ++c) {
      double s = 0;
      for (std::size_t e = op.offsets[c]; e < op.offsets[c + 1]; ++e) s += op.entries[e].weight * h[op.entries[e].cell];
      next[c] = s;
      total.add(s);
    }
    estimate = total.value() / static_cast<double>(op.n);
    if (!(estimate > 0)) throw std::runtime_error("transfer operator annihilated the eigenfunction");
    double diff = 0;
    for (std::size_t c = 0; c < op.n; ++c) {
      next[c] /= estimate;
      diff += std::fabs(next[c] - h[c]);
    }
    h.swap(next);
    if (diff / static_cast<double>(op.n) < kPowerTolerance) {
      iterations = it;
      return estimate;
    }
  }
  throw std::runtime_error(fmt::format("power iteration for the eigenfunction did not converge in {} steps",
                                       kMaxPowerIterations));
}

struct UlamSolution {
  std::vector<double> cdf;
  std::vector<double> density;
  GibbsDiagnostics diag;
};

UlamSolution solve(const IntervalMap& map, const PotentialSpec& phi, int level) {
  const UlamOperator op = assemble(map, phi, level);
  const double nd = static_cast<double>(op.n);
  UlamSolution sol;
  std::vector<double> nu(op.n, 1.0 / nd), h(op.n, 1.0);
  int it_nu = 0, it_h = 0;
  const double rho_nu = left_power(op, nu, 1.0, it_nu);
  const double rho_h = right_power(op, h, it_h);
  sol.diag.eigenvalue = rho_nu;
  sol.diag.eigenvalue_mismatch = std::fabs(rho_nu - rho_h);
  sol.diag.iterations = std::max(it_nu, it_h);

  // zero pressure: phi -> phi - log(rho); re-estimate from a fresh start
  std::vector<double> check(op.n, 1.0 / nd);
  int it_check = 0;
  sol.diag.normalized_eigenvalue = left_power(op, check, 1.0 / rho_nu, it_check);

  // normalize h so that its nu-integral is one, then mu = h nu
  CompensatedSum hn;
  for (std::size_t i = 0; i < op.n; ++i) hn.add(h[i] * nu[i]);
  const double scale = hn.value();
  sol.diag.h_min = std::numeric_limits<double>::infinity();
  sol.diag.h_max = 0;
  std::vector<double> mass(op.n);
  for (std::size_t i = 0; i < op.n; ++i) {
    h[i] /= scale;
    sol.diag.h_min = std::min(sol.diag.h_min, h[i]);
    sol.diag.h_max = std::max(sol.diag.h_max, h[i]);
    mass[i] = h[i] * nu[i];
  }
  CompensatedSum running;
  sol.cdf.assign(op.n + 1, 0.0);
  for (std::size_t i = 0; i < op.n; ++i) {
    running.add(mass[i]);
    sol.cdf[i + 1] = running.value();
  }
  const double total = sol.cdf.back();
  if (std::fabs(total - 1.0) > 1e-10) throw std::runtime_error(fmt::format("gibbs total mass {} is not 1", total));
  for (auto& v : sol.cdf) v = std::min(1.0, v / total);
  sol.cdf.back() = 1.0;
  sol.density.resize(op.n);
  for (std::size_t i = 0; i < op.n; ++i) sol.density[i] = (sol.cdf[i + 1] - sol.cdf[i]) * nd;
  return sol;
}

}  // namespace

MeasureModel build_gibbs(const IntervalMap& map, const PotentialSpec& phi, int grid_level) {
  if (grid_level < 2 || grid_level > 24) throw std::invalid_argument("grid level must lie in [2, 24]");
  if (!phi.value) throw std::invalid_argument("potential has no evaluation rule");
  UlamSolution fine = solve(map, phi, grid_level);
  const UlamSolution coarse = solve(map, phi, grid_level - 1);
  // compare at every fine node: shared nodes catch eigenvector error, odd
  // nodes catch the interpolation error of the coarse table, which dominates
  // for singular measures whose node values are exact
  double diff = 0;
  for (std::size_t i = 0; i < coarse.cdf.size(); ++i) {
    diff = std::max(diff, std::fabs(fine.cdf[2 * i] - coarse.cdf[i]));
    if (i + 1 < coarse.cdf.size())
      diff = std::max(diff, std::fabs(fine.cdf[2 * i + 1] - 0.5 * (coarse.cdf[i] + coarse.cdf[i + 1])));
  }
  // doubling covers a per-level reduction factor >= 1.5
  const double error_bound = 2.0 * diff + 1e-12;
  return MeasureModel::gibbs_from_tables(grid_level, std::move(fine.cdf), std::move(fine.density), error_bound,
                                         fine.diag, map.name(), phi.name);
}

// ------------------------------------------------------------ sidecar

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'L', 'G', 'I', 'B', 'B', 'S', '\0'};
constexpr std::uint32_t kSidecarVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("gibbs sidecar truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("gibbs sidecar truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }
std::string get_str(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 16)) throw std::runtime_error("gibbs sidecar string too long");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw std::runtime_error("gibbs sidecar truncated");
  return s;
}

}  // namespace

void save_gibbs(const MeasureModel& model, const std::filesystem::path& path) {
  if (model.kind() != MeasureKind::gibbs_interval) throw std::invalid_argument("only gibbs models have sidecars");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kSidecarVersion);
  put_u32(os, static_cast<std::uint32_t>(model.grid_level()));
  put_f64(os, model.error_bound());
  const auto& d = model.diagnostics();
  put_f64(os, d.eigenvalue);
  put_f64(os, d.eigenvalue_mismatch);
  put_f64(os, d.normalized_eigenvalue);
  put_u32(os, static_cast<std::uint32_t>(d.iterations));
  put_f64(os, d.h_min);
  put_f64(os, d.h_max);
  put_str(os, model.map_name());
  put_str(os, model.potential_name());
  for (double v : model.cdf_table()) put_f64(os, v);
  for (double v : model.density_table()) put_f64(os, v);
  if (!os) throw std::runtime_error(fmt::format("failed writing {}", path.string()));
}

MeasureModel load_gibbs(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error(fmt::format("{} is not a gibbs sidecar", path.string()));
  const std::uint32_t version = get_u32(is);
  if (version != kSidecarVersion) throw std::runtime_error(fmt::format("unsupported sidecar version {}", version));
  const auto level = static_cast<int>(get_u32(is));
  if (level < 1 || level > 24) throw std::runtime_error("sidecar grid level out of range");
  const double error_bound = get_f64(is);
  GibbsDiagnostics d;
  d.eigenvalue = get_f64(is);
  d.eigenvalue_mismatch = get_f64(is);
  d.normalized_eigenvalue = get_f64(is);
  d.iterations = static_cast<int>(get_u32(is));
  d.h_min = get_f64(is);
  d.h_max = get_f64(is);
  std::string map_name = get_str(is);
  std::string potential_name = get_str(is);
  const std::size_t n = std::size_t{1} << level;
  std::vector<double> cdf(n + 1), density(n);
  for (auto& v : cdf) v = get_f64(is);
  for (auto& v : density) v = get_f64(is);
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in gibbs sidecar");
  return MeasureModel::gibbs_from_tables(level, std::move(cdf), std::move(density), error_bound, d,
                                         std::move(map_name), std::move(potential_name));
}

// ------------------------------------------------------------ masses

double cylinder_measure(const MeasureModel& model, const IntervalMap& map, const CylinderWord& w) {
  if (!model.is_interval()) throw std::invalid_argument("cylinder masses need an interval model");
  const Interval c = cylinder_interval(map, w);
  return model.cdf(c.hi) - model.cdf(c.lo);
}

std::vector<double> level_masses(const MeasureModel& model, const IntervalMap& map, std::size_t level) {
  if (!model.is_interval()) throw std::invalid_argument("cylinder masses need an interval model");
  const auto m = static_cast<std::uint64_t>(map.branch_count());
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < level; ++i) {
    count *= m;
    if (count > (std::uint64_t{1} << 26)) throw std::length_error("too many cylinders");
  }
  std::vector<double> out(count);
  for (std::uint64_t idx = 0; idx < count; ++idx) {
    const CylinderWord w = word_from_index(idx, map.branch_count(), level);
    const double p = compose_inverse(map, w, 0.0), q = compose_inverse(map, w, 1.0);
    out[idx] = model.cdf(std::max(p, q)) - model.cdf(std::min(p, q));
  }
  return out;
}

double torus_disk_area(double r) {
  if (!(r > 0)) return 0.0;
  const double pi = std::numbers::pi;
  if (r <= 0.5) return pi * r * r;
  if (r >= std::numbers::sqrt2 / 2) return 1.0;
  // disk of radius r in the unit square around its centre minus the four
  // caps beyond distance 1/2
  const double d = 0.5;
  const double seg = r * r * std::acos(d / r) - d * std::sqrt(r * r - d * d);
  return pi * r * r - 4.0 * seg;
}

double ball_mass(const MeasureModel& model, double x, double r) {
  if (r < 0) throw std::invalid_argument("negative radius");
  if (model.kind() == MeasureKind::lebesgue_torus) return torus_disk_area(r);
  return model.cdf(std::min(x + r, 1.0)) - model.cdf(std::max(x - r, 0.0));
}

double ball_mass(const MeasureModel& model, TorusPoint, double r) {
  if (model.kind() != MeasureKind::lebesgue_torus) throw std::invalid_argument("torus points need the torus model");
  if (r < 0) throw std::invalid_argument("negative radius");
  return torus_disk_area(r);
}

namespace {

double torus_radius(double mass) {
  if (!(mass > 0)) return 0.0;
  const double pi = std::numbers::pi;
  if (mass <= pi / 4) return std::sqrt(mass / pi);
  if (mass > 1.0) throw std::domain_error(fmt::format("mass {} exceeds the torus area", mass));
  double lo = 0.5, hi = std::numbers::sqrt2 / 2;
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    (torus_disk_area(mid) >= mass ? hi : lo) = mid;
  }
  return hi;
}

double bisect_radius(const MeasureModel& model, double x, double mass, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (ball_mass(model, x, mid) >= mass ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

double radius_for_mass(const MeasureModel& model, double x, double mass) {
  if (model.kind() == MeasureKind::lebesgue_torus) return torus_radius(mass);
  if (!(mass > 0)) return 0.0;
  if (mass > 1.0 + 1e-12) throw std::domain_error(fmt::format("mass {} exceeds the total mass", mass));
  if (model.kind() == MeasureKind::lebesgue_interval) {
    const double near = std::min(x, 1.0 - x);
    return mass <= 2 * near ? 0.5 * mass : std::min(mass, 1.0) - near;
  }
  const double far = std::max(x, 1.0 - x);
  return bisect_radius(model, x, mass, 0.0, far);
}

double radius_for_mass(const MeasureModel& model, TorusPoint, double mass) {
  if (model.kind() != MeasureKind::lebesgue_torus) throw std::invalid_argument("torus points need the torus model");
  return torus_radius(mass);
}

RadiusSweep::RadiusSweep(const MeasureModel& model, double x) : model_(&model), x_(x) {}

double RadiusSweep::next(double mass) {
  if (mass > prev_mass_) throw std::logic_error("radius sweep needs nonincreasing masses");
  if (mass == prev_mass_) return prev_radius_;
  double r = 0;
  if (model_->kind() != MeasureKind::gibbs_interval || !(mass > 0) || prev_mass_ == std::numeric_limits<double>::infinity())
    r = radius_for_mass(*model_, x_, mass);
  else
    r = bisect_radius(*model_, x_, mass, 0.0, prev_radius_);
  prev_mass_ = mass;
  prev_radius_ = r;
  return r;
}

// ------------------------------------------------------------ regularity

namespace {

struct EnvelopeFit {
  double slope = 0;
  double constant = 0;
  bool ok = false;
};

// Upper envelope: per log-x bin keep the sample with the largest log-mass,
// fit a line through those, then lift the constant so every sample lies
// under the curve.
EnvelopeFit envelope_fit(const std::vector<double>& lx, const std::vector<double>& lm, double lx_min, double lx_max) {
  constexpr int kBins = 16;
  std::vector<int> best(kBins, -1);
  for (std::size_t i = 0; i < lx.size(); ++i) {
    if (!std::isfinite(lm[i])) continue;
    int b = static_cast<int>((lx[i] - lx_min) / (lx_max - lx_min) * kBins);
    b = std::clamp(b, 0, kBins - 1);
    if (best[b] < 0 || lm[i] > lm[static_cast<std::size_t>(best[b])]) best[b] = static_cast<int>(i);
  }
  std::vector<double> xs, ys;
  for (int b : best)
    if (b >= 0) {
      xs.push_back(lx[static_cast<std::size_t>(b)]);
      ys.push_back(lm[static_cast<std::size_t>(b)]);
    }
  EnvelopeFit out;
  if (xs.size() < 3) return out;
  const LineFit fit = least_squares(xs, ys);
  out.slope = fit.slope;
  double lift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lx.size(); ++i)
    if (std::isfinite(lm[i])) lift = std::max(lift, lm[i] - fit.slope * lx[i]);
  out.constant = std::exp(lift);
  out.ok = fit.slope > 0;
  return out;
}

}  // namespace

RegularityReport regularity_probe(const MeasureModel& model, std::size_t samples, std::uint64_t seed,
                                  unsigned threads) {
  if (samples < 100) throw std::invalid_argument("regularity probe needs at least 100 samples");
  constexpr double kRMin = 1e-4, kRMax = 1e-1, kEpsMin = 1e-6, kEpsMax = 1e-2, kR0 = 0.1;
  std::vector<double> lr(samples), lm(samples), le(samples), la(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    SampleRng rng(seed, i);
    const bool torus = !model.is_interval();
    auto mass_at = [&](double x, double y, double r) {
      return torus ? ball_mass(model, TorusPoint::from_double(x, y), r) : ball_mass(model, x, r);
    };
    const double x = rng.uniform();
    const double y = rng.uniform();
    const double r = kRMin * std::pow(kRMax / kRMin, rng.uniform());
    lr[i] = std::log(r);
    lm[i] = std::log(mass_at(x, y, r));
    const double x2 = rng.uniform();
    const double y2 = rng.uniform();
    const double ra = kR0 * rng.uniform();
    const double eps = kEpsMin * std::pow(kEpsMax / kEpsMin, rng.uniform());
    le[i] = std::log(eps);
    la[i] = std::log(mass_at(x2, y2, ra + eps) - mass_at(x2, y2, ra));
  });
  RegularityReport rep;
  const EnvelopeFit f = envelope_fit(lr, lm, std::log(kRMin), std::log(kRMax));
  rep.frostman_s = f.slope;
  rep.frostman_c = f.constant;
  rep.frostman_ok = f.ok;
  const EnvelopeFit a = envelope_fit(le, la, std::log(kEpsMin), std::log(kEpsMax));
  rep.annuli_alpha = a.slope;
  rep.annuli_c = a.constant;
  rep.annuli_r0 = kR0;
  rep.annuli_ok = a.ok;
  rep.frostman_samples = rep.annuli_samples = samples;
  return rep;
}

// ------------------------------------------------------------ cylinder probes

QuasiBernoulliReport quasi_bernoulli_probe(const MeasureModel& model, const IntervalMap& map,
                                           std::size_t max_total_level) {
  if (max_total_level < 2) throw std::invalid_argument("quasi-Bernoulli probe needs total level >= 2");
  std::vector<std::vector<double>> masses(max_total_level + 1);
  for (std::size_t n = 1; n <= max_total_level; ++n) masses[n] = level_masses(model, map, n);
  QuasiBernoulliReport rep;
  rep.max_total_level = max_total_level;
  rep.max_ratio = 0;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t a = 1; a < max_total_level; ++a)
    for (std::size_t b = 1; a + b <= max_total_level; ++b) {
      const auto& mw = masses[a];
      const auto& mv = masses[b];
      const auto& mwv = masses[a + b];
      const std::size_t nv = mv.size();
      for (std::size_t w = 0; w < mw.size(); ++w)
        for (std::size_t v = 0; v < nv; ++v) {
          const double denom = mw[w] * mv[v];
          if (!(denom > 0)) continue;
          const double ratio = mwv[w * nv + v] / denom;
          rep.max_ratio = std::max(rep.max_ratio, ratio);
          rep.min_ratio = std::min(rep.min_ratio, ratio);
        }
    }
  rep.constant = std::max(rep.max_ratio, rep.min_ratio > 0 ? 1.0 / rep.min_ratio : std::numeric_limits<double>::infinity());
  return rep;
}

CylinderDecayReport cylinder_decay(const MeasureModel& model, const IntervalMap& map, std::size_t max_level) {
  if (max_level < 2) throw std::invalid_argument("cylinder decay needs at least two levels");
  CylinderDecayReport rep;
  std::vector<double> xs, ys;
  for (std::size_t n = 1; n <= max_level; ++n) {
    const auto masses = level_masses(model, map, n);
    const double mx = *std::max_element(masses.begin(), masses.end());
    rep.max_mass.push_back(mx);
    xs.push_back(static_cast<double>(n));
    ys.push_back(std::log(mx));
  }
  const LineFit fit = least_squares(xs, ys);
  rep.lambda = std::exp(-fit.slope);
  rep.constant = 0;
  for (std::size_t n = 1; n <= max_level; ++n)
    rep.constant = std::max(rep.constant, rep.max_mass[n - 1] * std::pow(rep.lambda, static_cast<double>(n)));
  rep.ok = rep.lambda > 1.0;
  return rep;
}

}  // namespace rlab
