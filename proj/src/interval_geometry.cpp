#include "rlab/interval_geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "rlab/numeric.hpp"
#include "rlab/parallel.hpp"

namespace rlab {

using ld = long double;

InverseChain::InverseChain(const IntervalMap& map)
    : map_(&map), affine_(map.kind() == IntervalMapKind::piecewise_linear_exact) {}

InverseChain InverseChain::then(int digit) const {
  if (digit < 0 || digit >= map_->branch_count()) throw std::invalid_argument("digit outside the branch range");
  InverseChain next = *this;
  next.digits_.push_back(digit);
  const bool rev = map_->reversed(digit);
  if (rev) next.orientation_ = -orientation_;
  if (affine_) {
    const ld m = map_->branch_count();
    const ld cd = rev ? (digit + 1) / m : digit / m;
    const ld sd = rev ? -1 / m : 1 / m;
    next.c_ = c_ + s_ * cd;
    next.s_ = s_ * sd;
  }
  return next;
}

long double InverseChain::operator()(long double u) const {
  if (affine_) return c_ + s_ * u;
  CylinderWord w{digits_};
  return compose_inverse(*map_, w, static_cast<double>(u));
}

namespace {

bool lebesgue(const MeasureModel& model) { return model.kind() == MeasureKind::lebesgue_interval; }

void check_inputs(const IntervalMap& map, const MeasureModel& model, double mass) {
  (void)map;
  if (!model.is_interval()) throw std::invalid_argument("interval geometry needs an interval measure");
  if (!(mass >= 0 && mass <= 1)) throw std::invalid_argument(fmt::format("target mass {} outside [0, 1]", mass));
}

std::uint64_t word_count(int m, unsigned k) {
  std::uint64_t n = 1;
  for (unsigned i = 0; i < k; ++i) {
    if (n > kMaxExactWords) return kMaxExactWords + 1;
    n *= static_cast<std::uint64_t>(m);
  }
  return n;
}

void check_word_cap(const IntervalMap& map, unsigned k) {
  if (word_count(map.branch_count(), k) > kMaxExactWords)
    throw std::invalid_argument(fmt::format("{}^{} cylinder words exceed the exact-mode cap of {}", map.branch_count(),
                                            k, kMaxExactWords));
}

// closed-form Lebesgue radius on [0,1]
ld lebesgue_radius(ld t, ld mass) {
  const ld near = std::min(t, 1 - t);
  return mass <= 2 * near ? mass / 2 : mass - near;
}

ld radius_at(const MeasureModel& model, ld t, double mass) {
  t = std::clamp<ld>(t, 0, 1);
  if (lebesgue(model)) return lebesgue_radius(t, mass);
  return radius_for_mass(model, static_cast<double>(t), mass);
}

ld mass_between(const MeasureModel& model, ld lo, ld hi) {
  if (!(hi > lo)) return 0;
  if (lebesgue(model)) return hi - lo;
  return static_cast<ld>(model.cdf(static_cast<double>(hi))) - static_cast<ld>(model.cdf(static_cast<double>(lo)));
}

// Image endpoints u_lo <= p <= u_hi of a component in the coordinate u = T^k t.
struct Solved {
  ld p = 0, u_lo = 0, u_hi = 0;
  bool clamped_lo = false, clamped_hi = false;
};

// g(u) = |u - G(u)| - r(G(u)) on the side sigma of p, with G(u) = c + s u.
ld affine_gap(ld c, ld s, ld p, int sigma, ld u, ld mass) {
  return (1 - s) * sigma * (u - p) - lebesgue_radius(std::clamp<ld>(c + s * u, 0, 1), mass);
}

ld affine_root(ld c, ld s, ld p, int sigma, ld mass) {
  // r is affine in t on three pieces; solve each and keep the consistent one
  const ld k = (1 - s) * sigma;
  const ld candidates[] = {
      p + sigma * mass / (2 * (1 - s)),
      (mass - c + k * p) / (k + s),
      (mass - 1 + c + k * p) / (k - s),
  };
  const ld lo = sigma > 0 ? p : 0, hi = sigma > 0 ? 1 : p;
  ld best = sigma > 0 ? hi : lo, best_gap = std::numeric_limits<ld>::infinity();
  for (ld u : candidates) {
    if (!std::isfinite(u) || u < lo || u > hi) continue;
    const ld g = std::fabs(affine_gap(c, s, p, sigma, u, mass));
    if (g < best_gap) {
      best_gap = g;
      best = u;
    }
  }
  return best;
}

Solved solve_affine_lebesgue(const InverseChain& chain, double mass) {
  Solved r;
  const ld c = chain.offset(), s = chain.slope();
  r.p = c / (1 - s);
  if (mass <= 0) {
    r.u_lo = r.u_hi = r.p;
    return r;
  }
  if (affine_gap(c, s, r.p, 1, 1, mass) < 0) {
    r.u_hi = 1;
    r.clamped_hi = true;
  } else {
    r.u_hi = affine_root(c, s, r.p, 1, mass);
  }
  if (affine_gap(c, s, r.p, -1, 0, mass) < 0) {
    r.u_lo = 0;
    r.clamped_lo = true;
  } else {
    r.u_lo = affine_root(c, s, r.p, -1, mass);
  }
  return r;
}

Solved solve_general(const IntervalMap& map, const MeasureModel& model, const InverseChain& chain, double mass) {
  Solved r;
  if (chain.affine())
    r.p = chain.offset() / (1 - chain.slope());
  else
    r.p = periodic_point_of_cylinder(map, CylinderWord{chain.digits()});
  if (mass <= 0) {
    r.u_lo = r.u_hi = r.p;
    return r;
  }
  const double p = static_cast<double>(r.p);
  auto gap = [&](double u) {
    const ld t = chain(u);
    return static_cast<double>(std::fabs(static_cast<ld>(u) - t) - radius_at(model, t, mass));
  };
  auto tol = [](double a, double b) { return std::fabs(b - a) <= 1e-15; };
  auto root = [&](double lo, double hi, double flo, double fhi) {
    std::uintmax_t iters = 200;
    const auto br = boost::math::tools::toms748_solve(gap, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (br.first + br.second);
  };
  const double g_p = gap(p);
  const double g_hi = gap(1.0);
  if (g_hi < 0) {
    r.u_hi = 1;
    r.clamped_hi = true;
  } else {
    r.u_hi = g_hi == 0 ? 1.0 : root(p, 1.0, g_p, g_hi);
  }
  const double g_lo = gap(0.0);
  if (g_lo < 0) {
    r.u_lo = 0;
    r.clamped_lo = true;
  } else {
    r.u_lo = g_lo == 0 ? 0.0 : root(0.0, p, g_lo, g_p);
  }
  return r;
}

Solved solve(const IntervalMap& map, const MeasureModel& model, const InverseChain& chain, double mass) {
  if (chain.affine() && lebesgue(model)) return solve_affine_lebesgue(chain, mass);
  return solve_general(map, model, chain, mass);
}

// t-space endpoints and mass of a solved component
struct Piece {
  ld a = 0, b = 0, mass = 0;
};

Piece piece_of(const MeasureModel& model, const InverseChain& chain, const Solved& s) {
  Piece pc;
  if (!(s.u_hi > s.u_lo)) {
    pc.a = pc.b = s.p;
    return pc;
  }
  const ld t1 = chain(s.u_lo), t2 = chain(s.u_hi);
  pc.a = std::min(t1, t2);
  pc.b = std::max(t1, t2);
  if (chain.affine() && lebesgue(model))
    pc.mass = std::fabs(chain.slope()) * (s.u_hi - s.u_lo);
  else
    pc.mass = mass_between(model, pc.a, pc.b);
  return pc;
}

InverseChain chain_for(const IntervalMap& map, const CylinderWord& w) {
  InverseChain ch(map);
  for (int d : w.digits) ch = ch.then(d);
  return ch;
}

}  // namespace

EventComponent event_component(const IntervalMap& map, const MeasureModel& model, const InverseChain& chain,
                               double mass) {
  check_inputs(map, model, mass);
  if (chain.level() == 0) throw std::invalid_argument("component needs a nonempty word");
  const Solved s = solve(map, model, chain, mass);
  const Piece pc = piece_of(model, chain, s);
  EventComponent c;
  c.word = CylinderWord{chain.digits()};
  c.p = static_cast<double>(s.p);
  c.a = static_cast<double>(pc.a);
  c.b = static_cast<double>(pc.b);
  c.image_lo = static_cast<double>(s.u_lo);
  c.image_hi = static_cast<double>(s.u_hi);
  c.mass = static_cast<double>(pc.mass);
  c.image_mass = static_cast<double>(mass_between(model, s.u_lo, s.u_hi));
  const ld c0 = chain(0), c1 = chain(1);
  c.cylinder_mass = static_cast<double>(mass_between(model, std::min(c0, c1), std::max(c0, c1)));
  c.clamped_lo = s.clamped_lo;
  c.clamped_hi = s.clamped_hi;
  c.orientation = chain.orientation();
  return c;
}

std::vector<EventComponent> event_components(const IntervalMap& map, const MeasureModel& model, unsigned k,
                                             double mass, unsigned threads) {
  check_inputs(map, model, mass);
  if (k == 0) throw std::invalid_argument("k must be positive");
  check_word_cap(map, k);
  const std::uint64_t n = word_count(map.branch_count(), k);
  std::vector<EventComponent> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out[i] = event_component(map, model, chain_for(map, word_from_index(i, map.branch_count(), k)), mass);
  });
  return out;
}

namespace {

// Sum of closed-form component masses over all level-n descendants of a
// cylinder lying well inside (0,1), for linear maps with Lebesgue measure.
struct InteriorShortcut {
  int m = 0;
  int reversed = 0;
  unsigned n = 0;
  ld mass = 0;
  ld scale = 0;  // m^-n
  ld margin = 0;

  InteriorShortcut(const IntervalMap& map, unsigned level, double mass_) : m(map.branch_count()), n(level), mass(mass_) {
    for (int j = 0; j < m; ++j) reversed += map.reversed(j) ? 1 : 0;
    scale = std::pow(static_cast<ld>(m), -static_cast<ld>(n));
    const ld hmax = mass / (2 * (1 - scale));
    margin = std::max(hmax, mass / 2 + scale * hmax) + 1e-15L;
  }

  bool applies(ld t0, ld t1) const { return t0 >= margin && t1 <= 1 - margin; }

  ld total(unsigned level, int orientation) const {
    ld same = 1, flip = 0;
    for (unsigned i = level; i < n; ++i) {
      const ld s2 = same * (m - reversed) + flip * reversed;
      const ld f2 = same * reversed + flip * (m - reversed);
      same = s2;
      flip = f2;
    }
    const ld pos = orientation > 0 ? same : flip, neg = orientation > 0 ? flip : same;
    return pos * scale * mass / (1 - scale) + neg * scale * mass / (1 + scale);
  }
};

ld descend_measure(const IntervalMap& map, const MeasureModel& model, const InverseChain& chain, unsigned n,
                   double mass, const InteriorShortcut& shortcut) {
  if (chain.level() == n) return piece_of(model, chain, solve(map, model, chain, mass)).mass;
  const ld c0 = chain(0), c1 = chain(1);
  if (shortcut.applies(std::min(c0, c1), std::max(c0, c1))) return shortcut.total(static_cast<unsigned>(chain.level()), chain.orientation());
  ld sum = 0;
  for (int d = 0; d < map.branch_count(); ++d) sum += descend_measure(map, model, chain.then(d), n, mass, shortcut);
  return sum;
}

}  // namespace

double interval_event_measure(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                              unsigned threads) {
  check_inputs(map, model, mass);
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (mass <= 0) return 0.0;
  if (map.kind() == IntervalMapKind::piecewise_linear_exact && lebesgue(model)) {
    const InteriorShortcut shortcut(map, k, mass);
    const int m = map.branch_count();
    // split the top of the tree into independent subtrees
    unsigned top = 0;
    std::uint64_t roots = 1;
    while (top < k && roots < 4096) {
      roots *= static_cast<std::uint64_t>(m);
      ++top;
    }
    std::vector<ld> part(roots, 0);
    parallel_for(roots, threads, [&](std::size_t i) {
      part[i] = descend_measure(map, model, chain_for(map, word_from_index(i, m, top)), k, mass, shortcut);
    });
    ld sum = 0;
    for (ld v : part) sum += v;
    return static_cast<double>(sum);
  }
  const auto comps = event_components(map, model, k, mass, threads);
  CompensatedSum s;
  for (const auto& c : comps) s.add(c.mass);
  return s.value();
}

ThreeBallReport check_three_ball_cover(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                                       unsigned threads) {
  ThreeBallReport rep;
  rep.k = k;
  rep.mass = mass;
  const auto comps = event_components(map, model, k, mass, threads);
  rep.components = comps.size();
  const double tol = model.tolerance();
  constexpr double kMerge = 1e-12;
  for (const auto& c : comps) {
    if (!(c.image_hi > c.image_lo)) continue;
    const double ratio = mass > 0 ? c.image_mass / mass : 0.0;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst_word = c.word.to_string();
    }
    if (c.image_mass > 3 * mass + tol) ++rep.ratio_violations;
    bool covered;
    auto ball = [&](double x) {
      const double r = static_cast<double>(radius_at(model, x, mass));
      return Interval{x - r, x + r};
    };
    if (c.orientation < 0) {
      const Interval b = ball(c.p);
      covered = c.image_lo >= b.lo - kMerge && c.image_hi <= b.hi + kMerge;
    } else {
      Interval balls[] = {ball(c.a), ball(c.p), ball(c.b)};
      std::sort(std::begin(balls), std::end(balls), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
      double reach = c.image_lo;
      for (const auto& b : balls)
        if (b.lo <= reach + kMerge) reach = std::max(reach, b.hi);
      covered = reach >= c.image_hi - kMerge;
    }
    if (!covered) {
      if (rep.cover_failures == 0) rep.first_failure = c.word.to_string();
      ++rep.cover_failures;
    }
  }
  rep.ok = rep.ratio_violations == 0 && rep.cover_failures == 0;
  return rep;
}

ComponentMassReport check_component_mass(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                                         unsigned threads) {
  ComponentMassReport rep;
  rep.k = k;
  rep.mass = mass;
  if (mass <= 0) return rep;
  const auto comps = event_components(map, model, k, mass, threads);
  const double floor = 10 * model.tolerance();
  for (const auto& c : comps) {
    if (!(c.cylinder_mass > 0)) continue;
    if (c.cylinder_mass < floor) {
      ++rep.skipped;
      continue;
    }
    const double ratio = c.mass / (mass * c.cylinder_mass);
    if (ratio > rep.max_constant) {
      rep.max_constant = ratio;
      rep.worst_word = c.word.to_string();
    }
  }
  return rep;
}

namespace {

struct JointWalker {
  const IntervalMap& map;
  const MeasureModel& model;
  unsigned depth;  // target level k + l
  double mass;
  std::atomic<std::uint64_t>& leaves;
  std::uint64_t budget;

  ld run(const InverseChain& chain, ld a, ld b) const {
    if (chain.level() == depth) {
      if (leaves.fetch_add(1, std::memory_order_relaxed) >= budget)
        throw std::length_error(fmt::format("joint measure needs more than {} level-{} components", budget, depth));
      const Piece pc = piece_of(model, chain, solve(map, model, chain, mass));
      const ld lo = std::max(a, pc.a), hi = std::min(b, pc.b);
      if (!(hi > lo)) return 0;
      if (lebesgue(model)) return hi - lo;
      return mass_between(model, lo, hi);
    }
    ld sum = 0;
    for (int d = 0; d < map.branch_count(); ++d) {
      const InverseChain child = chain.then(d);
      const ld c0 = child(0), c1 = child(1);
      if (std::max(c0, c1) <= a || std::min(c0, c1) >= b) continue;
      sum += run(child, a, b);
    }
    return sum;
  }
};

}  // namespace

JointMeasure exact_joint_measure(const IntervalMap& map, const MeasureModel& model, unsigned k, unsigned l,
                                 double mass_k, double mass_kl, unsigned threads, std::uint64_t leaf_budget) {
  check_inputs(map, model, mass_k);
  check_inputs(map, model, mass_kl);
  if (k == 0 || l == 0) throw std::invalid_argument("joint measure needs k, l >= 1");
  check_word_cap(map, k);
  JointMeasure jm;
  jm.m_k = interval_event_measure(map, model, k, mass_k, threads);
  jm.m_kl = interval_event_measure(map, model, k + l, mass_kl, threads);
  if (mass_k <= 0 || mass_kl <= 0) return jm;
  const std::uint64_t n = word_count(map.branch_count(), k);
  std::atomic<std::uint64_t> leaves{0};
  const JointWalker walker{map, model, k + l, mass_kl, leaves, leaf_budget};
  std::vector<ld> part(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const InverseChain chain = chain_for(map, word_from_index(i, map.branch_count(), k));
    const Piece pc = piece_of(model, chain, solve(map, model, chain, mass_k));
    if (pc.b > pc.a) part[i] = walker.run(chain, pc.a, pc.b);
  });
  ld sum = 0;
  for (ld v : part) sum += v;
  jm.joint = static_cast<double>(sum);
  jm.leaves = leaves.load();
  return jm;
}

ShortReturnReport short_return_check(const IntervalMap& map, const MeasureModel& model,
                                     const RadiusSchedule& schedule, unsigned k, unsigned l_max, unsigned threads) {
  if (k == 0 || l_max == 0) throw std::invalid_argument("short-return check needs k, l_max >= 1");
  check_word_cap(map, k + l_max);
  ShortReturnReport rep;
  rep.k = k;
  std::size_t level = 1;
  while (level < 8 && word_count(map.branch_count(), static_cast<unsigned>(level + 1)) <= kMaxExactWords) ++level;
  rep.lambda = cylinder_decay(model, map, level).lambda;
  const double mk = schedule.mass(k);
  for (unsigned l = 1; l <= l_max; ++l) {
    const JointMeasure jm = exact_joint_measure(map, model, k, l, mk, schedule.mass(k + l), threads);
    ShortReturnRow row;
    row.l = l;
    row.joint = jm.joint;
    row.m_k = jm.m_k;
    row.m_kl = jm.m_kl;
    row.product = jm.m_k * jm.m_kl;
    row.bound_unit = row.product + jm.m_kl * std::pow(rep.lambda, -static_cast<double>(l));
    row.ratio = row.bound_unit > 0 ? row.joint / row.bound_unit : 0.0;
    rep.constant = std::max(rep.constant, row.ratio);
    rep.rows.push_back(row);
  }
  rep.ok = rep.lambda > 1 && std::isfinite(rep.constant);
  return rep;
}

}  // namespace rlab
