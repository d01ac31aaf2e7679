#include "rlab/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "rlab/numeric.hpp"
#include "rlab/parallel.hpp"
#include "rlab/rng.hpp"

namespace rlab {

// ------------------------------------------------------------ schedules

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(fmt::format("{} must give masses in [0, 1]", what));
}

}  // namespace

RadiusSchedule RadiusSchedule::log_squared(double c, double k0) {
  if (!(k0 > 0)) throw std::invalid_argument("log-squared schedule needs k0 > 0");
  if (!(c >= 0)) throw std::invalid_argument("schedule constant must be nonnegative");
  RadiusSchedule s;
  s.kind_ = Kind::log_squared;
  s.c_ = c;
  s.k0_ = k0;
  check_unit(s.mass(1), "log-squared schedule");
  return s;
}

RadiusSchedule RadiusSchedule::power(double c, double gamma) {
  if (!(c >= 0)) throw std::invalid_argument("schedule constant must be nonnegative");
  if (!(gamma >= 0)) throw std::invalid_argument("power schedule needs gamma >= 0");
  RadiusSchedule s;
  s.kind_ = Kind::power;
  s.c_ = c;
  s.gamma_ = gamma;
  check_unit(s.mass(1), "power schedule");
  return s;
}

RadiusSchedule RadiusSchedule::harmonic(double c) {
  if (!(c >= 0)) throw std::invalid_argument("schedule constant must be nonnegative");
  RadiusSchedule s;
  s.kind_ = Kind::harmonic;
  s.c_ = c;
  check_unit(s.mass(1), "harmonic schedule");
  return s;
}

RadiusSchedule RadiusSchedule::constant(double c) {
  RadiusSchedule s;
  s.kind_ = Kind::constant;
  s.c_ = c;
  check_unit(c, "constant schedule");
  return s;
}

RadiusSchedule RadiusSchedule::table(std::vector<double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    check_unit(values[i], "schedule table");
    if (i > 0 && values[i] > values[i - 1])
      throw std::invalid_argument(fmt::format("schedule table increases at k = {}", i + 1));
  }
  RadiusSchedule s;
  s.kind_ = Kind::table;
  s.values_ = std::move(values);
  return s;
}

double RadiusSchedule::mass(std::uint64_t k) const {
  if (k == 0) throw std::invalid_argument("schedule index starts at 1");
  const double kd = static_cast<double>(k);
  switch (kind_) {
    case Kind::log_squared: {
      const double l = std::log(kd + k0_);
      return c_ / (l * l);
    }
    case Kind::power:
      return c_ * std::pow(kd, -gamma_);
    case Kind::harmonic:
      return c_ / kd;
    case Kind::constant:
      return c_;
    case Kind::table:
      return k <= values_.size() ? values_[k - 1] : 0.0;
  }
  return 0.0;
}

bool RadiusSchedule::decay_certified() const {
  switch (kind_) {
    case Kind::log_squared:
    case Kind::harmonic:
    case Kind::table:
      return true;
    case Kind::power:
      return gamma_ > 0 || c_ == 0;
    case Kind::constant:
      return c_ == 0;
  }
  return false;
}

std::string RadiusSchedule::name() const {
  switch (kind_) {
    case Kind::log_squared:
      return fmt::format("log-squared(c={},k0={})", c_, k0_);
    case Kind::power:
      return fmt::format("power(c={},gamma={})", c_, gamma_);
    case Kind::harmonic:
      return fmt::format("harmonic(c={})", c_);
    case Kind::constant:
      return fmt::format("constant(c={})", c_);
    case Kind::table:
      return fmt::format("table(size={})", values_.size());
  }
  return "unknown";
}

double phi(const RadiusSchedule& schedule, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("phi needs n >= 1");
  CompensatedSum s;
  const std::uint64_t stop = schedule.kind() == RadiusSchedule::Kind::table
                                 ? std::min<std::uint64_t>(n, schedule.values().size())
                                 : n;
  for (std::uint64_t k = 1; k <= stop; ++k) s.add(schedule.mass(k));
  return s.value();
}

std::optional<double> deviation(double hits, double phi_value, double epsilon) {
  if (!(phi_value > std::numbers::e)) return std::nullopt;
  const double l = std::log(phi_value);
  return (hits - phi_value) / (std::sqrt(phi_value) * std::pow(l, 1.5 + epsilon));
}

std::vector<std::uint64_t> default_checkpoints(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("trace length must be positive");
  std::vector<std::uint64_t> out;
  for (std::uint64_t c = 64; c < n; c *= 2) out.push_back(c);
  out.push_back(n);
  return out;
}

std::vector<std::optional<double>> deviations_for(const RecurrenceTrace& trace, double epsilon) {
  std::vector<std::optional<double>> out;
  for (std::size_t i = 0; i < trace.checkpoints.size(); ++i)
    out.push_back(deviation(static_cast<double>(trace.hits[i]), trace.phi[i], epsilon));
  return out;
}

// ------------------------------------------------------------ traces

namespace {

constexpr std::uint64_t kMaxTraceLength = 100'000'000;
constexpr std::uint64_t kTableLimit = std::uint64_t{1} << 22;

// Data shared by every trace of one (system, schedule, n).
struct TraceContext {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> phi_at;
  std::vector<double> masses;    // M_k at index k-1 when n <= kTableLimit
  std::vector<double> torus_r;   // r_k for the torus model, same indexing
  const RadiusSchedule* schedule = nullptr;
  const MeasureModel* model = nullptr;

  double mass(std::uint64_t k) const { return masses.empty() ? schedule->mass(k) : masses[k - 1]; }
  double torus_radius(std::uint64_t k) const {
    return torus_r.empty() ? radius_for_mass(*model, TorusPoint{}, schedule->mass(k)) : torus_r[k - 1];
  }
};

TraceContext make_context(const System& system, const MeasureModel& model, const RadiusSchedule& schedule,
                          const TraceOptions& options) {
  if (options.n == 0 || options.n > kMaxTraceLength)
    throw std::invalid_argument(fmt::format("trace length must lie in [1, {}]", kMaxTraceLength));
  if (!(options.epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  const bool torus = std::holds_alternative<TorusAutomorphism>(system);
  if (torus != (model.kind() == MeasureKind::lebesgue_torus))
    throw std::invalid_argument("measure model does not match the system");
  TraceContext ctx;
  ctx.schedule = &schedule;
  ctx.model = &model;
  ctx.checkpoints = options.checkpoints.empty() ? default_checkpoints(options.n) : options.checkpoints;
  for (std::size_t i = 0; i < ctx.checkpoints.size(); ++i) {
    const auto c = ctx.checkpoints[i];
    if (c == 0 || c > options.n || (i > 0 && c <= ctx.checkpoints[i - 1]))
      throw std::invalid_argument("checkpoints must increase strictly within [1, n]");
  }
  if (options.n <= kTableLimit) {
    ctx.masses.resize(options.n);
    for (std::uint64_t k = 1; k <= options.n; ++k) ctx.masses[k - 1] = schedule.mass(k);
    if (torus) {
      ctx.torus_r.resize(options.n);
      for (std::uint64_t k = 1; k <= options.n; ++k) ctx.torus_r[k - 1] = radius_for_mass(model, TorusPoint{}, ctx.masses[k - 1]);
    }
  }
  // Phi at checkpoints: one compensated running sum in index order
  CompensatedSum s;
  std::size_t ci = 0;
  for (std::uint64_t k = 1; ci < ctx.checkpoints.size(); ++k) {
    s.add(ctx.mass(k));
    if (k == ctx.checkpoints[ci]) {
      ctx.phi_at.push_back(s.value());
      ++ci;
    }
  }
  return ctx;
}

class HitRecorder {
 public:
  HitRecorder(RecurrenceTrace& t, const TraceContext& ctx, std::size_t cap) : t_(t), ctx_(ctx), cap_(cap) {}

  void hit(std::uint64_t k) {
    ++s_;
    t_.last_hit = k;
    if (t_.hit_indices.size() < cap_) t_.hit_indices.push_back(k);
  }
  // returns true once every checkpoint is filled
  bool tick(std::uint64_t k) {
    if (k == ctx_.checkpoints[ci_]) {
      t_.hits.push_back(s_);
      ++ci_;
    }
    return ci_ == ctx_.checkpoints.size();
  }
  std::uint64_t total() const { return s_; }

 private:
  RecurrenceTrace& t_;
  const TraceContext& ctx_;
  std::size_t cap_;
  std::uint64_t s_ = 0;
  std::size_t ci_ = 0;
};

RecurrenceTrace trace_with_context(const System& system, const MeasureModel& model, const TraceContext& ctx,
                                   const Point& x, const TraceOptions& options) {
  RecurrenceTrace t;
  t.epsilon = options.epsilon;
  t.checkpoints = ctx.checkpoints;
  t.phi = ctx.phi_at;
  HitRecorder rec(t, ctx, options.hit_cap);
  const std::uint64_t n = ctx.checkpoints.back();

  if (const auto* a = std::get_if<TorusAutomorphism>(&system)) {
    const auto* p = std::get_if<TorusPoint>(&x);
    if (!p) throw std::invalid_argument("torus systems need torus points");
    t.x = *p;
    const Mat2 m = a->matrix();
    TorusPoint y = *p;
    for (std::uint64_t k = 1; k <= n; ++k) {
      y = apply_mod1(m, y);
      if (torus_distance(y, *p) < ctx.torus_radius(k)) rec.hit(k);
      if (rec.tick(k)) break;
    }
  } else {
    const auto& map = std::get<IntervalMap>(system);
    const auto* px = std::get_if<double>(&x);
    if (!px) throw std::invalid_argument("interval systems need real points");
    if (!(*px >= 0.0 && *px <= 1.0)) throw std::invalid_argument("interval point outside [0, 1]");
    if (map.kind() == IntervalMapKind::piecewise_linear_exact) {
      const std::uint64_t x0 = TorusPoint::from_double(*px, 0.0).x;
      const double xd = std::ldexp(static_cast<double>(x0), -64);
      t.x = xd;
      RadiusSweep sweep(model, xd);
      std::uint64_t u = x0;
      for (std::uint64_t k = 1; k <= n; ++k) {
        u = map.step_fixed(u);
        const double d = std::ldexp(static_cast<double>(u > x0 ? u - x0 : x0 - u), -64);
        if (d < sweep.next(ctx.mass(k))) rec.hit(k);
        if (rec.tick(k)) break;
      }
    } else {
      t.exact = false;
      t.x = *px;
      RadiusSweep sweep(model, *px);
      double y = *px;
      for (std::uint64_t k = 1; k <= n; ++k) {
        y = map.step(y);
        if (std::fabs(y - *px) < sweep.next(ctx.mass(k))) rec.hit(k);
        if (rec.tick(k)) break;
      }
    }
  }
  t.total_hits = rec.total();
  for (std::size_t i = 0; i < t.checkpoints.size(); ++i)
    t.deviation.push_back(deviation(static_cast<double>(t.hits[i]), t.phi[i], t.epsilon));
  return t;
}

}  // namespace

RecurrenceTrace run_trace(const System& system, const MeasureModel& model, const RadiusSchedule& schedule,
                          const Point& x, const TraceOptions& options) {
  const TraceContext ctx = make_context(system, model, schedule, options);
  return trace_with_context(system, model, ctx, x, options);
}

std::vector<RecurrenceTrace> run_traces(const System& system, const MeasureModel& model,
                                        const RadiusSchedule& schedule, std::span<const Point> xs,
                                        const TraceOptions& options, unsigned threads) {
  const TraceContext ctx = make_context(system, model, schedule, options);
  std::vector<RecurrenceTrace> out(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = trace_with_context(system, model, ctx, xs[i], options); });
  return out;
}

std::vector<Point> sample_points(const System& system, const MeasureModel& model, std::size_t count,
                                 std::uint64_t seed) {
  std::vector<Point> out;
  out.reserve(count);
  const bool torus = std::holds_alternative<TorusAutomorphism>(system);
  for (std::size_t i = 0; i < count; ++i) {
    SampleRng rng(seed, i);
    if (torus) {
      const std::uint64_t a = rng();
      out.emplace_back(TorusPoint{a, rng()});
    } else {
      out.emplace_back(model.inverse_cdf(rng.uniform()));
    }
  }
  return out;
}

// ------------------------------------------------------------ profile

DeviationProfile deviation_profile(std::span<const RecurrenceTrace> traces) {
  if (traces.size() < 2) throw std::invalid_argument("deviation profile needs at least two traces");
  const auto& cps = traces.front().checkpoints;
  for (const auto& t : traces)
    if (t.checkpoints != cps) throw std::invalid_argument("traces have different checkpoints");
  DeviationProfile prof;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    ProfileRow row;
    row.n = cps[i];
    row.phi = traces.front().phi[i];
    std::vector<double> abs_d;
    for (const auto& t : traces)
      if (t.deviation[i]) abs_d.push_back(std::fabs(*t.deviation[i]));
    row.present = abs_d.size();
    if (!abs_d.empty()) {
      row.median_abs = quantile(abs_d, 0.5);
      row.q95_abs = quantile(abs_d, 0.95);
      row.max_abs = *std::max_element(abs_d.begin(), abs_d.end());
    }
    if (!prof.reference_row && row.phi > 20.0) prof.reference_row = i;
    prof.rows.push_back(row);
  }
  prof.divergent = !prof.rows.empty() && prof.rows.back().phi > 20.0;
  if (prof.divergent && prof.reference_row) {
    const auto& ref = prof.rows[*prof.reference_row];
    prof.bounded = prof.rows.back().q95_abs <= 2.0 * ref.q95_abs;
  }
  return prof;
}

}  // namespace rlab
