#include "rlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "rlab/numeric.hpp"
#include "rlab/parallel.hpp"

namespace rlab {

DynamicalSampler::DynamicalSampler(System system, MeasureModel model, RadiusSchedule schedule)
    : system_(std::move(system)), model_(std::move(model)), schedule_(std::move(schedule)) {
  const bool torus = std::holds_alternative<TorusAutomorphism>(system_);
  if (torus != (model_.kind() == MeasureKind::lebesgue_torus))
    throw std::invalid_argument("measure model does not match the system");
}

void DynamicalSampler::sample(SampleRng& rng, std::span<const std::uint64_t> times,
                              std::span<std::uint8_t> hits) const {
  std::size_t next = 0;
  const std::uint64_t last = times.empty() ? 0 : times.back();
  if (const auto* a = std::get_if<TorusAutomorphism>(&system_)) {
    const std::uint64_t x0 = rng();
    const TorusPoint x{x0, rng()};
    const Mat2 m = a->matrix();
    TorusPoint y = x;
    for (std::uint64_t k = 1; k <= last; ++k) {
      y = apply_mod1(m, y);
      if (k == times[next]) {
        hits[next] = torus_distance(y, x) < radius_for_mass(model_, x, schedule_.mass(k)) ? 1 : 0;
        ++next;
      }
    }
    return;
  }
  const auto& map = std::get<IntervalMap>(system_);
  const double u = rng.uniform();
  const double xs = model_.inverse_cdf(u);
  if (map.kind() == IntervalMapKind::piecewise_linear_exact) {
    const std::uint64_t x0 = TorusPoint::from_double(std::min(xs, 1.0), 0.0).x;
    const double xd = std::ldexp(static_cast<double>(x0), -64);
    RadiusSweep sweep(model_, xd);
    std::uint64_t y = x0;
    for (std::uint64_t k = 1; k <= last; ++k) {
      y = map.step_fixed(y);
      if (k == times[next]) {
        const double d = std::ldexp(static_cast<double>(y > x0 ? y - x0 : x0 - y), -64);
        hits[next] = d < sweep.next(schedule_.mass(k)) ? 1 : 0;
        ++next;
      }
    }
  } else {
    RadiusSweep sweep(model_, xs);
    double y = xs;
    for (std::uint64_t k = 1; k <= last; ++k) {
      y = map.step(y);
      if (k == times[next]) {
        hits[next] = std::fabs(y - xs) < sweep.next(schedule_.mass(k)) ? 1 : 0;
        ++next;
      }
    }
  }
}

namespace {

constexpr std::size_t kBlock = 1024;

void check_times(std::span<const std::uint64_t> times) {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] == 0 || (i > 0 && times[i] <= times[i - 1]))
      throw std::invalid_argument("event times must increase strictly from 1");
}

// Runs the sampler over all samples and hands each indicator vector to
// accumulate(block, hits). Blocks are fixed-size and independent of the
// thread count; per-block partial results are merged by the caller in
// block order.
template <class Acc, class F>
std::vector<Acc> run_blocks(const EventSampler& sampler, std::span<const std::uint64_t> times, std::size_t samples,
                            std::uint64_t seed, unsigned threads, F&& accumulate) {
  check_times(times);
  const std::size_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<Acc> acc(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<std::uint8_t> hits(times.size());
    const std::size_t end = std::min(samples, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      SampleRng rng(seed, i);
      sampler.sample(rng, times, hits);
      accumulate(acc[b], hits);
    }
  });
  return acc;
}

}  // namespace

EventEstimate estimate_event_measure(const EventSampler& sampler, std::uint64_t k, std::size_t samples,
                                     std::uint64_t seed, unsigned threads) {
  if (samples < 1000) throw std::invalid_argument("event estimates need at least 1000 samples");
  const std::uint64_t times[] = {k};
  const auto acc = run_blocks<std::uint64_t>(sampler, times, samples, seed, threads,
                                             [](std::uint64_t& c, std::span<const std::uint8_t> h) { c += h[0]; });
  std::uint64_t count = 0;
  for (auto c : acc) count += c;
  EventEstimate e;
  e.k = k;
  e.samples = samples;
  e.estimate = static_cast<double>(count) / static_cast<double>(samples);
  e.std_error = std::sqrt(e.estimate * (1 - e.estimate) / static_cast<double>(samples));
  e.target = sampler.target_mass(k);
  return e;
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::small_l:
      return "small-l";
    case Regime::mid_l:
      return "mid-l";
    case Regime::large_l:
      return "large-l";
  }
  return "unknown";
}

Regime classify_regime(std::uint64_t k, std::uint64_t l, double sigma) {
  if (k == 0 || l == 0) throw std::invalid_argument("regime needs k, l >= 1");
  if (!(sigma > 0 && sigma <= 1)) throw std::invalid_argument("sigma must lie in (0, 1]");
  const double lk = std::log(static_cast<double>(k));
  if (static_cast<double>(l) <= lk * lk) return Regime::small_l;
  if (static_cast<double>(k) <= sigma * static_cast<double>(l)) return Regime::large_l;
  return Regime::mid_l;
}

PairEstimate estimate_pair_joint(const EventSampler& sampler, std::uint64_t k, std::uint64_t l, std::size_t samples,
                                 std::uint64_t seed, double sigma, const BoundConstants& constants,
                                 unsigned threads) {
  if (samples < 1000) throw std::invalid_argument("pair estimates need at least 1000 samples");
  PairEstimate p;
  p.k = k;
  p.l = l;
  p.regime = classify_regime(k, l, sigma);
  p.samples = samples;
  struct Counts {
    std::uint64_t a = 0, b = 0, ab = 0;
  };
  const std::uint64_t times[] = {k, k + l};
  const auto acc = run_blocks<Counts>(sampler, times, samples, seed, threads, [](Counts& c, std::span<const std::uint8_t> h) {
    c.a += h[0];
    c.b += h[1];
    c.ab += h[0] & h[1];
  });
  Counts total;
  for (const auto& c : acc) {
    total.a += c.a;
    total.b += c.b;
    total.ab += c.ab;
  }
  const double n = static_cast<double>(samples);
  p.joint = static_cast<double>(total.ab) / n;
  p.joint_std_error = std::sqrt(p.joint * (1 - p.joint) / n);
  p.marginal_k = static_cast<double>(total.a) / n;
  p.marginal_kl = static_cast<double>(total.b) / n;
  p.product = p.marginal_k * p.marginal_kl;
  const double ek = std::exp(-constants.tau * static_cast<double>(k));
  const double el = std::exp(-constants.tau * static_cast<double>(l));
  p.bound_mixing = p.product + constants.c * (ek + el);
  p.bound_srt = constants.c * p.marginal_k * p.marginal_k +
                p.marginal_k * std::pow(constants.lambda, -static_cast<double>(l));
  p.bound_largel = p.product + constants.c * p.marginal_kl * ek + constants.c * el;
  return p;
}

BlockVariance estimate_block_variance(const EventSampler& sampler, std::uint64_t m, std::uint64_t n,
                                      std::size_t samples, std::uint64_t seed, unsigned threads) {
  if (m == 0 || n < m) throw std::invalid_argument("block needs 1 <= m <= n");
  if (n - m > 10000) throw std::invalid_argument("block length n - m must not exceed 1e4");
  if (samples < 1000) throw std::invalid_argument("block variance needs at least 1000 samples");
  std::vector<std::uint64_t> times;
  for (std::uint64_t k = m; k <= n; ++k) times.push_back(k);
  // exact integer power sums of X = number of hits in the block
  struct Moments {
    unsigned __int128 s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  };
  const auto acc = run_blocks<Moments>(sampler, times, samples, seed, threads, [](Moments& mo, std::span<const std::uint8_t> h) {
    unsigned __int128 x = 0;
    for (auto v : h) x += v;
    mo.s1 += x;
    mo.s2 += x * x;
    mo.s3 += x * x * x;
    mo.s4 += x * x * x * x;
  });
  Moments t;
  for (const auto& a : acc) {
    t.s1 += a.s1;
    t.s2 += a.s2;
    t.s3 += a.s3;
    t.s4 += a.s4;
  }
  const long double N = static_cast<long double>(samples);
  const long double e1 = static_cast<long double>(t.s1) / N, e2 = static_cast<long double>(t.s2) / N;
  const long double e3 = static_cast<long double>(t.s3) / N, e4 = static_cast<long double>(t.s4) / N;
  const long double var = (e2 - e1 * e1) * N / (N - 1);
  const long double m4 = e4 - 4 * e1 * e3 + 6 * e1 * e1 * e2 - 3 * e1 * e1 * e1 * e1;
  BlockVariance bv;
  bv.m = m;
  bv.n = n;
  bv.samples = samples;
  bv.variance = static_cast<double>(std::max<long double>(var, 0));
  CompensatedSum ms;
  for (std::uint64_t k = m; k <= n; ++k) ms.add(sampler.target_mass(k));
  bv.mass_sum = ms.value();
  if (bv.mass_sum > 0) {
    bv.ratio = bv.variance / bv.mass_sum;
    const long double v2 = var * var;
    const long double se = std::sqrt(std::max<long double>(m4 - v2, 0) / N);
    bv.ratio_std_error = static_cast<double>(se) / bv.mass_sum;
  }
  return bv;
}

DecayFit fit_exponential_decay(std::span<const DecayPoint> points, double floor) {
  DecayFit fit;
  std::vector<double> xs, ys;
  for (const auto& p : points)
    if (p.excess > floor && p.excess > 0) {
      xs.push_back(p.separation);
      ys.push_back(std::log(p.excess));
    }
  fit.used_points = xs.size();
  if (xs.empty()) {
    fit.status = DecayStatus::below_floor;
    fit.message = "decay below measurable floor";
    return fit;
  }
  if (xs.size() < 5) {
    fit.status = DecayStatus::failed;
    fit.message = fmt::format("only {} points above the floor; need 5", xs.size());
    return fit;
  }
  const LineFit line = least_squares(xs, ys);
  fit.rate = -line.slope;
  fit.constant = std::exp(line.intercept);
  fit.residual = line.residual;
  if (*fit.rate > 0) {
    fit.status = DecayStatus::fitted;
  } else {
    fit.status = DecayStatus::failed;
    fit.message = fmt::format("nonpositive decay rate {}", *fit.rate);
  }
  return fit;
}

}  // namespace rlab
