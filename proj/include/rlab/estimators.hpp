#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlab/measures.hpp"
#include "rlab/recurrence.hpp"
#include "rlab/rng.hpp"
#include "rlab/systems.hpp"

namespace rlab {

// Source of samples x ~ mu together with the indicators 1_{E_t}(x).
class EventSampler {
 public:
  virtual ~EventSampler() = default;
  // Draws one x from rng and writes hits[i] = 1 iff x lies in E_{times[i]}.
  // times is strictly increasing and starts at 1 or later.
  virtual void sample(SampleRng& rng, std::span<const std::uint64_t> times, std::span<std::uint8_t> hits) const = 0;
  virtual double target_mass(std::uint64_t k) const = 0;
};

// E_k = {x : d(T^k x, x) < r_k(x)} for a system, model and schedule.
class DynamicalSampler final : public EventSampler {
 public:
  DynamicalSampler(System system, MeasureModel model, RadiusSchedule schedule);
  void sample(SampleRng& rng, std::span<const std::uint64_t> times, std::span<std::uint8_t> hits) const override;
  double target_mass(std::uint64_t k) const override { return schedule_.mass(k); }

 private:
  System system_;
  MeasureModel model_;
  RadiusSchedule schedule_;
};

struct EventEstimate {
  std::uint64_t k = 0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
  double target = 0.0;
};

// samples >= 1000; sample i always uses stream (seed, i).
EventEstimate estimate_event_measure(const EventSampler& sampler, std::uint64_t k, std::size_t samples,
                                     std::uint64_t seed, unsigned threads = 0);

enum class Regime { small_l, mid_l, large_l };
std::string to_string(Regime r);

// small-l when l <= (log k)^2, otherwise large-l when k <= sigma l,
// otherwise mid-l.
Regime classify_regime(std::uint64_t k, std::uint64_t l, double sigma);

struct BoundConstants {
  double c = 1.0;
  double tau = 0.5;
  double lambda = 2.0;  // psi(l) = lambda^-l
};

struct PairEstimate {
  std::uint64_t k = 0, l = 0;
  double joint = 0.0;
  double joint_std_error = 0.0;
  double marginal_k = 0.0;   // estimated mu(E_k)
  double marginal_kl = 0.0;  // estimated mu(E_{k+l})
  double product = 0.0;
  double bound_mixing = 0.0;  // mu_k mu_kl + C (e^-tau k + e^-tau l)
  double bound_srt = 0.0;     // C mu_k^2 + mu_k lambda^-l
  double bound_largel = 0.0;  // mu_k mu_kl + C mu_kl e^-tau k + C e^-tau l
  Regime regime = Regime::small_l;
  std::size_t samples = 0;
};

PairEstimate estimate_pair_joint(const EventSampler& sampler, std::uint64_t k, std::uint64_t l, std::size_t samples,
                                 std::uint64_t seed, double sigma, const BoundConstants& constants,
                                 unsigned threads = 0);

struct BlockVariance {
  std::uint64_t m = 0, n = 0;
  std::size_t samples = 0;
  double variance = 0.0;  // S_{m,n}
  double mass_sum = 0.0;  // sum of M_k over the block
  std::optional<double> ratio;
  double ratio_std_error = 0.0;
};

// Sample variance of sum_{k=m}^{n} 1_{E_k}, divided by sum M_k.
BlockVariance estimate_block_variance(const EventSampler& sampler, std::uint64_t m, std::uint64_t n,
                                      std::size_t samples, std::uint64_t seed, unsigned threads = 0);

struct DecayPoint {
  double separation = 0.0;
  double excess = 0.0;
};

enum class DecayStatus { fitted, below_floor, failed };

struct DecayFit {
  DecayStatus status = DecayStatus::failed;
  std::optional<double> rate;
  double constant = 0.0;
  double residual = 0.0;
  std::size_t used_points = 0;
  std::string message;

  bool success() const { return status != DecayStatus::failed; }
};

// Least squares of log(excess) against separation over points with
// excess > floor. Nonpositive rates are reported as failures.
DecayFit fit_exponential_decay(std::span<const DecayPoint> points, double floor = 0.0);

}  // namespace rlab
