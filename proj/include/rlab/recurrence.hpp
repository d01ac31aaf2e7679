#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlab/measures.hpp"
#include "rlab/systems.hpp"

namespace rlab {

// Target masses M_k, k >= 1.
class RadiusSchedule {
 public:
  enum class Kind { log_squared, power, harmonic, constant, table };

  // c / log(k + k0)^2
  static RadiusSchedule log_squared(double c, double k0 = 10.0);
  // c k^-gamma
  static RadiusSchedule power(double c, double gamma);
  // c / k
  static RadiusSchedule harmonic(double c);
  static RadiusSchedule constant(double c);
  // values[k-1] for k <= size, zero afterwards
  static RadiusSchedule table(std::vector<double> values);

  double mass(std::uint64_t k) const;
  double operator()(std::uint64_t k) const { return mass(k); }

  Kind kind() const { return kind_; }
  double c() const { return c_; }
  double k0() const { return k0_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& values() const { return values_; }

  // nonincreasing with values in [0, 1]; established at construction
  bool monotone_checked() const { return true; }
  // sup over k >= 3 of M_k (log k)^2 is finite
  bool decay_certified() const;
  std::string name() const;

 private:
  RadiusSchedule() = default;
  Kind kind_ = Kind::constant;
  double c_ = 0.0;
  double k0_ = 0.0;
  double gamma_ = 0.0;
  std::vector<double> values_;
};

// Compensated partial sum of M_1..M_n.
double phi(const RadiusSchedule& schedule, std::uint64_t n);

// (S - Phi) / (Phi^{1/2} (log Phi)^{3/2 + eps}); absent unless Phi > e.
std::optional<double> deviation(double hits, double phi_value, double epsilon);

// 64, 128, 256, ... below n, then n itself.
std::vector<std::uint64_t> default_checkpoints(std::uint64_t n);

struct TraceOptions {
  std::uint64_t n = 0;
  std::vector<std::uint64_t> checkpoints;  // empty: default_checkpoints(n)
  double epsilon = 0.5;
  std::size_t hit_cap = 4096;  // stored hit indices per trace
};

struct RecurrenceTrace {
  Point x;
  double epsilon = 0.5;
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::uint64_t> hits;  // S at each checkpoint
  std::vector<double> phi;          // Phi at each checkpoint
  std::vector<std::optional<double>> deviation;
  std::vector<std::uint64_t> hit_indices;  // first hit_cap hit times
  std::uint64_t total_hits = 0;
  std::uint64_t last_hit = 0;  // 0 when the orbit never returned
  bool exact = true;           // false for floating pseudo-orbits
};

// Deviations of a finished trace for another epsilon.
std::vector<std::optional<double>> deviations_for(const RecurrenceTrace& trace, double epsilon);

// Counts k <= n with distance(T^k x, x) < r_k(x). n <= 1e8, checkpoints
// strictly increasing and <= n.
RecurrenceTrace run_trace(const System& system, const MeasureModel& model, const RadiusSchedule& schedule,
                          const Point& x, const TraceOptions& options);

// Independent traces in parallel; output order follows xs.
std::vector<RecurrenceTrace> run_traces(const System& system, const MeasureModel& model,
                                        const RadiusSchedule& schedule, std::span<const Point> xs,
                                        const TraceOptions& options, unsigned threads = 0);

// count points drawn from the model measure with streams (seed, index)
std::vector<Point> sample_points(const System& system, const MeasureModel& model, std::size_t count,
                                 std::uint64_t seed);

struct ProfileRow {
  std::uint64_t n = 0;
  double phi = 0.0;
  std::size_t present = 0;  // traces with a defined deviation
  double median_abs = 0.0;
  double q95_abs = 0.0;
  double max_abs = 0.0;
};

struct DeviationProfile {
  std::vector<ProfileRow> rows;
  bool divergent = false;  // Phi at the last checkpoint exceeds 20
  std::optional<std::size_t> reference_row;  // first row with Phi > 20
  std::optional<bool> bounded;                // only for divergent schedules
};

DeviationProfile deviation_profile(std::span<const RecurrenceTrace> traces);

}  // namespace rlab
