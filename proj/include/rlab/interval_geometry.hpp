#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlab/measures.hpp"
#include "rlab/recurrence.hpp"
#include "rlab/systems.hpp"

namespace rlab {

// Largest m^k for which all level-k components are listed explicitly.
inline constexpr std::uint64_t kMaxExactWords = 600000;

// g_w = g_{w_1} o ... o g_{w_k}, the inverse of T^k on the cylinder C_w.
// Linear maps keep g_w in closed affine form c + s u.
class InverseChain {
 public:
  explicit InverseChain(const IntervalMap& map);

  // g_w o g_d, the chain of the word w.d
  InverseChain then(int digit) const;
  long double operator()(long double u) const;

  std::size_t level() const { return digits_.size(); }
  const std::vector<int>& digits() const { return digits_; }
  bool affine() const { return affine_; }
  // sign of the derivative of g_w
  int orientation() const { return orientation_; }
  long double offset() const { return c_; }
  long double slope() const { return s_; }

 private:
  const IntervalMap* map_;
  std::vector<int> digits_;
  bool affine_ = true;
  int orientation_ = 1;
  long double c_ = 0, s_ = 1;
};

// One component I_w = {t in C_w : |T^k t - t| < r_k(t)} of E_k. The image
// T^k I_w is (image_lo, image_hi).
struct EventComponent {
  CylinderWord word;
  double a = 0.0, b = 0.0;  // I_w = (a, b)
  double p = 0.0;           // period-k point of C_w
  double image_lo = 0.0, image_hi = 0.0;
  double mass = 0.0;        // mu(I_w)
  double image_mass = 0.0;  // mu(T^k I_w)
  double cylinder_mass = 0.0;
  bool clamped_lo = false, clamped_hi = false;  // image reaches 0 or 1
  int orientation = 1;
};

// Component inside the cylinder of the given chain.
EventComponent event_component(const IntervalMap& map, const MeasureModel& model, const InverseChain& chain,
                               double mass);

// All m^k components in word order. Throws std::invalid_argument beyond
// kMaxExactWords words or for a non-interval model.
std::vector<EventComponent> event_components(const IntervalMap& map, const MeasureModel& model, unsigned k,
                                             double mass, unsigned threads = 0);

// mu(E_k). Linear maps with Lebesgue measure use a closed form for all
// cylinders away from the boundary; otherwise at most kMaxExactWords words.
double interval_event_measure(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                              unsigned threads = 0);

struct ThreeBallReport {
  unsigned k = 0;
  double mass = 0.0;
  std::size_t components = 0;
  double max_ratio = 0.0;  // max mu(T^k I) / M_k
  std::string worst_word;
  std::size_t ratio_violations = 0;  // mu(T^k I) > 3 M_k + tol
  std::size_t cover_failures = 0;    // three-ball (or one-ball) cover fails
  std::string first_failure;
  bool ok = true;
};

ThreeBallReport check_three_ball_cover(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                                       unsigned threads = 0);

struct ComponentMassReport {
  unsigned k = 0;
  double mass = 0.0;
  double max_constant = 0.0;  // max mu(I_w) / (M_k mu(C_w))
  std::string worst_word;
  std::size_t skipped = 0;  // cylinders lighter than 10x the model tolerance
};

ComponentMassReport check_component_mass(const IntervalMap& map, const MeasureModel& model, unsigned k, double mass,
                                         unsigned threads = 0);

struct JointMeasure {
  double joint = 0.0;  // mu(E_k intersect E_{k+l})
  double m_k = 0.0;
  double m_kl = 0.0;
  std::uint64_t leaves = 0;  // level k+l components visited
};

// Intersects each I_w with the components of E_{k+l} inside it, descending
// only into cylinders that meet I_w. Throws std::length_error when more
// than leaf_budget components would be visited.
JointMeasure exact_joint_measure(const IntervalMap& map, const MeasureModel& model, unsigned k, unsigned l,
                                 double mass_k, double mass_kl, unsigned threads = 0,
                                 std::uint64_t leaf_budget = 200'000'000);

struct ShortReturnRow {
  unsigned l = 0;
  double joint = 0.0;
  double m_k = 0.0, m_kl = 0.0;
  double product = 0.0;
  double bound_unit = 0.0;  // m_k m_kl + m_kl lambda^-l
  double ratio = 0.0;       // joint / bound_unit
};

struct ShortReturnReport {
  unsigned k = 0;
  std::vector<ShortReturnRow> rows;
  double lambda = 0.0;    // cylinder decay rate of the model
  double constant = 0.0;  // max ratio over rows
  bool ok = false;        // lambda > 1 and the constant is finite
};

// Requires m^{k + l_max} <= kMaxExactWords.
ShortReturnReport short_return_check(const IntervalMap& map, const MeasureModel& model,
                                     const RadiusSchedule& schedule, unsigned k, unsigned l_max,
                                     unsigned threads = 0);

}  // namespace rlab
