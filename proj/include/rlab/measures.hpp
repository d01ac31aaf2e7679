#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rlab/systems.hpp"

namespace rlab {

enum class MeasureKind { lebesgue_interval, lebesgue_torus, gibbs_interval };

// Potential phi, evaluated on the preimage parametrization: value(j, y) is
// phi(g_j(y)). Branch-constant potentials (Bernoulli weights) are thus free
// of endpoint ambiguity.
struct PotentialSpec {
  std::string name;
  std::function<double(int, double)> value;
  double holder_exponent = 1.0;
  bool normalized = false;

  // phi = -log|T'|; its equilibrium state is the absolutely continuous measure
  static PotentialSpec geometric(const IntervalMap& map);
  // phi = log p_j on branch j
  static PotentialSpec bernoulli(std::vector<double> weights);
  static PotentialSpec constant(double c);
};

struct GibbsDiagnostics {
  double eigenvalue = 1.0;             // leading eigenvalue before normalization
  double eigenvalue_mismatch = 0.0;    // |left estimate - right estimate|
  double normalized_eigenvalue = 1.0;  // re-estimated after phi -> phi - log(eigenvalue)
  int iterations = 0;
  double h_min = 1.0;
  double h_max = 1.0;
};

class MeasureModel {
 public:
  static MeasureModel lebesgue_interval();
  static MeasureModel lebesgue_torus();
  // Assembles a Gibbs model from tables; used by build_gibbs and load_gibbs.
  static MeasureModel gibbs_from_tables(int grid_level, std::vector<double> cdf, std::vector<double> density,
                                        double error_bound, GibbsDiagnostics diagnostics, std::string map_name,
                                        std::string potential_name);

  MeasureKind kind() const { return kind_; }
  bool is_interval() const { return kind_ != MeasureKind::lebesgue_torus; }

  // Distribution function on [0,1]; interval kinds only.
  double cdf(double t) const;
  // Smallest t with cdf(t) >= u.
  double inverse_cdf(double u) const;

  // Mass tolerance for comparisons: 1e-12 for closed forms,
  // max(1e-9, 2 error_bound) for Gibbs tables.
  double tolerance() const;
  double error_bound() const { return error_bound_; }

  int grid_level() const { return grid_level_; }
  std::span<const double> cdf_table() const { return cdf_; }
  std::span<const double> density_table() const { return density_; }
  const GibbsDiagnostics& diagnostics() const { return diagnostics_; }
  const std::string& map_name() const { return map_name_; }
  const std::string& potential_name() const { return potential_name_; }
  std::string name() const;

 private:
  MeasureKind kind_ = MeasureKind::lebesgue_interval;
  int grid_level_ = 0;
  std::vector<double> cdf_;      // 2^L + 1 values on grid endpoints
  std::vector<double> density_;  // 2^L cell densities (mass * 2^L)
  double error_bound_ = 0.0;
  GibbsDiagnostics diagnostics_;
  std::string map_name_;
  std::string potential_name_;
};

// Ulam discretization of the transfer operator on 2^L equal cells. Throws
// std::runtime_error if power iteration does not settle in 1e5 steps.
MeasureModel build_gibbs(const IntervalMap& map, const PotentialSpec& phi, int grid_level);

// Binary sidecar: versioned header, grid level, diagnostics, CDF and density
// tables. Little-endian IEEE doubles.
void save_gibbs(const MeasureModel& model, const std::filesystem::path& path);
MeasureModel load_gibbs(const std::filesystem::path& path);

double cylinder_measure(const MeasureModel& model, const IntervalMap& map, const CylinderWord& w);
// masses of all level-k cylinders, indexed as in word_from_index
std::vector<double> level_masses(const MeasureModel& model, const IntervalMap& map, std::size_t level);

// Area of a disk of radius r on the flat torus R^2/Z^2.
double torus_disk_area(double r);

double ball_mass(const MeasureModel& model, double x, double r);
double ball_mass(const MeasureModel& model, TorusPoint x, double r);

// inf{r >= 0 : ball_mass(x, r) >= M}. M <= 0 gives 0. Throws
// std::domain_error when M exceeds the reachable mass.
double radius_for_mass(const MeasureModel& model, double x, double mass);
double radius_for_mass(const MeasureModel& model, TorusPoint x, double mass);

// Radii for a nonincreasing sequence of masses at a fixed centre; each call
// reuses the previous radius as the upper bracket.
class RadiusSweep {
 public:
  RadiusSweep(const MeasureModel& model, double x);
  // Throws std::logic_error if mass exceeds the previous mass.
  double next(double mass);

 private:
  const MeasureModel* model_;
  double x_;
  double prev_mass_ = std::numeric_limits<double>::infinity();
  double prev_radius_ = 0.0;
};

struct RegularityReport {
  double frostman_c = 0.0;
  double frostman_s = 0.0;
  bool frostman_ok = false;
  double annuli_c = 0.0;
  double annuli_alpha = 0.0;
  double annuli_r0 = 0.0;
  bool annuli_ok = false;
  std::size_t frostman_samples = 0;
  std::size_t annuli_samples = 0;
};

// Upper-envelope fits of log mass against log radius (Frostman) and of log
// annulus mass against log width (thin annuli). samples >= 100.
RegularityReport regularity_probe(const MeasureModel& model, std::size_t samples, std::uint64_t seed,
                                  unsigned threads = 0);

struct QuasiBernoulliReport {
  std::size_t max_total_level = 0;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
  double constant = 0.0;  // max(max_ratio, 1/min_ratio)
};

// Ratios mu(C_wv) / (mu(C_w) mu(C_v)) over all nonempty w, v with
// |w| + |v| <= max_total_level.
QuasiBernoulliReport quasi_bernoulli_probe(const MeasureModel& model, const IntervalMap& map,
                                           std::size_t max_total_level);

struct CylinderDecayReport {
  std::vector<double> max_mass;  // index n-1 holds the largest level-n mass
  double lambda = 0.0;
  double constant = 0.0;
  bool ok = false;  // lambda > 1
};

CylinderDecayReport cylinder_decay(const MeasureModel& model, const IntervalMap& map, std::size_t max_level);

}  // namespace rlab
