#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rlab/estimators.hpp"
#include "rlab/measures.hpp"
#include "rlab/partition.hpp"
#include "rlab/recurrence.hpp"
#include "rlab/systems.hpp"

namespace rlab {

// Schema, range or syntax problem in a config document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, std::size_t line, const std::string& what);
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }  // 0 when unknown

 private:
  std::string field_;
  std::size_t line_;
};

struct SystemSpec {
  std::string type = "torus";  // torus | linear | perturbed
  Mat2 matrix{2, 1, 1, 1};
  int branches = 3;
  std::vector<bool> reversed;
  double amplitude = 0.1;

  System build() const;
};

struct MeasureSpec {
  std::string type = "lebesgue";  // lebesgue | gibbs
  std::string potential = "geometric";  // geometric | bernoulli | constant
  std::vector<double> weights;
  double constant = 0.0;
  int grid_level = 16;
  std::string cache;  // optional sidecar path for Gibbs tables

  MeasureModel build(const System& system) const;
};

struct ScheduleSpec {
  std::string kind = "log_squared";  // log_squared | power | harmonic | constant | table
  double c = 0.1;
  double k0 = 10.0;
  double gamma = 1.5;
  std::vector<double> values;

  RadiusSchedule build() const;
};

struct CorrelateSpec {
  std::vector<std::uint64_t> events;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;   // (k, l)
  std::vector<std::pair<std::uint64_t, std::uint64_t>> blocks;  // (m, n)
  BoundConstants constants;
};

struct TorusGeometrySpec {
  std::vector<unsigned> ks{2, 3, 4, 5, 6, 7, 8};
  double mass = 0.01;
  std::size_t mc_samples = 0;
  std::vector<unsigned> separation_ls;
  std::vector<double> rhos;
  std::vector<std::pair<unsigned, unsigned>> intersections;
  std::string intersection_mode = "exact";  // exact | monte_carlo
};

struct IntervalGeometrySpec {
  std::vector<unsigned> ks{1, 2, 3};
  bool write_components = true;
  std::vector<unsigned> short_return_ks;
  unsigned l_max = 6;
  std::vector<unsigned> decay_separations;  // (k, l) = (s, s)
  double decay_floor = 1e-12;
};

struct DensitySpec {
  std::string type = "uniform";  // uniform | spiked | strip
  int resolution = 64;
  int spike_i = 40, spike_j = 40;
  double spike_mass = 0.5;
  double center_x = 0.3, center_y = 0.3, sigma = 0.08;
  double strip_x = 0.5;

  DensityGrid build() const;
};

struct PartitionSpec {
  double kappa = 0.4;
  std::vector<unsigned> ns{4, 5, 6, 7, 8, 9};
  DensitySpec density;
  std::vector<std::string> functions;  // constant | first_coordinate | bump_product
  unsigned k = 5, l = 5;
  std::size_t samples = 1000000;
};

struct RegularitySpec {
  std::size_t samples = 1000;
  std::size_t quasi_bernoulli_level = 6;
  std::size_t cylinder_levels = 8;
};

struct SweepSpec {
  std::string subcommand;
  // dotted config path and the values it takes, in key order
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;  // values as JSON text
};

struct ExperimentConfig {
  SystemSpec system;
  MeasureSpec measure;
  ScheduleSpec schedule;
  std::uint64_t n = 1000;
  std::vector<std::uint64_t> checkpoints;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double epsilon = 0.5;
  double sigma = 0.25;
  std::string output = "out";

  CorrelateSpec correlate;
  TorusGeometrySpec torus_geometry;
  IntervalGeometrySpec interval_geometry;
  PartitionSpec partition;
  RegularitySpec regularity;
  std::optional<SweepSpec> sweep;

  std::string canonical;  // normalized JSON of the source document
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a
std::uint64_t fnv1a64(std::string_view bytes);

// Copy of the document text with the value at a dotted path replaced.
std::string with_override(const std::string& json_text, const std::string& dotted_path, const std::string& value_json);

}  // namespace rlab
