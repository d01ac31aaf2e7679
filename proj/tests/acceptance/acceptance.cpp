// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include <fmt/format.h>
#include <json.hpp>

#include "oracles.hpp"
#include "rlab/estimators.hpp"
#include "rlab/interval_geometry.hpp"
#include "rlab/numeric.hpp"
#include "rlab/partition.hpp"
#include "rlab/recurrence.hpp"
#include "rlab/torus_geometry.hpp"

using namespace rlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const TorusAutomorphism cat = TorusAutomorphism::cat_map();
constexpr std::uint64_t kSeed = 1;

Outcome c1_torus_event_measure() {
  double worst_exact = 0, worst_z = 0;
  bool ok = true;
  const DynamicalSampler sampler(cat, MeasureModel::lebesgue_torus(), RadiusSchedule::constant(0.01));
  for (unsigned k = 2; k <= 8; ++k) {
    const double exact = exact_event_measure(cat, k, 0.01);
    worst_exact = std::max(worst_exact, std::fabs(exact - 0.01));
    const auto e = estimate_event_measure(sampler, k, 1000000, stream_seed(kSeed, k), 0);
    const double z = std::fabs(e.estimate - exact) / e.std_error;
    worst_z = std::max(worst_z, z);
    ok = ok && std::fabs(exact - 0.01) <= 1e-12 && z <= 3;
  }
  return {ok, fmt::format("max |exact - 0.01| = {:.2e}, max |MC - exact| / stderr = {:.2f} (k = 2..8, 1e6 samples)",
                          worst_exact, worst_z)};
}

Outcome c2_periodic_counts() {
  bool ok = true;
  std::string seq;
  for (unsigned k = 1; k <= 12; ++k) {
    const auto pts = periodic_points_torus(cat, k);
    const auto want = oracle::periodic_count(cat.matrix(), k);
    ok = ok && static_cast<std::int64_t>(pts.size()) == want;
    if (k <= 5) seq += fmt::format("{}{}", k > 1 ? ", " : "", pts.size());
  }
  ok = ok && seq == "1, 5, 16, 45, 121";
  return {ok, fmt::format("counts equal |det(A^k - I)| for k <= 12; sequence starts {}", seq)};
}

Outcome c3_rsbc_deviation() {
  const System sys = cat;
  const auto model = MeasureModel::lebesgue_torus();
  const auto sched = RadiusSchedule::log_squared(0.1, 10);
  const auto xs = sample_points(sys, model, 200, kSeed);
  TraceOptions opt;
  opt.n = 1000000;
  opt.epsilon = 0.5;
  const auto traces = run_traces(sys, model, sched, xs, opt, 0);
  std::size_t inside = 0;
  for (const auto& t : traces) {
    const double r = t.hits.back() / t.phi.back();
    if (r >= 0.85 && r <= 1.15) ++inside;
  }
  const double frac = inside / 200.0;
  const auto prof = deviation_profile(traces);
  const bool bounded = prof.bounded.value_or(false);
  const auto& ref = prof.rows[prof.reference_row.value_or(0)];
  const auto& last = prof.rows.back();
  return {frac >= 0.9 && bounded,
          fmt::format("(a) {:.1f}% of points with S/Phi in [0.85, 1.15] at n = 1e6 (Phi = {:.1f}); (b) q95 |D| = {:.4f} "
                      "at n = 1e6 vs {:.4f} at n = {} (Phi = {:.1f})",
                      100 * frac, last.phi, last.q95_abs, ref.q95_abs, ref.n, ref.phi)};
}

Outcome c4_convergent() {
  const System sys = cat;
  const auto model = MeasureModel::lebesgue_torus();
  const auto xs = sample_points(sys, model, 1000, kSeed);
  TraceOptions opt;
  opt.n = 1000000;
  opt.checkpoints = {1000000};
  const auto traces = run_traces(sys, model, RadiusSchedule::power(0.1, 1.5), xs, opt, 0);
  std::vector<double> last;
  std::size_t never = 0;
  for (const auto& t : traces) {
    last.push_back(static_cast<double>(t.last_hit));
    never += t.total_hits == 0;
  }
  const double p99 = quantile(last, 0.99);
  return {p99 < 1e5, fmt::format("99th percentile of the last hit = {:.0f} (< 1e5 required); {} of 1000 points never return",
                                 p99, never)};
}

Outcome c5_three_ball() {
  const auto map = IntervalMap::linear(3);
  const auto leb = MeasureModel::lebesgue_interval();
  const auto sched = RadiusSchedule::log_squared(0.05, 10);
  double worst = 0;
  bool ok = true;
  for (unsigned k = 1; k <= 10; ++k) {
    const auto rep = check_three_ball_cover(map, leb, k, sched.mass(k));
    worst = std::max(worst, rep.max_ratio);
    ok = ok && rep.ok && rep.max_ratio <= 3 + 1e-9 && rep.components == static_cast<std::size_t>(std::pow(3, k));
  }
  return {ok, fmt::format("max mu(T^k I) / M_k = {:.12f} over all 3^k components, k <= 10", worst)};
}

Outcome c6_gibbs_pipeline() {
  const auto map = IntervalMap::perturbed(5, 0.1);
  const auto model = build_gibbs(map, PotentialSpec::geometric(map), 16);
  const double tol = model.tolerance();
  const double eig = model.diagnostics().normalized_eigenvalue;
  const bool i = std::fabs(eig - 1) <= 1e-8;
  double worst_sum = 0;
  for (std::size_t k = 1; k <= 6; ++k) {
    CompensatedSum s;
    for (double m : level_masses(model, map, k)) s.add(m);
    worst_sum = std::max(worst_sum, std::fabs(s.value() - 1));
  }
  const bool ii = worst_sum <= tol;
  const double q6 = quasi_bernoulli_probe(model, map, 6).constant;
  const double q8 = quasi_bernoulli_probe(model, map, 8).constant;
  const bool iii = std::fabs(q8 - q6) <= 0.2 * q6;
  double worst_ratio = 0;
  bool iv = true;
  for (unsigned k = 1; k <= 6; ++k) {
    const auto rep = check_three_ball_cover(map, model, k, 0.05 / std::pow(std::log(k + 10.0), 2), 0);
    worst_ratio = std::max(worst_ratio, rep.max_ratio);
    iv = iv && rep.max_ratio <= 3 + tol && rep.cover_failures == 0;
  }
  return {i && ii && iii && iv,
          fmt::format("(i) eigenvalue {:.12f}; (ii) max |level sum - 1| = {:.2e} (tol {:.2e}); (iii) QB constant {:.5f} "
                      "at 6, {:.5f} at 8; (iv) max three-ball ratio {:.6f}",
                      eig, worst_sum, tol, q6, q8, worst_ratio)};
}

Outcome c7_short_return() {
  const auto map = IntervalMap::linear(3);
  const auto leb = MeasureModel::lebesgue_interval();
  const auto sched = RadiusSchedule::constant(0.05);
  std::vector<double> cs;
  double lambda = 0;
  bool ok = true;
  for (unsigned k : {4u, 5u, 6u}) {
    const auto rep = short_return_check(map, leb, sched, k, 6, 0);
    lambda = rep.lambda;
    ok = ok && rep.ok && rep.lambda > 1 && std::isfinite(rep.constant);
    cs.push_back(rep.constant);
  }
  const double lo = *std::min_element(cs.begin(), cs.end()), hi = *std::max_element(cs.begin(), cs.end());
  ok = ok && hi <= 2 * lo;
  return {ok, fmt::format("lambda = {:.6f}; C = {:.4f}, {:.4f}, {:.4f} for k = 4, 5, 6 (max/min {:.3f})", lambda, cs[0],
                          cs[1], cs[2], hi / lo)};
}

Outcome c8_gal_koksma() {
  const DynamicalSampler sampler(cat, MeasureModel::lebesgue_torus(), RadiusSchedule::constant(0.01));
  const std::pair<std::uint64_t, std::uint64_t> blocks[] = {{100, 1100}, {1000, 2000}};
  std::vector<double> ratios, upper;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto v = estimate_block_variance(sampler, blocks[b].first, blocks[b].second, 10000, stream_seed(kSeed, b), 0);
    ratios.push_back(v.ratio.value_or(NAN));
    upper.push_back(v.ratio.value_or(NAN) + 3 * v.ratio_std_error);
  }
  // fitted C: the largest ratio, with its sampling margin
  const double c = std::max(upper[0], upper[1]);
  const double lo = std::min(ratios[0], ratios[1]), hi = std::max(ratios[0], ratios[1]);
  const bool ok = c <= 10 && hi <= 2 * lo && ratios[0] <= c && ratios[1] <= c;
  return {ok, fmt::format("S/sum M = {:.4f} (100..1100), {:.4f} (1000..2000); C = {:.4f}; max/min {:.3f}", ratios[0],
                          ratios[1], c, hi / lo)};
}

Outcome c9_partition() {
  const auto spike = DensityGrid::spiked(64, 40, 40, 0.5, 0, 0, 0);
  const auto leb = DensityGrid::uniform();
  bool ok = true;
  std::string detail;
  for (const DensityGrid* d : {&leb, &spike}) {
    std::vector<PartitionReport> reps;
    std::vector<PartitionCL> parts;
    for (unsigned n = 4; n <= 9; ++n) {
      parts.push_back(build_partition(*d, 0.4, n));
      reps.push_back(verify_partition(parts.back(), *d, 0));
    }
    const auto drift = check_drift(reps);
    ok = ok && drift.ok;
    double l1 = 0, diam = 0;
    for (const auto& r : reps) {
      l1 = std::max(l1, r.l1_const);
      diam = std::max(diam, r.diam_const);
    }
    detail += fmt::format("{}: properties {}, max diam const {:.3f}, max L1 const {:.3f}; ", d->name(),
                          drift.ok ? "hold without drift" : drift.message, diam, l1);
    if (!d->is_uniform()) continue;
    for (auto f : {TestFunction::first_coordinate, TestFunction::bump_product}) {
      double worst = 0;
      bool bounded = true;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto r = localized_integral(parts[i], reps[i], f, cat, 5, 5, 1000000, stream_seed(kSeed, 100 + i), 0);
        bounded = bounded && r.bounded;
        worst = std::max(worst, r.ratio / r.bound);
      }
      ok = ok && bounded;
      detail += fmt::format("{} max ratio/bound {:.3f}; ", to_string(f), worst);
    }
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome c10_pair_decay() {
  const auto map = IntervalMap::linear(3);
  const auto leb = MeasureModel::lebesgue_interval();
  std::vector<DecayPoint> pts;
  std::string ex;
  for (unsigned s = 2; s <= 10; ++s) {
    const auto jm = exact_joint_measure(map, leb, s, s, 0.02, 0.02, 0);
    const double excess = jm.joint - jm.m_k * jm.m_kl;
    pts.push_back({static_cast<double>(s), excess});
    ex += fmt::format("{}{:.3e}", s > 2 ? ", " : "", excess);
  }
  const auto fit = fit_exponential_decay(pts, 1e-12);
  const char* status = fit.status == DecayStatus::fitted ? "fitted" : fit.status == DecayStatus::below_floor ? "below floor" : "failed";
  std::string detail = fmt::format("excess for s = 2..10: {}; {} rate {}", ex, status,
                                   fit.rate ? fmt::format("{:.4f}", *fit.rate) : "none");
  if (!fit.message.empty()) detail += " (" + fit.message + ")";
  return {fit.success(), detail};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RLAB_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c11_determinism() {
  const fs::path root = fs::temp_directory_path() / "rlab_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::pair<const char*, const char*> runs[] = {
      {"trace", R"({"system": {"type": "torus"}, "n": 20000, "samples": 40, "seed": 5})"},
      {"correlate", R"({"system": {"type": "torus"}, "schedule": {"kind": "constant", "c": 0.01}, "samples": 20000,
        "seed": 5, "correlate": {"events": [2, 7], "pairs": [[3, 2], [4, 20]], "blocks": [[10, 210]]}})"},
      {"torus-geometry", R"({"system": {"type": "torus"}, "schedule": {"kind": "constant", "c": 0.005}, "samples": 20000,
        "seed": 5, "torus_geometry": {"ks": [2, 3, 4], "mc_samples": 20000, "intersections": [[2, 6]],
        "intersection_mode": "monte_carlo"}})"},
      {"partition", R"({"system": {"type": "torus"}, "seed": 5,
        "partition": {"ns": [4, 5], "functions": ["bump_product"], "samples": 20000}})"},
      {"regularity", R"({"system": {"type": "linear", "branches": 3}, "seed": 5,
        "regularity": {"samples": 500, "quasi_bernoulli_level": 4, "cylinder_levels": 5}})"},
  };
  std::size_t compared = 0;
  std::vector<std::string> bad;
  for (const auto& [sub, cfg] : runs) {
    const fs::path conf = root / (std::string(sub) + ".json");
    std::ofstream(conf) << cfg;
    std::vector<fs::path> outs;
    for (const char* t : {"1", "4", "8"}) {
      outs.push_back(root / fmt::format("{}_t{}", sub, t));
      const int code = run_cli(fmt::format("{} --config {} --threads {} --out {}", sub, conf.string(), t, outs.back().string()));
      if (code != 0) bad.push_back(fmt::format("{} exit {} at {} threads", sub, code, t));
    }
    for (const auto& e : fs::directory_iterator(outs[0])) {
      if (e.path().extension() != ".csv") continue;
      const std::string ref = slurp(e.path());
      for (std::size_t i = 1; i < outs.size(); ++i) {
        ++compared;
        if (slurp(outs[i] / e.path().filename()) != ref) bad.push_back(fmt::format("{}/{}", sub, e.path().filename().string()));
      }
    }
  }
  std::string detail = fmt::format("{} CSV comparisons across threads 1, 4, 8", compared);
  if (!bad.empty()) detail += "; differing: " + bad.front();
  return {bad.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 exact torus event measure", c1_torus_event_measure},
      {"2 periodic-point counts", c2_periodic_counts},
      {"3 RSBC deviation boundedness", c3_rsbc_deviation},
      {"4 convergent-case dichotomy", c4_convergent},
      {"5 three-ball cover", c5_three_ball},
      {"6 nonlinear Gibbs pipeline", c6_gibbs_pipeline},
      {"7 short-return inequality", c7_short_return},
      {"8 Gal-Koksma hypothesis ratio", c8_gal_koksma},
      {"9 partition properties", c9_partition},
      {"10 pair-correlation decay", c10_pair_decay},
      {"11 determinism", c11_determinism},
  };
  // optional filter: criterion numbers on the command line
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const std::string num = name.substr(0, name.find(' '));
    if (!only.empty() && std::find(only.begin(), only.end(), num) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("[{}] criterion {} ({:.1f} s): {}", o.pass ? "PASS" : "FAIL", name, secs, o.detail) << std::endl;
    failures += !o.pass;
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
