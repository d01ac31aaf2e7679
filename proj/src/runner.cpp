#include "rlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "rlab/csv.hpp"
#include "rlab/estimators.hpp"
#include "rlab/interval_geometry.hpp"
#include "rlab/numeric.hpp"
#include "rlab/partition.hpp"
#include "rlab/rng.hpp"
#include "rlab/torus_geometry.hpp"

#ifndef RLAB_VERSION
#define RLAB_VERSION "0.0.0"
#endif

namespace rlab {

namespace fs = std::filesystem;

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"trace",     "correlate",  "torus-geometry", "interval-geometry",
                                              "partition", "regularity", "sweep"};
  return names;
}

std::string library_version() { return RLAB_VERSION; }

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Collects the files of one run so they can be listed or removed.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
  }

  std::unique_ptr<CsvWriter> csv(const std::string& name, std::vector<std::string> header) {
    files_.push_back(name);
    return std::make_unique<CsvWriter>(dir_ / name, std::move(header));
  }

  void done(const CsvWriter& w) { rows_[w.path().filename().string()] = w.rows(); }

  // files of a nested run, recorded relative to this directory
  void adopt(const std::string& rel, std::size_t rows) {
    files_.push_back(rel);
    rows_[rel] = rows;
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }
  std::size_t rows(const std::string& f) const {
    const auto it = rows_.find(f);
    return it == rows_.end() ? 0 : it->second;
  }

  void remove_all() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(dir_ / f, ec);
    fs::remove(dir_ / "manifest.json", ec);
    if (created_dir_) fs::remove_all(dir_, ec);
  }

 private:
  fs::path dir_;
  bool created_dir_ = false;
  std::vector<std::string> files_;
  std::map<std::string, std::size_t> rows_;
};

struct Context {
  const ExperimentConfig& cfg;
  Outputs& out;
  std::ostream& log;
  std::vector<std::string> failures;

  void fail(std::string what) {
    log << "property check failed: " << what << '\n';
    failures.push_back(std::move(what));
  }
};

const IntervalMap& need_interval(const System& s, const char* sub) {
  if (const auto* m = std::get_if<IntervalMap>(&s)) return *m;
  throw UsageError(fmt::format("{} needs an interval map system", sub));
}

const TorusAutomorphism& need_torus(const System& s, const char* sub) {
  if (const auto* a = std::get_if<TorusAutomorphism>(&s)) return *a;
  throw UsageError(fmt::format("{} needs a torus system", sub));
}

// ------------------------------------------------------------ trace

void run_trace_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const System system = cfg.system.build();
  const MeasureModel model = cfg.measure.build(system);
  const RadiusSchedule schedule = cfg.schedule.build();
  const auto xs = sample_points(system, model, cfg.samples, cfg.seed);
  TraceOptions opt;
  opt.n = cfg.n;
  opt.checkpoints = cfg.checkpoints;
  opt.epsilon = cfg.epsilon;
  const auto traces = run_traces(system, model, schedule, xs, opt, cfg.threads);

  auto tw = ctx.out.csv("trace.csv", {"trace", "x", "y", "checkpoint", "hits", "phi", "ratio", "deviation"});
  auto rw = ctx.out.csv("returns.csv", {"trace", "x", "y", "total_hits", "last_hit", "exact"});
  for (std::size_t t = 0; t < traces.size(); ++t) {
    const auto& tr = traces[t];
    std::string x, y;
    if (const auto* p = std::get_if<TorusPoint>(&tr.x)) {
      x = format_double(p->fx());
      y = format_double(p->fy());
    } else {
      x = format_double(std::get<double>(tr.x));
    }
    for (std::size_t i = 0; i < tr.checkpoints.size(); ++i) {
      tw->add(static_cast<std::uint64_t>(t)).add(x).add(y).add(tr.checkpoints[i]).add(tr.hits[i]).add(tr.phi[i]);
      tw->add(tr.phi[i] > 0 ? std::optional<double>(static_cast<double>(tr.hits[i]) / tr.phi[i]) : std::nullopt);
      tw->add(tr.deviation[i]).end_row();
    }
    rw->add(static_cast<std::uint64_t>(t)).add(x).add(y).add(tr.total_hits).add(tr.last_hit).add(tr.exact).end_row();
  }
  tw->close();
  ctx.out.done(*tw);
  rw->close();
  ctx.out.done(*rw);

  const DeviationProfile prof = deviation_profile(traces);
  auto pw = ctx.out.csv("deviation_profile.csv", {"n", "phi", "present", "median_abs", "q95_abs", "max_abs", "reference"});
  for (std::size_t i = 0; i < prof.rows.size(); ++i) {
    const auto& r = prof.rows[i];
    pw->add(r.n).add(r.phi).add(static_cast<std::uint64_t>(r.present)).add(r.median_abs).add(r.q95_abs).add(r.max_abs);
    pw->add(prof.reference_row && *prof.reference_row == i).end_row();
  }
  pw->close();
  ctx.out.done(*pw);
  if (prof.bounded && !*prof.bounded) ctx.fail("deviation profile grows by more than a factor 2");
}

// ------------------------------------------------------------ correlate

void run_correlate_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& cs = cfg.correlate;
  const System system = cfg.system.build();
  const MeasureModel model = cfg.measure.build(system);
  const DynamicalSampler sampler(system, model, cfg.schedule.build());
  if (cfg.samples < 1000) throw UsageError("correlate needs samples >= 1000");
  std::uint64_t task = 0;

  auto ew = ctx.out.csv("events.csv", {"k", "estimate", "std_error", "samples", "target"});
  for (auto k : cs.events) {
    const auto e = estimate_event_measure(sampler, k, cfg.samples, stream_seed(cfg.seed, task++), cfg.threads);
    ew->add(e.k).add(e.estimate).add(e.std_error).add(static_cast<std::uint64_t>(e.samples)).add(e.target).end_row();
  }
  ew->close();
  ctx.out.done(*ew);

  auto pw = ctx.out.csv("pairs.csv", {"k", "l", "regime", "joint", "joint_std_error", "marginal_k", "marginal_kl",
                                      "product", "bound_mixing", "bound_srt", "bound_largel", "samples"});
  for (auto [k, l] : cs.pairs) {
    const auto p = estimate_pair_joint(sampler, k, l, cfg.samples, stream_seed(cfg.seed, task++), cfg.sigma,
                                       cs.constants, cfg.threads);
    pw->add(p.k).add(p.l).add(to_string(p.regime)).add(p.joint).add(p.joint_std_error).add(p.marginal_k);
    pw->add(p.marginal_kl).add(p.product).add(p.bound_mixing).add(p.bound_srt).add(p.bound_largel);
    pw->add(static_cast<std::uint64_t>(p.samples)).end_row();
  }
  pw->close();
  ctx.out.done(*pw);

  auto vw = ctx.out.csv("variance.csv", {"m", "n", "samples", "variance", "mass_sum", "ratio", "ratio_std_error"});
  for (auto [m, n] : cs.blocks) {
    const auto v = estimate_block_variance(sampler, m, n, cfg.samples, stream_seed(cfg.seed, task++), cfg.threads);
    vw->add(v.m).add(v.n).add(static_cast<std::uint64_t>(v.samples)).add(v.variance).add(v.mass_sum).add(v.ratio);
    vw->add(v.ratio_std_error).end_row();
  }
  vw->close();
  ctx.out.done(*vw);
}

// ------------------------------------------------------------ torus geometry

void run_torus_geometry_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& ts = cfg.torus_geometry;
  const System system = cfg.system.build();
  const auto& a = need_torus(system, "torus-geometry");

  auto cw = ctx.out.csv("periodic.csv", {"k", "count", "det"});
  for (auto k : ts.ks) {
    const auto pts = periodic_points_torus(a, k);
    cw->add(k).add(static_cast<std::uint64_t>(pts.size())).add(periodic_point_count(a, k)).end_row();
    if (static_cast<std::int64_t>(pts.size()) != periodic_point_count(a, k))
      ctx.fail(fmt::format("periodic point count mismatch at k={}", k));
  }
  cw->close();
  ctx.out.done(*cw);

  auto ew = ctx.out.csv("events.csv", {"k", "mass", "radius", "exact", "overlap", "c_stable", "c_unstable", "mc_estimate",
                                       "mc_std_error", "mc_samples"});
  const MeasureModel torus = MeasureModel::lebesgue_torus();
  std::uint64_t task = 0;
  for (auto k : ts.ks) {
    const EllipseSet set = enumerate_ellipses(a, k, ts.mass);
    std::optional<double> exact;
    if (!set.overlap) exact = exact_event_measure(a, k, ts.mass);
    std::optional<double> est, se;
    if (ts.mc_samples > 0) {
      const DynamicalSampler sampler(system, torus, RadiusSchedule::constant(ts.mass));
      const auto e = estimate_event_measure(sampler, k, ts.mc_samples, stream_seed(cfg.seed, task++), cfg.threads);
      est = e.estimate;
      se = e.std_error;
      if (exact && std::fabs(*exact - e.estimate) > 3 * e.std_error)
        ctx.fail(fmt::format("Monte Carlo m(E_{}) = {} disagrees with {}", k, e.estimate, *exact));
    }
    ew->add(k).add(ts.mass).add(set.radius).add(exact).add(set.overlap).add(set.c_stable).add(set.c_unstable);
    ew->add(est).add(se).add(static_cast<std::uint64_t>(ts.mc_samples)).end_row();
  }
  ew->close();
  ctx.out.done(*ew);

  if (!ts.separation_ls.empty() && !ts.rhos.empty()) {
    const auto rep = separation_probe(a, ts.separation_ls, ts.rhos);
    auto sw = ctx.out.csv("separation.csv", {"l", "rho", "c_max"});
    for (const auto& r : rep.rows) sw->add(r.l).add(r.rho).add(r.c_max).end_row();
    sw->close();
    ctx.out.done(*sw);
    if (!(rep.c_a > 0)) ctx.fail("separation constant is not positive");
  }

  if (!ts.intersections.empty()) {
    const RadiusSchedule schedule = cfg.schedule.build();
    const auto mode = ts.intersection_mode == "exact" ? IntersectionMode::exact : IntersectionMode::monte_carlo;
    auto iw = ctx.out.csv("intersections.csv", {"k", "l", "mode", "m_k", "m_kl", "intersection", "std_error", "samples",
                                                "lambda", "bound_unit", "required_c", "covers_disjoint"});
    for (auto [k, l] : ts.intersections) {
      const auto r = intersection_bound_check(a, k, l, schedule, mode, cfg.samples, stream_seed(cfg.seed, task++), cfg.threads);
      iw->add(r.k).add(r.l).add(ts.intersection_mode).add(r.m_k).add(r.m_kl).add(r.intersection).add(r.std_error);
      iw->add(static_cast<std::uint64_t>(r.samples)).add(r.lambda).add(r.bound_unit).add(r.required_c);
      iw->add(r.covers_disjoint).end_row();
    }
    iw->close();
    ctx.out.done(*iw);
  }
}

// ------------------------------------------------------------ interval geometry

void run_interval_geometry_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& gs = cfg.interval_geometry;
  const System system = cfg.system.build();
  const auto& map = need_interval(system, "interval-geometry");
  const RadiusSchedule schedule = cfg.schedule.build();
  // refuse oversized levels before any work is done
  for (auto k : gs.ks) {
    double words = std::pow(static_cast<double>(map.branch_count()), k);
    if (words > static_cast<double>(kMaxExactWords))
      throw UsageError(fmt::format("{}^{} = {} cylinder words exceed the exact-mode cap of {}", map.branch_count(), k,
                                   words, kMaxExactWords));
  }
  const MeasureModel model = cfg.measure.build(system);

  auto tw = ctx.out.csv("three_ball.csv", {"k", "mass", "components", "max_ratio", "worst_word", "ratio_violations",
                                           "cover_failures", "ok"});
  auto mw = ctx.out.csv("component_mass.csv", {"k", "mass", "max_constant", "worst_word", "skipped"});
  auto ew = ctx.out.csv("event_measure.csv", {"k", "mass", "measure"});
  std::unique_ptr<CsvWriter> comp;
  if (gs.write_components)
    comp = ctx.out.csv("components.csv", {"k", "word", "a", "b", "p", "mass", "image_mass", "ratio"});
  for (auto k : gs.ks) {
    const double m = schedule.mass(k);
    const auto tb = check_three_ball_cover(map, model, k, m, cfg.threads);
    tw->add(k).add(m).add(static_cast<std::uint64_t>(tb.components)).add(tb.max_ratio).add(tb.worst_word);
    tw->add(static_cast<std::uint64_t>(tb.ratio_violations)).add(static_cast<std::uint64_t>(tb.cover_failures)).add(tb.ok).end_row();
    if (!tb.ok) ctx.fail(fmt::format("three-ball cover fails at k={} (word {})", k, tb.first_failure.empty() ? tb.worst_word : tb.first_failure));
    const auto cm = check_component_mass(map, model, k, m, cfg.threads);
    mw->add(k).add(m).add(cm.max_constant).add(cm.worst_word).add(static_cast<std::uint64_t>(cm.skipped)).end_row();
    ew->add(k).add(m).add(interval_event_measure(map, model, k, m, cfg.threads)).end_row();
    if (comp) {
      for (const auto& c : event_components(map, model, k, m, cfg.threads)) {
        comp->add(k).add(c.word.to_string()).add(c.a).add(c.b).add(c.p).add(c.mass).add(c.image_mass);
        comp->add(m > 0 ? c.image_mass / m : 0.0).end_row();
      }
    }
  }
  for (auto* w : {tw.get(), mw.get(), ew.get(), comp.get()})
    if (w) {
      w->close();
      ctx.out.done(*w);
    }

  if (!gs.short_return_ks.empty()) {
    auto sw = ctx.out.csv("short_return.csv", {"k", "l", "joint", "m_k", "m_kl", "product", "bound_unit", "ratio",
                                               "lambda", "constant"});
    for (auto k : gs.short_return_ks) {
      const auto rep = short_return_check(map, model, schedule, k, gs.l_max, cfg.threads);
      for (const auto& r : rep.rows) {
        sw->add(k).add(r.l).add(r.joint).add(r.m_k).add(r.m_kl).add(r.product).add(r.bound_unit).add(r.ratio);
        sw->add(rep.lambda).add(rep.constant).end_row();
      }
      if (!rep.ok) ctx.fail(fmt::format("short-return fit fails at k={}", k));
    }
    sw->close();
    ctx.out.done(*sw);
  }

  if (!gs.decay_separations.empty()) {
    auto dw = ctx.out.csv("decay.csv", {"s", "joint", "m_k", "m_kl", "product", "excess"});
    std::vector<DecayPoint> pts;
    for (auto s : gs.decay_separations) {
      const auto jm = exact_joint_measure(map, model, s, s, schedule.mass(s), schedule.mass(2 * s), cfg.threads);
      const double excess = jm.joint - jm.m_k * jm.m_kl;
      pts.push_back({static_cast<double>(s), excess});
      dw->add(s).add(jm.joint).add(jm.m_k).add(jm.m_kl).add(jm.m_k * jm.m_kl).add(excess).end_row();
    }
    dw->close();
    ctx.out.done(*dw);
    const DecayFit fit = fit_exponential_decay(pts, gs.decay_floor);
    auto fw = ctx.out.csv("decay_fit.csv", {"status", "rate", "constant", "residual", "used_points", "message"});
    const char* status = fit.status == DecayStatus::fitted ? "fitted" : fit.status == DecayStatus::below_floor ? "below_floor" : "failed";
    fw->add(status).add(fit.rate).add(fit.constant).add(fit.residual).add(static_cast<std::uint64_t>(fit.used_points));
    fw->add(fit.message).end_row();
    fw->close();
    ctx.out.done(*fw);
    if (!fit.success()) ctx.fail("pair-correlation decay fit: " + fit.message);
  }
}

// ------------------------------------------------------------ partition

void run_partition_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& ps = cfg.partition;
  const DensityGrid density = ps.density.build();
  std::vector<PartitionCL> parts;
  std::vector<PartitionReport> reports;
  auto pw = ctx.out.csv("partition.csv", {"n", "kappa", "num_cells", "max_diam", "carved_mass", "sup_rho_const",
                                          "lip_rho_const", "l1_const", "count_const", "diam_const", "carve_const", "ok"});
  for (auto n : ps.ns) {
    parts.push_back(build_partition(density, ps.kappa, n));
    const auto r = verify_partition(parts.back(), density, cfg.threads);
    reports.push_back(r);
    pw->add(r.n).add(r.kappa).add(static_cast<std::uint64_t>(r.num_cells)).add(r.max_diam).add(r.carved_mass);
    pw->add(r.sup_rho_const).add(r.lip_rho_const).add(r.l1_const).add(r.count_const).add(r.diam_const);
    pw->add(r.carve_const).add(r.ok()).end_row();
  }
  pw->close();
  ctx.out.done(*pw);
  const DriftCheck drift = check_drift(reports);
  if (!drift.ok) ctx.fail("partition: " + drift.message);

  if (!ps.functions.empty()) {
    const System system = cfg.system.build();
    const auto& a = need_torus(system, "partition localization");
    if (!density.is_uniform()) throw UsageError("partition localization needs the uniform density");
    auto lw = ctx.out.csv("localized.csv", {"n", "function", "samples", "lhs", "rhs", "difference", "difference_std_error",
                                            "ratio", "ratio_std_error", "bound", "bounded"});
    std::uint64_t task = 0;
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (const auto& name : ps.functions) {
        const TestFunction f = name == "constant"           ? TestFunction::constant
                               : name == "first_coordinate" ? TestFunction::first_coordinate
                                                            : TestFunction::bump_product;
        const auto r = localized_integral(parts[i], reports[i], f, a, ps.k, ps.l, ps.samples, stream_seed(cfg.seed, task++),
                                          cfg.threads);
        lw->add(r.n).add(to_string(f)).add(static_cast<std::uint64_t>(r.samples)).add(r.lhs).add(r.rhs).add(r.difference);
        lw->add(r.difference_std_error).add(r.ratio).add(r.ratio_std_error).add(r.bound).add(r.bounded).end_row();
        if (!r.bounded) ctx.fail(fmt::format("localized integral unbounded at n={} for {}", r.n, to_string(f)));
      }
    lw->close();
    ctx.out.done(*lw);
  }
}

// ------------------------------------------------------------ regularity

void run_regularity_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& rs = cfg.regularity;
  const System system = cfg.system.build();
  const MeasureModel model = cfg.measure.build(system);

  const auto reg = regularity_probe(model, rs.samples, cfg.seed, cfg.threads);
  auto rw = ctx.out.csv("regularity.csv", {"measure", "frostman_c", "frostman_s", "frostman_ok", "annuli_c", "annuli_alpha",
                                           "annuli_r0", "annuli_ok", "samples"});
  rw->add(model.name()).add(reg.frostman_c).add(reg.frostman_s).add(reg.frostman_ok).add(reg.annuli_c).add(reg.annuli_alpha);
  rw->add(reg.annuli_r0).add(reg.annuli_ok).add(static_cast<std::uint64_t>(rs.samples)).end_row();
  rw->close();
  ctx.out.done(*rw);
  if (!reg.frostman_ok) ctx.fail("Frostman fit");
  if (!reg.annuli_ok) ctx.fail("thin-annuli fit");
  // cylinder probes exist for interval maps only
  if (!std::holds_alternative<IntervalMap>(system)) return;
  const auto& map = std::get<IntervalMap>(system);

  auto qw = ctx.out.csv("quasi_bernoulli.csv", {"max_total_level", "max_ratio", "min_ratio", "constant"});
  for (std::size_t lv = 2; lv <= rs.quasi_bernoulli_level; ++lv) {
    const auto q = quasi_bernoulli_probe(model, map, lv);
    qw->add(static_cast<std::uint64_t>(q.max_total_level)).add(q.max_ratio).add(q.min_ratio).add(q.constant).end_row();
  }
  qw->close();
  ctx.out.done(*qw);

  const auto cd = cylinder_decay(model, map, rs.cylinder_levels);
  auto cw = ctx.out.csv("cylinder_decay.csv", {"level", "max_mass", "lambda", "constant"});
  for (std::size_t i = 0; i < cd.max_mass.size(); ++i)
    cw->add(static_cast<std::uint64_t>(i + 1)).add(cd.max_mass[i]).add(cd.lambda).add(cd.constant).end_row();
  cw->close();
  ctx.out.done(*cw);
  if (!cd.ok) ctx.fail("cylinder masses do not decay exponentially");

  auto lw = ctx.out.csv("level_sums.csv", {"level", "sum", "deviation", "tolerance"});
  for (std::size_t lv = 1; lv <= rs.cylinder_levels; ++lv) {
    CompensatedSum s;
    for (double m : level_masses(model, map, lv)) s.add(m);
    const double dev = std::fabs(s.value() - 1.0);
    lw->add(static_cast<std::uint64_t>(lv)).add(s.value()).add(dev).add(model.tolerance()).end_row();
    if (dev > model.tolerance()) ctx.fail(fmt::format("level-{} cylinder masses sum to {}", lv, s.value()));
  }
  lw->close();
  ctx.out.done(*lw);

  if (model.kind() == MeasureKind::gibbs_interval) {
    const auto& d = model.diagnostics();
    auto gw = ctx.out.csv("gibbs.csv", {"map", "potential", "grid_level", "eigenvalue", "eigenvalue_mismatch",
                                        "normalized_eigenvalue", "iterations", "h_min", "h_max", "error_bound"});
    gw->add(model.map_name()).add(model.potential_name()).add(model.grid_level()).add(d.eigenvalue);
    gw->add(d.eigenvalue_mismatch).add(d.normalized_eigenvalue).add(d.iterations).add(d.h_min).add(d.h_max);
    gw->add(model.error_bound()).end_row();
    gw->close();
    ctx.out.done(*gw);
    if (std::fabs(d.normalized_eigenvalue - 1.0) > 1e-8) ctx.fail("normalized leading eigenvalue differs from 1");
  }
}

// ------------------------------------------------------------ sweep

int run_sweep_cmd(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.sweep) throw UsageError("sweep needs a \"sweep\" section");
  const SweepSpec& sw = *cfg.sweep;
  std::vector<std::string> header{"point", "directory"};
  for (const auto& ax : sw.axes) header.push_back(ax.first);
  header.push_back("exit_code");
  auto iw = ctx.out.csv("sweep.csv", header);
  std::vector<std::size_t> idx(sw.axes.size(), 0);
  std::size_t point = 0;
  int worst = kExitOk;
  while (true) {
    std::string text = cfg.canonical;
    text = with_override(text, "sweep", "null");
    const std::string dir = fmt::format("point_{:04}", point);
    for (std::size_t a = 0; a < sw.axes.size(); ++a)
      text = with_override(text, sw.axes[a].first, sw.axes[a].second[idx[a]]);
    {
      // drop the nulled sweep section and retarget the output
      nlohmann::json j = nlohmann::json::parse(text);
      j.erase("sweep");
      j["output"] = (ctx.out.dir() / dir).string();
      text = j.dump();
    }
    ExperimentConfig sub = parse_config(text);
    sub.threads = cfg.threads;
    std::ostringstream sublog;
    const int code = run(sw.subcommand, sub, sublog);
    ctx.log << sublog.str();
    if (code == kExitUsage) throw UsageError(fmt::format("sweep point {} failed", point));
    worst = std::max(worst, code);
    // list the point's files in this manifest as well
    std::ifstream man(ctx.out.dir() / dir / "manifest.json");
    const auto mj = nlohmann::json::parse(man);
    for (const auto& f : mj.at("files")) ctx.out.adopt(dir + "/" + f.at("name").get<std::string>(), f.at("rows").get<std::size_t>());
    ctx.out.adopt(dir + "/manifest.json", 0);
    iw->add(static_cast<std::uint64_t>(point)).add(dir);
    for (std::size_t a = 0; a < sw.axes.size(); ++a) iw->add(sw.axes[a].second[idx[a]]);
    iw->add(code).end_row();
    ++point;
    std::size_t a = sw.axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < sw.axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) {
        a = sw.axes.size() + 1;
        break;
      }
    }
    if (a == sw.axes.size() + 1 || sw.axes.empty()) break;
  }
  iw->close();
  ctx.out.done(*iw);
  return worst;
}

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
}

void write_manifest(const Outputs& out, const ExperimentConfig& cfg, const std::string& sub, const std::string& started,
                    int code) {
  nlohmann::json m;
  m["config_hash"] = fmt::format("fnv1a64:{:016x}", fnv1a64(cfg.canonical));
  m["version"] = library_version();
  m["subcommand"] = sub;
  m["started"] = started;
  m["finished"] = now_utc();
  m["exit_code"] = code;
  m["files"] = nlohmann::json::array();
  for (const auto& f : out.files()) m["files"].push_back({{"name", f}, {"rows", out.rows(f)}});
  std::ofstream o(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
  o << m.dump(2) << '\n';
  if (!o) throw std::runtime_error("cannot write manifest.json");
}

}  // namespace

int run(const std::string& subcommand, const ExperimentConfig& config, std::ostream& log) {
  const auto& names = subcommand_names();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    log << "error: unknown subcommand '" << subcommand << "'\n";
    return kExitUsage;
  }
  const std::string started = now_utc();
  std::unique_ptr<Outputs> out;
  try {
    out = std::make_unique<Outputs>(config.output);
    Context ctx{config, *out, log, {}};
    int code = kExitOk;
    if (subcommand == "trace") run_trace_cmd(ctx);
    else if (subcommand == "correlate") run_correlate_cmd(ctx);
    else if (subcommand == "torus-geometry") run_torus_geometry_cmd(ctx);
    else if (subcommand == "interval-geometry") run_interval_geometry_cmd(ctx);
    else if (subcommand == "partition") run_partition_cmd(ctx);
    else if (subcommand == "regularity") run_regularity_cmd(ctx);
    else code = run_sweep_cmd(ctx);
    if (!ctx.failures.empty()) code = kExitProperty;
    write_manifest(*out, config, subcommand, started, code);
    return code;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    if (out) out->remove_all();
    return kExitUsage;
  }
}

}  // namespace rlab
