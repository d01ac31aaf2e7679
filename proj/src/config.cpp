#include "rlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rlab/parallel.hpp"

namespace rlab {

using json = nlohmann::json;

ConfigError::ConfigError(std::string field, std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}: {}", line, field, what) : fmt::format("{}: {}", field, what)),
      field_(std::move(field)),
      line_(line) {}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first occurrence of "key" as a JSON member name.
std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    std::size_t after = pos + needle.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == ':') return line_of_offset(text, pos);
    pos = after;
  }
  return 0;
}

// Object reader that rejects members it was never asked about.
class Reader {
 public:
  Reader(const json& j, std::string path, const std::string& text) : j_(j), path_(std::move(path)), text_(text) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string last = key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1);
    throw ConfigError(key, line_of_key(text_, last), what);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    return as_unsigned(j_.at(key), field(key));
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::uint64_t as_unsigned(const json& v, const std::string& name) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) fail(name, "must be nonnegative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0 && d < 1.8e19 && d == std::floor(d)) return static_cast<std::uint64_t>(d);
    }
    fail(name, "expected a nonnegative integer");
  }

  std::vector<std::uint64_t> unsigned_list(const std::string& key) {
    std::vector<std::uint64_t> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(field(key), "expected an array");
    for (const auto& e : v) out.push_back(as_unsigned(e, field(key)));
    return out;
  }

  std::vector<double> number_list(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(field(key), "expected an array");
    for (const auto& e : v) {
      if (!e.is_number()) fail(field(key), "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> pair_list(const std::string& key) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(field(key), "expected an array of pairs");
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2) fail(field(key), "expected pairs [a, b]");
      out.emplace_back(as_unsigned(e[0], field(key)), as_unsigned(e[1], field(key)));
    }
    return out;
  }

  std::vector<std::string> string_list(const std::string& key) {
    std::vector<std::string> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(field(key), "expected an array");
    for (const auto& e : v) {
      if (!e.is_string()) fail(field(key), "expected strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    return Reader(j_.at(key), field(key), text_);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), line_of_key(text_, it.key()), "unknown key");
  }

  template <class T>
  void choice(const std::string& key, const T& value, std::initializer_list<T> allowed) const {
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) fail(field(key), fmt::format("unsupported value '{}'", value));
  }

 private:
  const json& j_;
  std::string path_;
  const std::string& text_;
  std::set<std::string> used_;
};

void require(bool ok, Reader& r, const std::string& key, const std::string& what) {
  if (!ok) r.fail(r.field(key), what);
}

unsigned to_unsigned(std::uint64_t v, Reader& r, const std::string& key) {
  require(v <= 0xffffffffu, r, key, "value too large");
  return static_cast<unsigned>(v);
}

std::vector<unsigned> narrow(const std::vector<std::uint64_t>& v, Reader& r, const std::string& key) {
  std::vector<unsigned> out;
  for (auto x : v) out.push_back(to_unsigned(x, r, key));
  return out;
}

SystemSpec read_system(Reader r) {
  SystemSpec s;
  s.type = r.string("type", s.type);
  r.choice<std::string>("type", s.type, {"torus", "linear", "perturbed"});
  if (s.type == "torus") {
    if (r.has("matrix")) {
      const json& m = r.at("matrix");
      if (!m.is_array() || m.size() != 2 || !m[0].is_array() || !m[1].is_array() || m[0].size() != 2 || m[1].size() != 2)
        r.fail(r.field("matrix"), "expected [[a, b], [c, d]]");
      for (const auto& row : m)
        for (const auto& e : row)
          if (!e.is_number_integer()) r.fail(r.field("matrix"), "entries must be integers");
      s.matrix = Mat2{m[0][0].get<std::int64_t>(), m[0][1].get<std::int64_t>(), m[1][0].get<std::int64_t>(),
                      m[1][1].get<std::int64_t>()};
    }
  } else {
    s.branches = static_cast<int>(r.unsigned_int("branches", s.type == "linear" ? 3 : 5));
    if (s.type == "linear") {
      if (r.has("reversed")) {
        const json& v = r.at("reversed");
        if (!v.is_array()) r.fail(r.field("reversed"), "expected an array of booleans");
        for (const auto& e : v) {
          if (!e.is_boolean()) r.fail(r.field("reversed"), "expected an array of booleans");
          s.reversed.push_back(e.get<bool>());
        }
      }
    } else {
      s.amplitude = r.number("amplitude", s.amplitude);
    }
  }
  r.finish();
  try {
    (void)s.build();
  } catch (const std::exception& e) {
    r.fail(r.field("type"), e.what());
  }
  return s;
}

MeasureSpec read_measure(Reader r) {
  MeasureSpec m;
  m.type = r.string("type", m.type);
  r.choice<std::string>("type", m.type, {"lebesgue", "gibbs"});
  if (m.type == "gibbs") {
    m.potential = r.string("potential", m.potential);
    r.choice<std::string>("potential", m.potential, {"geometric", "bernoulli", "constant"});
    m.weights = r.number_list("weights");
    m.constant = r.number("constant", m.constant);
    m.grid_level = static_cast<int>(r.unsigned_int("grid_level", 16));
    require(m.grid_level >= 2 && m.grid_level <= 24, r, "grid_level", "must lie in [2, 24]");
    if (m.potential == "bernoulli") require(!m.weights.empty(), r, "weights", "bernoulli potential needs weights");
    m.cache = r.string("cache", "");
  }
  r.finish();
  return m;
}

ScheduleSpec read_schedule(Reader r) {
  ScheduleSpec s;
  s.kind = r.string("kind", s.kind);
  r.choice<std::string>("kind", s.kind, {"log_squared", "power", "harmonic", "constant", "table"});
  s.c = r.number("c", s.c);
  s.k0 = r.number("k0", s.k0);
  s.gamma = r.number("gamma", s.gamma);
  s.values = r.number_list("values");
  r.finish();
  try {
    (void)s.build();
  } catch (const std::exception& e) {
    r.fail(r.field("kind"), e.what());
  }
  return s;
}

CorrelateSpec read_correlate(Reader r) {
  CorrelateSpec c;
  c.events = r.unsigned_list("events");
  c.pairs = r.pair_list("pairs");
  c.blocks = r.pair_list("blocks");
  if (r.has("constants")) {
    Reader k = r.child("constants");
    c.constants.c = k.number("c", c.constants.c);
    c.constants.tau = k.number("tau", c.constants.tau);
    c.constants.lambda = k.number("lambda", c.constants.lambda);
    k.finish();
  }
  for (auto e : c.events) require(e >= 1, r, "events", "event times start at 1");
  for (auto [k, l] : c.pairs) require(k >= 1 && l >= 1, r, "pairs", "pairs need k, l >= 1");
  for (auto [m, n] : c.blocks) require(m >= 1 && n >= m && n - m <= 10000, r, "blocks", "blocks need 1 <= m <= n <= m + 1e4");
  r.finish();
  return c;
}

TorusGeometrySpec read_torus_geometry(Reader r) {
  TorusGeometrySpec t;
  if (r.has("ks")) t.ks = narrow(r.unsigned_list("ks"), r, "ks");
  t.mass = r.number("mass", t.mass);
  t.mc_samples = r.unsigned_int("mc_samples", 0);
  t.separation_ls = narrow(r.unsigned_list("separation_ls"), r, "separation_ls");
  t.rhos = r.number_list("rhos");
  for (auto [k, l] : r.pair_list("intersections")) t.intersections.emplace_back(to_unsigned(k, r, "intersections"), to_unsigned(l, r, "intersections"));
  t.intersection_mode = r.string("intersection_mode", t.intersection_mode);
  r.choice<std::string>("intersection_mode", t.intersection_mode, {"exact", "monte_carlo"});
  require(t.mass >= 0 && t.mass <= 1, r, "mass", "must lie in [0, 1]");
  require(t.mc_samples == 0 || t.mc_samples >= 1000, r, "mc_samples", "must be 0 or at least 1000");
  for (auto k : t.ks) require(k >= 1 && k <= 12, r, "ks", "periods must lie in [1, 12]");
  for (double rho : t.rhos) require(rho > 0, r, "rhos", "must be positive");
  r.finish();
  return t;
}

IntervalGeometrySpec read_interval_geometry(Reader r) {
  IntervalGeometrySpec g;
  if (r.has("ks")) g.ks = narrow(r.unsigned_list("ks"), r, "ks");
  g.write_components = r.boolean("write_components", g.write_components);
  g.short_return_ks = narrow(r.unsigned_list("short_return_ks"), r, "short_return_ks");
  g.l_max = to_unsigned(r.unsigned_int("l_max", g.l_max), r, "l_max");
  g.decay_separations = narrow(r.unsigned_list("decay_separations"), r, "decay_separations");
  g.decay_floor = r.number("decay_floor", g.decay_floor);
  for (auto k : g.ks) require(k >= 1, r, "ks", "levels start at 1");
  require(g.l_max >= 1, r, "l_max", "must be at least 1");
  r.finish();
  return g;
}

DensitySpec read_density(Reader r) {
  DensitySpec d;
  d.type = r.string("type", d.type);
  r.choice<std::string>("type", d.type, {"uniform", "spiked", "strip"});
  d.resolution = static_cast<int>(r.unsigned_int("resolution", 64));
  d.spike_i = static_cast<int>(r.unsigned_int("spike_i", 40));
  d.spike_j = static_cast<int>(r.unsigned_int("spike_j", 40));
  d.spike_mass = r.number("spike_mass", d.spike_mass);
  d.center_x = r.number("center_x", d.center_x);
  d.center_y = r.number("center_y", d.center_y);
  d.sigma = r.number("sigma", d.sigma);
  d.strip_x = r.number("strip_x", d.strip_x);
  r.finish();
  try {
    (void)d.build();
  } catch (const std::exception& e) {
    r.fail(r.field("type"), e.what());
  }
  return d;
}

PartitionSpec read_partition(Reader r) {
  PartitionSpec p;
  p.kappa = r.number("kappa", p.kappa);
  if (r.has("ns")) p.ns = narrow(r.unsigned_list("ns"), r, "ns");
  if (r.has("density")) p.density = read_density(r.child("density"));
  p.functions = r.string_list("functions");
  for (const auto& f : p.functions) r.choice<std::string>("functions", f, {"constant", "first_coordinate", "bump_product"});
  p.k = to_unsigned(r.unsigned_int("k", p.k), r, "k");
  p.l = to_unsigned(r.unsigned_int("l", p.l), r, "l");
  p.samples = r.unsigned_int("samples", p.samples);
  require(p.kappa > 0, r, "kappa", "must be positive");
  for (auto n : p.ns) require(p.kappa * n <= 10, r, "ns", "kappa n must not exceed 10");
  require(p.samples >= 1000, r, "samples", "must be at least 1000");
  r.finish();
  return p;
}

RegularitySpec read_regularity(Reader r) {
  RegularitySpec g;
  g.samples = r.unsigned_int("samples", g.samples);
  g.quasi_bernoulli_level = r.unsigned_int("quasi_bernoulli_level", g.quasi_bernoulli_level);
  g.cylinder_levels = r.unsigned_int("cylinder_levels", g.cylinder_levels);
  require(g.samples >= 100, r, "samples", "must be at least 100");
  require(g.quasi_bernoulli_level >= 2, r, "quasi_bernoulli_level", "must be at least 2");
  require(g.cylinder_levels >= 2, r, "cylinder_levels", "must be at least 2");
  r.finish();
  return g;
}

SweepSpec read_sweep(Reader r) {
  SweepSpec s;
  s.subcommand = r.string("subcommand", "");
  r.choice<std::string>("subcommand", s.subcommand,
                        {"trace", "correlate", "torus-geometry", "interval-geometry", "partition", "regularity"});
  if (!r.has("grid")) r.fail(r.field("grid"), "sweep needs a grid of parameter values");
  const json& g = r.at("grid");
  if (!g.is_object() || g.empty()) r.fail(r.field("grid"), "expected a nonempty object of arrays");
  for (auto it = g.begin(); it != g.end(); ++it) {
    if (!it.value().is_array() || it.value().empty())
      r.fail(r.field("grid") + "." + it.key(), "expected a nonempty array of values");
    std::vector<std::string> vals;
    for (const auto& v : it.value()) vals.push_back(v.dump());
    s.axes.emplace_back(it.key(), std::move(vals));
  }
  r.finish();
  return s;
}

}  // namespace

System SystemSpec::build() const {
  if (type == "torus") return TorusAutomorphism(matrix);
  if (type == "linear") return IntervalMap::linear(branches, reversed);
  return IntervalMap::perturbed(branches, amplitude);
}

MeasureModel MeasureSpec::build(const System& system) const {
  const auto* map = std::get_if<IntervalMap>(&system);
  if (type == "lebesgue") return map ? MeasureModel::lebesgue_interval() : MeasureModel::lebesgue_torus();
  if (!map) throw std::invalid_argument("Gibbs measures are only available for interval maps");
  PotentialSpec phi = potential == "geometric"   ? PotentialSpec::geometric(*map)
                      : potential == "bernoulli" ? PotentialSpec::bernoulli(weights)
                                                 : PotentialSpec::constant(constant);
  if (!cache.empty() && std::filesystem::exists(cache)) {
    MeasureModel m = load_gibbs(cache);
    if (m.grid_level() == grid_level && m.map_name() == map->name() && m.potential_name() == phi.name) return m;
  }
  MeasureModel m = build_gibbs(*map, phi, grid_level);
  if (!cache.empty()) save_gibbs(m, cache);
  return m;
}

RadiusSchedule ScheduleSpec::build() const {
  if (kind == "log_squared") return RadiusSchedule::log_squared(c, k0);
  if (kind == "power") return RadiusSchedule::power(c, gamma);
  if (kind == "harmonic") return RadiusSchedule::harmonic(c);
  if (kind == "constant") return RadiusSchedule::constant(c);
  return RadiusSchedule::table(values);
}

DensityGrid DensitySpec::build() const {
  if (type == "uniform") return DensityGrid::uniform();
  if (type == "spiked") return DensityGrid::spiked(resolution, spike_i, spike_j, spike_mass, center_x, center_y, sigma);
  return DensityGrid::strip(resolution, strip_x);
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), fmt::format("malformed JSON ({})", e.what()));
  }
  Reader r(doc, "", text);
  ExperimentConfig c;
  if (r.has("system")) c.system = read_system(r.child("system"));
  const System system = c.system.build();
  const bool torus = std::holds_alternative<TorusAutomorphism>(system);
  if (r.has("measure")) c.measure = read_measure(r.child("measure"));
  if (torus && c.measure.type != "lebesgue") r.fail("measure.type", "torus systems support Lebesgue measure only");
  if (r.has("schedule")) c.schedule = read_schedule(r.child("schedule"));
  c.n = r.unsigned_int("n", c.n);
  require(c.n >= 1 && c.n <= 100000000, r, "n", "must lie in [1, 1e8]");
  c.checkpoints = r.unsigned_list("checkpoints");
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i)
    require(c.checkpoints[i] >= 1 && c.checkpoints[i] <= c.n && (i == 0 || c.checkpoints[i] > c.checkpoints[i - 1]), r,
            "checkpoints", "must increase strictly within [1, n]");
  c.samples = r.unsigned_int("samples", c.samples);
  require(c.samples >= 1, r, "samples", "must be at least 1");
  c.seed = r.unsigned_int("seed", c.seed);
  const std::uint64_t threads = r.unsigned_int("threads", default_thread_count());
  require(threads >= 1 && threads <= 1024, r, "threads", "must lie in [1, 1024]");
  c.threads = static_cast<unsigned>(threads);
  c.epsilon = r.number("epsilon", c.epsilon);
  require(c.epsilon > 0, r, "epsilon", "must be positive");
  c.sigma = r.number("sigma", c.sigma);
  require(c.sigma > 0 && c.sigma <= 1, r, "sigma", "must lie in (0, 1]");
  c.output = r.string("output", c.output);
  require(!c.output.empty(), r, "output", "must not be empty");
  if (r.has("correlate")) c.correlate = read_correlate(r.child("correlate"));
  if (r.has("torus_geometry")) c.torus_geometry = read_torus_geometry(r.child("torus_geometry"));
  if (r.has("interval_geometry")) c.interval_geometry = read_interval_geometry(r.child("interval_geometry"));
  if (r.has("partition")) c.partition = read_partition(r.child("partition"));
  if (r.has("regularity")) c.regularity = read_regularity(r.child("regularity"));
  if (r.has("sweep")) c.sweep = read_sweep(r.child("sweep"));
  r.finish();
  c.canonical = doc.dump();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", 0, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string with_override(const std::string& json_text, const std::string& dotted_path, const std::string& value_json) {
  json doc = json::parse(json_text);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = json::parse(value_json);
      break;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null()) throw ConfigError(dotted_path, 0, "override path crosses a non-object");
    start = dot + 1;
  }
  return doc.dump();
}

}  // namespace rlab
