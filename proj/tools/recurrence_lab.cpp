#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlab/config.hpp"
#include "rlab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"recurrence-lab: quantitative recurrence experiments", "recurrence_lab"};
  app.set_version_flag("--version", rlab::library_version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  for (const auto& name : rlab::subcommand_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--seed", seed, "64-bit seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rlab::kExitOk : rlab::kExitUsage;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  rlab::ExperimentConfig cfg;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw rlab::ConfigError("config", 0, "cannot read " + config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    cfg = rlab::parse_config(text);  // diagnostics refer to the file as written
    if (out || threads || seed) {
      if (out) text = rlab::with_override(text, "output", nlohmann::json(*out).dump());
      if (threads) text = rlab::with_override(text, "threads", std::to_string(*threads));
      if (seed) text = rlab::with_override(text, "seed", std::to_string(*seed));
      cfg = rlab::parse_config(text);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return rlab::kExitUsage;
  }
  return rlab::run(subcommand, cfg, std::cerr);
}
