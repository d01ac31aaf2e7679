#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rlab/config.hpp"

namespace rlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad config, refused input or runtime error
inline constexpr int kExitProperty = 2;  // artifacts written but a property check failed

const std::vector<std::string>& subcommand_names();
std::string library_version();

// Runs one subcommand and writes CSVs plus manifest.json into
// config.output. Outputs of a run that ends with kExitUsage are removed.
int run(const std::string& subcommand, const ExperimentConfig& config, std::ostream& log);

}  // namespace rlab
