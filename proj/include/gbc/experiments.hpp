#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace gbc::experiments {

// Smallest path count accepted by Monte Carlo experiments.
inline constexpr std::size_t kMinPaths = 1000;

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string experiment;
  std::string model;  // empty: the experiment's default
  std::optional<double> t;
  std::vector<double> t_grid;
  std::optional<std::size_t> paths;
  std::optional<int> steps;
  std::vector<int> q;
  std::vector<int> n;
  std::optional<int> p;
  std::optional<std::uint64_t> seed;  // unset: $GBC_SEED or the built-in default
  std::filesystem::path out = "gbc-out";
};

// verify-gbc, moments, mckean-singer, patodi, scaling, bridge, reflection,
// transport, boundary-limit.
const std::vector<std::string>& experiment_names();

// Keys match the long flag names without dashes ("t-grid" → "t_grid").
// A manifest written by a previous run is accepted too: its "config" object is
// used. Unknown keys are a ConfigError.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

// Fills per-experiment defaults for every field left unset.
ExperimentConfig with_defaults(ExperimentConfig cfg);
// Throws ConfigError naming the violated invariant.
void validate(const ExperimentConfig& cfg);

struct Check {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CsvTable {
  std::string file;
  std::string contents;
};

struct ExperimentResult {
  std::vector<Check> checks;
  std::vector<CsvTable> tables;
  nlohmann::json details;
  std::vector<std::string> summary;  // human lines, rounded to 6 digits

  bool pass() const;
};

// Runs a validated, defaulted config without touching the file system.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Validates, runs and writes <out>/*.csv, report.json and manifest.json.
// Returns kExitPass, kExitFail or kExitConfig.
int run(ExperimentConfig cfg, std::ostream& out, std::ostream& err);

// name, dim, χ for every registered model.
std::string list_models();

// %.17g
std::string format_double(double v);

}  // namespace gbc::experiments
