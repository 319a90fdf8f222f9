#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbc/experiments.hpp"

namespace ex = gbc::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Gauss-Bonnet-Chern experiments: closed-form and Monte Carlo checks"};
  app.require_subcommand(1);

  std::string config_path, model, t_grid, q, n, out;
  double t = 0.0;
  std::size_t paths = 0;
  int steps = 0, p = 0;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (a previous manifest.json works too)");
    sub->add_option("--model", model, "model name (see list-models)");
    sub->add_option("--t", t, "time");
    sub->add_option("--t-grid", t_grid, "comma-separated times");
    sub->add_option("--paths", paths, "Monte Carlo paths (tuples for patodi)");
    sub->add_option("--steps", steps, "time steps per path");
    sub->add_option("--q", q, "moment order(s), comma-separated");
    sub->add_option("--n", n, "scaling or transport order(s), comma-separated");
    sub->add_option("--p", p, "curvature power for boundary-limit");
    sub->add_option("--seed", seed, "RNG seed (default: $GBC_SEED or built-in)");
    sub->add_option("--out", out, "output directory");
  };
  for (const auto& name : ex::experiment_names()) add_common(app.add_subcommand(name));
  app.add_subcommand("list-models", "registered models with dimension and Euler characteristic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : ex::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->get_name() == "list-models") {
    std::cout << ex::list_models();
    return ex::kExitPass;
  }

  ex::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ex::ConfigError("cannot read config file " + config_path);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ex::ConfigError(std::string("config file is not valid JSON: ") + e.what());
      }
      ex::apply_json(cfg, j);
    }
    // Flags override the config file.
    nlohmann::json flags = nlohmann::json::object();
    auto given = [&](const char* flag) { return sub->count(flag) > 0; };
    if (given("--model")) flags["model"] = model;
    if (given("--t")) flags["t"] = t;
    if (given("--t-grid")) flags["t_grid"] = t_grid;
    if (given("--paths")) flags["paths"] = paths;
    if (given("--steps")) flags["steps"] = steps;
    if (given("--q")) flags["q"] = q;
    if (given("--n")) flags["n"] = n;
    if (given("--p")) flags["p"] = p;
    if (given("--seed")) flags["seed"] = seed;
    if (given("--out")) flags["out"] = out;
    ex::apply_json(cfg, flags);
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return ex::kExitConfig;
  }
  if (!cfg.experiment.empty() && cfg.experiment != sub->get_name()) {
    std::cerr << "config error: config file is for '" << cfg.experiment << "', not '" << sub->get_name()
              << "'\n";
    return ex::kExitConfig;
  }
  cfg.experiment = sub->get_name();
  return ex::run(cfg, std::cout, std::cerr);
}
