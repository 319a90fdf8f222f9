#include "gbc/experiments.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "gbc/exterior_algebra.hpp"
#include "gbc/feynman_kac.hpp"
#include "gbc/gbc_integrands.hpp"
#include "gbc/models.hpp"
#include "gbc/stochastic.hpp"

namespace gbc::experiments {

namespace {

using geometry::ManifoldModel;
using geometry::Point;
using nlohmann::json;

// Acceptance tolerances.
constexpr double kChiExact = 0.0;
constexpr double kChiTwoDim = 1e-6;
constexpr double kChiBall3 = 1e-4;
constexpr double kMomentRelTol[] = {0.0, 0.02, 0.02, 0.03};
constexpr double kMomentRelTolHigh = 0.05;  // q ≥ 4
constexpr double kSlopeTol[] = {0.0, 0.05, 0.05, 0.1};
constexpr double kPatodiTol = 1e-9;
constexpr double kReflectionSigmas = 3.0;
constexpr double kMcKeanClosedTol = 1e-6;
constexpr double kMcKeanMcRelTol = 0.05;
constexpr double kBridgeKsTol = 0.02;
constexpr double kTransportSlopeTol = 0.15;
constexpr double kLimitSigmas = 4.0;

// Offsets of the evaluation points: x¹ = 0.3 from the boundary, then 0.2, 0.1, ….
Point probe_point(int d) {
  Point x(d);
  for (int i = 0; i < d; ++i) x[i] = 0.3 - 0.1 * i;
  return x;
}

Point probe_boundary_point(int d) {
  Point x(d - 1);
  for (int i = 0; i < d - 1; ++i) x[i] = 0.4 - 0.1 * i;
  return x;
}

bool is_mc(const std::string& e) { return e != "verify-gbc" && e != "patodi"; }

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

template <class T>
std::vector<T> as_list(const json& v) {
  if (v.is_array()) return v.get<std::vector<T>>();
  if (v.is_string()) {
    std::vector<T> out;
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      if constexpr (std::is_integral_v<T>)
        out.push_back(static_cast<T>(std::stoll(item, &used)));
      else
        out.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("malformed list entry '" + item + "'");
    }
    return out;
  }
  return {v.get<T>()};
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                 std::chrono::system_clock::now())));
}

Check within(std::string name, double value, double target, double tol) {
  return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

std::string fmt6(double v) { return fmt::format("{:.6g}", v); }

std::string mc_tail(const ExperimentConfig& c) {
  return fmt::format("{},{},{}", *c.paths, *c.steps, *c.seed);
}

// verify-gbc ---------------------------------------------------------------

double chi_tolerance(const std::string& model) {
  if (model == "interval") return kChiExact;
  if (model == "ball3") return kChiBall3;
  return kChiTwoDim;
}

ExperimentResult verify_gbc(const ExperimentConfig& c) {
  ExperimentResult r;
  std::vector<std::string> models;
  if (!c.model.empty()) {
    models.push_back(c.model);
  } else {
    for (const auto& m : geometry::model_names())
      if (geometry::make_model(m).compact) models.push_back(m);
  }
  std::string csv = integrands::csv_header() + "\n";
  r.details["models"] = json::array();
  for (const auto& name : models) {
    const auto rep = integrands::integrate_euler_characteristic(geometry::make_model(name));
    csv += integrands::to_csv_row(rep) + "\n";
    r.details["models"].push_back(integrands::to_json(rep));
    r.checks.push_back(within("chi(" + name + ")", rep.total, rep.expected, chi_tolerance(name)));
    r.summary.push_back(fmt::format("{}: interior={:.6f} boundary={:.6f} total={:.6f} (chi {})", name,
                                    rep.interior, rep.boundary, rep.total, rep.expected));
  }
  r.tables.push_back({"gbc.csv", csv});
  return r;
}

// moments -------------------------------------------------------------------

ExperimentResult moments(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto est = stochastic::moment_integrals(c.q, *c.paths, *c.steps, *c.seed);
  std::string csv = "experiment,q,estimate,std_error,closed_form,paths,steps,seed\n";
  for (const auto& e : est) {
    csv += fmt::format("moments,{},{},{},{},{}\n", e.q, format_double(e.estimate),
                       format_double(e.std_error), format_double(e.closed_form), mc_tail(c));
    const double rel = e.q < 4 ? kMomentRelTol[e.q] : kMomentRelTolHigh;
    r.checks.push_back(within(fmt::format("moment(q={})", e.q), e.estimate, e.closed_form,
                              rel * e.closed_form));
    r.details["moments"].push_back({{"q", e.q},
                                    {"estimate", e.estimate},
                                    {"std_error", e.std_error},
                                    {"closed_form", e.closed_form}});
    r.summary.push_back(fmt::format("q={}: estimate={} ± {} closed form={}", e.q, fmt6(e.estimate),
                                    fmt6(e.std_error), fmt6(e.closed_form)));
  }
  r.tables.push_back({"moments.csv", csv});
  return r;
}

// mckean-singer ---------------------------------------------------------------

ExperimentResult mckean_singer(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto rep =
      feynman_kac::mckean_singer_interval(geometry::make_model(c.model), *c.t, *c.paths, *c.steps, *c.seed);
  const std::string t = format_double(rep.t);
  std::string csv = "experiment,t,quantity,estimate,std_error,paths,steps,seed\n";
  csv += fmt::format("mckean-singer,{},interior,{},0,{}\n", t, format_double(rep.interior), mc_tail(c));
  csv += fmt::format("mckean-singer,{},boundary_closed,{},0,{}\n", t, format_double(rep.boundary_closed),
                     mc_tail(c));
  csv += fmt::format("mckean-singer,{},boundary_mc,{},{},{}\n", t, format_double(rep.boundary_mc),
                     format_double(rep.boundary_mc_se), mc_tail(c));
  csv += fmt::format("mckean-singer,{},min_hit_supertrace,{},0,{}\n", t,
                     format_double(rep.min_hit_supertrace), mc_tail(c));
  csv += fmt::format("mckean-singer,{},max_hit_supertrace,{},0,{}\n", t,
                     format_double(rep.max_hit_supertrace), mc_tail(c));
  r.tables.push_back({"mckean_singer.csv", csv});

  r.checks.push_back(within("interior", rep.interior, 0.0, 0.0));
  r.checks.push_back(within("boundary closed form", rep.boundary_closed, 1.0, kMcKeanClosedTol));
  r.checks.push_back(within("boundary Monte Carlo", rep.boundary_mc, 1.0, kMcKeanMcRelTol));
  r.checks.push_back(within("min str on hitting paths", rep.min_hit_supertrace, 1.0, 0.0));
  r.checks.push_back(within("max str on hitting paths", rep.max_hit_supertrace, 1.0, 0.0));
  r.details = {{"t", rep.t},
               {"interior", rep.interior},
               {"boundary_closed", rep.boundary_closed},
               {"boundary_mc", rep.boundary_mc},
               {"boundary_mc_se", rep.boundary_mc_se},
               {"hitting_paths", rep.hitting_paths}};
  r.summary.push_back(fmt::format("interior={} boundary closed={:.6f} boundary MC={} ± {} ({} hitting paths)",
                                  fmt6(rep.interior), rep.boundary_closed, fmt6(rep.boundary_mc),
                                  fmt6(rep.boundary_mc_se), rep.hitting_paths));
  return r;
}

// patodi ----------------------------------------------------------------------

ExperimentResult patodi(const ExperimentConfig& c) {
  using exterior::Endomorphism;
  ExperimentResult r;
  std::string csv = "trial,dim,length,direct,patodi,permuted,scale\n";
  double low = 0.0, top = 0.0, perm = 0.0;
  bool low_exact = true;
  for (std::size_t trial = 0; trial < *c.paths; ++trial) {
    stochastic::RngStream rng(*c.seed, trial);
    const int d = 2 + static_cast<int>(trial % 5);
    const int l = 1 + std::min(d - 1, static_cast<int>(rng.uniform() * d));
    std::vector<Endomorphism> ts;
    for (int i = 0; i < l; ++i) {
      Eigen::MatrixXd m(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) m(a, b) = 2.0 * rng.uniform() - 1.0;
      ts.emplace_back(m);
    }
    auto shuffled = ts;
    for (int i = l - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[std::min(i, static_cast<int>(rng.uniform() * (i + 1)))]);

    exterior::GradedOperator acc = exterior::extend_derivation(ts[0]);
    for (int i = 1; i < l; ++i) acc = acc * exterior::extend_derivation(ts[i]);
    const double scale = acc.trace_scale();
    const double direct = exterior::supertrace(acc);
    const double lemma = exterior::patodi_supertrace(ts);
    const double permuted = exterior::direct_supertrace(shuffled);
    if (l < d) {
      low = std::max(low, std::abs(direct) / scale);
      low_exact = low_exact && lemma == 0.0;
    } else {
      top = std::max(top, std::abs(direct - lemma) / scale);
    }
    perm = std::max(perm, std::abs(permuted - direct) / scale);
    csv += fmt::format("{},{},{},{},{},{},{}\n", trial, d, l, format_double(direct), format_double(lemma),
                       format_double(permuted), format_double(scale));
  }
  r.tables.push_back({"patodi.csv", csv});
  r.checks.push_back(within("max |str|/scale for l < d", low, 0.0, kPatodiTol));
  r.checks.push_back({"lemma value 0 for l < d", low_exact ? 0.0 : 1.0, 0.0, 0.0, low_exact});
  r.checks.push_back(within("max |direct − determinant coefficient|/scale at l = d", top, 0.0, kPatodiTol));
  r.checks.push_back(within("max |permuted − direct|/scale", perm, 0.0, kPatodiTol));
  r.details = {{"tuples", *c.paths}, {"low", low}, {"top", top}, {"permutation", perm}};
  r.summary.push_back(fmt::format("{} tuples, dims 2-6: l<d {} top {} permutation {}", *c.paths, fmt6(low),
                                  fmt6(top), fmt6(perm)));
  return r;
}

// scaling ---------------------------------------------------------------------

ExperimentResult scaling(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto model = geometry::make_model(c.model);
  const auto res = stochastic::local_time_scaling_check(model, Point::Zero(model.dim), c.n, c.t_grid,
                                                        *c.paths, *c.steps, *c.seed);
  std::string csv = "experiment,n,t,estimate,std_error,paths,steps,seed\n";
  std::string slopes = "experiment,n,slope,slope_se,paths,steps,seed\n";
  for (const auto& s : res) {
    for (std::size_t i = 0; i < s.t.size(); ++i)
      csv += fmt::format("scaling,{},{},{},{},{}\n", s.n, format_double(s.t[i]), format_double(s.moment[i]),
                         format_double(s.moment_se[i]), mc_tail(c));
    slopes += fmt::format("scaling,{},{},{},{}\n", s.n, format_double(s.slope), format_double(s.slope_se),
                          mc_tail(c));
    r.checks.push_back(within(fmt::format("slope(n={})", s.n), s.slope, 0.5 * s.n, kSlopeTol[s.n]));
    r.details["slopes"].push_back({{"n", s.n}, {"slope", s.slope}, {"slope_se", s.slope_se}});
    r.summary.push_back(fmt::format("n={}: slope={} ± {} (expected {})", s.n, fmt6(s.slope),
                                    fmt6(s.slope_se), fmt6(0.5 * s.n)));
  }
  r.tables.push_back({"scaling.csv", csv});
  r.tables.push_back({"scaling_slopes.csv", slopes});
  return r;
}

// bridge ----------------------------------------------------------------------

// Standard deviation of the Kolmogorov distribution (the limit law of √n·KS
// under the null): mean √(π/2)·ln 2, second moment π²/12.
double kolmogorov_sd() {
  const double pi = std::numbers::pi;
  const double mean = std::sqrt(pi / 2.0) * std::log(2.0);
  return std::sqrt(pi * pi / 12.0 - mean * mean);
}

ExperimentResult bridge(const ExperimentConfig& c) {
  using stochastic::BridgeDrift;
  ExperimentResult r;
  std::vector<std::pair<std::string, BridgeDrift>> drifts;
  if (c.model.empty() || c.model == "halfspace") drifts.emplace_back("flat", BridgeDrift::flat);
  if (c.model.empty() || c.model == "disk") drifts.emplace_back("disk_chart", BridgeDrift::disk_chart);
  auto grid = c.t_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  const double ks_se = kolmogorov_sd() / std::sqrt(static_cast<double>(*c.paths));

  std::string csv = "experiment,drift,t,ks,ks_null_std_error,mean,drift_sup,paths,steps,seed\n";
  for (const auto& [label, drift] : drifts) {
    const auto rows = stochastic::scaled_bridge_convergence(grid, 0.0, drift, *c.paths, *c.steps, *c.seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      csv += fmt::format("bridge,{},{},{},{},{},{},{}\n", label, format_double(row.t), format_double(row.ks),
                         format_double(ks_se), format_double(row.mean), format_double(row.drift_sup),
                         mc_tail(c));
      if (i > 0) worst = std::max(worst, row.ks - rows[i - 1].ks);
      r.details[label].push_back({{"t", row.t}, {"ks", row.ks}, {"mean", row.mean}, {"drift_sup", row.drift_sup}});
      r.summary.push_back(fmt::format("{} t={}: KS={} drift sup={}", label, fmt6(row.t), fmt6(row.ks),
                                      fmt6(row.drift_sup)));
    }
    if (drift == BridgeDrift::flat) {
      // The flat law does not depend on t, so the KS sequence is constant.
      r.checks.push_back({"flat KS non-increasing in t", worst, 0.0, 0.0, worst <= 0.0});
      r.checks.push_back({"flat KS at smallest t", rows.back().ks, 0.0, kBridgeKsTol,
                          rows.back().ks < kBridgeKsTol});
    } else {
      r.checks.push_back({"disk chart KS strictly decreasing in t", worst, 0.0, 0.0, worst < 0.0});
    }
  }
  r.tables.push_back({"bridge.csv", csv});
  return r;
}

// reflection ------------------------------------------------------------------

ExperimentResult reflection(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto model = geometry::make_model(c.model);
  const Point x = probe_point(model.dim);
  const auto checks = stochastic::reflection_identity_check(model, x, *c.t, *c.paths, *c.steps, *c.seed);
  std::string csv = "experiment,functional,side,estimate,std_error,paths,steps,seed\n";
  for (const auto& k : checks) {
    csv += fmt::format("reflection,{},lhs,{},{},{}\n", k.functional, format_double(k.lhs),
                       format_double(k.lhs_se), mc_tail(c));
    csv += fmt::format("reflection,{},rhs,{},{},{}\n", k.functional, format_double(k.rhs),
                       format_double(k.rhs_se), mc_tail(c));
    const double tol = kReflectionSigmas * std::hypot(k.lhs_se, k.rhs_se);
    r.checks.push_back(within("G = " + k.functional, k.lhs - k.rhs, 0.0, tol));
    r.details["functionals"].push_back(
        {{"G", k.functional}, {"lhs", k.lhs}, {"lhs_se", k.lhs_se}, {"rhs", k.rhs}, {"rhs_se", k.rhs_se}});
    r.summary.push_back(fmt::format("G={}: lhs={} ± {} rhs={} ± {}", k.functional, fmt6(k.lhs), fmt6(k.lhs_se),
                                    fmt6(k.rhs), fmt6(k.rhs_se)));
  }
  r.tables.push_back({"reflection.csv", csv});
  return r;
}

// transport -------------------------------------------------------------------

ExperimentResult transport(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto model = geometry::make_model(c.model);
  const int order = c.n.front();
  const auto tm = feynman_kac::parallel_correction_moments(model, probe_point(model.dim), c.t_grid, order,
                                                           *c.paths, *c.steps, *c.seed);
  std::string csv = "experiment,order,t,estimate,std_error,paths,steps,seed\n";
  for (std::size_t i = 0; i < tm.t.size(); ++i)
    csv += fmt::format("transport,{},{},{},{},{}\n", order, format_double(tm.t[i]), format_double(tm.moment[i]),
                       format_double(tm.std_error[i]), mc_tail(c));
  r.tables.push_back({"transport.csv", csv});
  if (tm.trivial) {
    r.checks.push_back({"moments vanish (flat transport)", 0.0, 0.0, 0.0, true});
    r.summary.push_back("transport is the identity on every path");
  } else {
    r.checks.push_back(within(fmt::format("slope(N={})", order), tm.slope, order, kTransportSlopeTol));
    r.summary.push_back(fmt::format("N={}: slope={} ± {} (expected {})", order, fmt6(tm.slope),
                                    fmt6(tm.slope_se), order));
  }
  r.details = {{"order", order}, {"slope", tm.slope}, {"slope_se", tm.slope_se}, {"trivial", tm.trivial}};
  return r;
}

// boundary-limit --------------------------------------------------------------

ExperimentResult boundary_limit(const ExperimentConfig& c) {
  ExperimentResult r;
  const auto model = geometry::make_model(c.model);
  const int p = *c.p, q = c.q.front();
  const auto lc = feynman_kac::boundary_limit_coefficient(model, probe_boundary_point(model.dim), p, q,
                                                          c.t_grid, *c.paths, *c.steps, *c.seed);
  std::string csv = "experiment,p,q,t,estimate,std_error,closed_form,paths,steps,seed\n";
  for (std::size_t i = 0; i < lc.t.size(); ++i) {
    csv += fmt::format("boundary-limit,{},{},{},{},{},{},{}\n", p, q, format_double(lc.t[i]),
                       format_double(lc.estimate[i]), format_double(lc.std_error[i]),
                       format_double(lc.closed_form), mc_tail(c));
    r.summary.push_back(fmt::format("t={}: estimate={} ± {} closed form={}", fmt6(lc.t[i]), fmt6(lc.estimate[i]),
                                    fmt6(lc.std_error[i]), fmt6(lc.closed_form)));
    if (2 * p + q == model.dim - 1)
      r.checks.push_back(within(fmt::format("C(p={},q={}) at t={}", p, q, fmt6(lc.t[i])), lc.estimate[i],
                                lc.closed_form, kLimitSigmas * lc.std_error[i]));
  }
  if (2 * p + q > model.dim - 1) {
    // Frozen terms scale like t^{(2p+q−d+1)/2}.
    const double expected = 0.5 * (2 * p + q - model.dim + 1);
    std::vector<double> mag;
    for (double v : lc.estimate) mag.push_back(std::abs(v));
    if (std::any_of(mag.begin(), mag.end(), [](double v) { return v == 0.0; })) {
      r.checks.push_back({"frozen term vanishes", 0.0, 0.0, 0.0, true});
    } else {
      const auto fit = stochastic::loglog_fit(lc.t, mag, lc.std_error);
      r.checks.push_back(within("vanishing rate", fit.slope, expected, kLimitSigmas * fit.slope_se));
    }
  }
  r.tables.push_back({"boundary_limit.csv", csv});
  r.details = {{"p", p}, {"q", q}, {"closed_form", lc.closed_form}};
  return r;
}

}  // namespace

bool ExperimentResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"verify-gbc", "moments",   "mckean-singer",
                                              "patodi",     "scaling",   "bridge",
                                              "reflection", "transport", "boundary-limit"};
  return names;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void apply_json(ExperimentConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("config")) {
    apply_json(cfg, j.at("config"));
    return;
  }
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "experiment") cfg.experiment = v.get<std::string>();
      else if (key == "model") cfg.model = v.get<std::string>();
      else if (key == "t") cfg.t = v.get<double>();
      else if (key == "t_grid" || key == "t-grid") cfg.t_grid = as_list<double>(v);
      else if (key == "paths") cfg.paths = v.get<std::size_t>();
      else if (key == "steps") cfg.steps = v.get<int>();
      else if (key == "q") cfg.q = as_list<int>(v);
      else if (key == "n") cfg.n = as_list<int>(v);
      else if (key == "p") cfg.p = v.get<int>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "out") cfg.out = v.get<std::string>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }
}

json to_json(const ExperimentConfig& cfg) {
  json j{{"experiment", cfg.experiment}, {"out", cfg.out.string()}};
  if (!cfg.model.empty()) j["model"] = cfg.model;
  if (cfg.t) j["t"] = *cfg.t;
  if (!cfg.t_grid.empty()) j["t_grid"] = cfg.t_grid;
  if (cfg.paths) j["paths"] = *cfg.paths;
  if (cfg.steps) j["steps"] = *cfg.steps;
  if (!cfg.q.empty()) j["q"] = cfg.q;
  if (!cfg.n.empty()) j["n"] = cfg.n;
  if (cfg.p) j["p"] = *cfg.p;
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

ExperimentConfig with_defaults(ExperimentConfig c) {
  const std::string& e = c.experiment;
  auto set_grid = [&](std::vector<double> g) {
    if (c.t_grid.empty()) c.t_grid = std::move(g);
  };
  if (!c.seed) {
    try {
      c.seed = stochastic::default_seed();
    } catch (const std::invalid_argument& err) {
      throw ConfigError(err.what());
    }
  }
  if (e == "moments") {
    if (c.q.empty()) c.q = {0, 1, 2, 3};
    if (!c.paths) c.paths = 100000;
    if (!c.steps) c.steps = 1000;
  } else if (e == "mckean-singer") {
    if (c.model.empty()) c.model = "interval";
    if (!c.t) c.t = 0.05;
    if (!c.paths) c.paths = 100000;
    if (!c.steps) c.steps = 200;
  } else if (e == "patodi") {
    if (!c.paths) c.paths = 1000;
  } else if (e == "scaling") {
    if (c.model.empty()) c.model = "halfspace";
    if (c.n.empty()) c.n = {1, 2, 3};
    set_grid({0.2, 0.1, 0.05, 0.025});
    if (!c.paths) c.paths = 100000;
    if (!c.steps) c.steps = 200;
  } else if (e == "bridge") {
    set_grid({0.1, 0.05, 0.01});
    if (!c.paths) c.paths = 10000;
    if (!c.steps) c.steps = 1000;
  } else if (e == "reflection") {
    if (c.model.empty()) c.model = "interval";
    if (!c.t) c.t = 0.1;
    if (!c.paths) c.paths = 100000;
    if (!c.steps) c.steps = 200;
  } else if (e == "transport") {
    if (c.model.empty()) c.model = "disk";
    if (c.n.empty()) c.n = {1};
    set_grid({0.2, 0.1, 0.05, 0.025});
    if (!c.paths) c.paths = 1000;
    if (!c.steps) c.steps = 100;
  } else if (e == "boundary-limit") {
    if (c.model.empty()) c.model = "disk";
    if (!c.p) c.p = 0;
    if (c.q.empty()) c.q = {1};
    set_grid({0.1, 0.01});
    if (!c.paths) c.paths = 20000;
    if (!c.steps) c.steps = 200;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    throw ConfigError(fmt::format("unknown experiment '{}'; experiments: {}", c.experiment, joined(names)));
  const auto& models = geometry::model_names();
  if (!c.model.empty() && std::find(models.begin(), models.end(), c.model) == models.end())
    throw ConfigError(fmt::format("unknown model '{}'; registered models: {}", c.model, joined(models)));

  auto require_model = [&](std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
      if (c.model == a) return;
    std::vector<std::string> list(allowed.begin(), allowed.end());
    throw ConfigError(fmt::format("{} does not run on model '{}'; supported: {}", c.experiment, c.model,
                                  joined(list)));
  };
  const std::string& e = c.experiment;
  if (e == "verify-gbc" && !c.model.empty() && !geometry::make_model(c.model).compact)
    throw ConfigError(fmt::format("verify-gbc needs a compact model; '{}' is not compact", c.model));
  if ((e == "moments" || e == "patodi") && !c.model.empty())
    throw ConfigError(e + " is model independent; drop --model");
  if (e == "mckean-singer") require_model({"interval"});
  if (e == "scaling" || e == "reflection") require_model({"halfspace", "interval"});
  if (e == "bridge" && !c.model.empty()) require_model({"halfspace", "disk"});
  if (e == "boundary-limit" && !geometry::make_model(c.model).has_boundary())
    throw ConfigError(fmt::format("boundary-limit needs a model with boundary; '{}' has none", c.model));

  if (is_mc(e)) {
    if (!c.paths || *c.paths < kMinPaths)
      throw ConfigError(fmt::format("paths must be at least {} for Monte Carlo experiments", kMinPaths));
    if (!c.steps || *c.steps < stochastic::kMinSteps)
      throw ConfigError(fmt::format("steps must be at least {}", stochastic::kMinSteps));
  } else if (e == "patodi" && (!c.paths || *c.paths == 0)) {
    throw ConfigError("patodi needs at least one tuple (--paths)");
  }
  if (c.t && !(*c.t > 0.0)) throw ConfigError("t must be positive");
  for (double t : c.t_grid)
    if (!(t > 0.0)) throw ConfigError("every t-grid entry must be positive");
  if ((e == "scaling" || e == "transport" || e == "bridge") && c.t_grid.size() < 2)
    throw ConfigError(e + " needs a t-grid with at least two values");
  if (e == "moments")
    for (int q : c.q)
      if (q < 0) throw ConfigError("moment order q must be non-negative");
  if (e == "scaling")
    for (int n : c.n)
      if (n < 1 || n > 3) throw ConfigError("scaling order n must lie in 1..3");
  if (e == "transport" && (c.n.size() != 1 || c.n.front() < 1))
    throw ConfigError("transport takes a single order n ≥ 1");
  if (e == "boundary-limit" && (c.q.size() != 1 || c.q.front() < 0 || !c.p || *c.p < 0))
    throw ConfigError("boundary-limit takes a single p ≥ 0 and q ≥ 0");
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  const std::string& e = c.experiment;
  if (e == "verify-gbc") return verify_gbc(c);
  if (e == "moments") return moments(c);
  if (e == "mckean-singer") return mckean_singer(c);
  if (e == "patodi") return patodi(c);
  if (e == "scaling") return scaling(c);
  if (e == "bridge") return bridge(c);
  if (e == "reflection") return reflection(c);
  if (e == "transport") return transport(c);
  if (e == "boundary-limit") return boundary_limit(c);
  throw ConfigError("unknown experiment '" + e + "'");
}

int run(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  ExperimentResult res;
  try {
    cfg = with_defaults(std::move(cfg));
    validate(cfg);
    res = run_experiment(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << cfg.experiment << " failed: " << e.what() << '\n';
    return kExitFail;
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) {
    err << "cannot create output directory " << cfg.out << ": " << ec.message() << '\n';
    return kExitConfig;
  }
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream f(cfg.out / name, std::ios::binary);
    f << data;
    if (!f) throw std::runtime_error("cannot write " + (cfg.out / name).string());
  };

  json report{{"experiment", cfg.experiment}, {"pass", res.pass()}, {"details", res.details}};
  report["checks"] = json::array();
  for (const auto& c : res.checks)
    report["checks"].push_back({{"name", c.name},
                                {"value", c.value},
                                {"target", c.target},
                                {"tolerance", c.tolerance},
                                {"pass", c.pass}});
  json files = json::object();
  try {
    for (const auto& t : res.tables) {
      write(t.file, t.contents);
      files[t.file] = sha256_hex(t.contents);
    }
    const std::string report_text = report.dump(2) + "\n";
    write("report.json", report_text);
    files["report.json"] = sha256_hex(report_text);
    json manifest{{"config", to_json(cfg)},
                  {"version", GBC_VERSION},
                  {"started", started},
                  {"finished", utc_now()},
                  {"files", files}};
    write("manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitFail;
  }

  for (const auto& line : res.summary) out << line << '\n';
  for (const auto& c : res.checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << fmt6(c.value) << " (target " << fmt6(c.target)
        << ", tolerance " << fmt6(c.tolerance) << ")\n";
  out << cfg.experiment << ": " << (res.pass() ? "pass" : "FAIL") << '\n';
  return res.pass() ? kExitPass : kExitFail;
}

std::string list_models() {
  std::string s = fmt::format("{:<12}{:>4}{:>5}\n", "model", "dim", "chi");
  for (const auto& name : geometry::model_names()) {
    const auto m = geometry::make_model(name);
    s += fmt::format("{:<12}{:>4}{:>5}\n", name, m.dim, m.euler_characteristic);
  }
  return s;
}

}  // namespace gbc::experiments
