#include <doctest.h>

#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gbc/experiments.hpp"

using namespace gbc::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256(const std::string& s) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(s.data(), s.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gbc_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_quiet(const ExperimentConfig& cfg, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(cfg, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("config precedence: flags over file over defaults") {
  ExperimentConfig cfg;
  apply_json(cfg, {{"experiment", "moments"}, {"paths", 5000}, {"steps", 300}, {"q", {1, 2}}});
  apply_json(cfg, {{"paths", 2000}});
  const auto full = with_defaults(cfg);
  CHECK(*full.paths == 2000u);
  CHECK(*full.steps == 300);
  CHECK(full.q == std::vector<int>{1, 2});

  const auto bare = with_defaults(ExperimentConfig{"moments"});
  CHECK(*bare.paths == 100000u);
  CHECK(*bare.steps == 1000);
  CHECK(bare.q == std::vector<int>{0, 1, 2, 3});

  ExperimentConfig lists;
  apply_json(lists, {{"t-grid", "0.2,0.1"}, {"n", "1,3"}, {"q", 2}});
  CHECK(lists.t_grid == std::vector<double>{0.2, 0.1});
  CHECK(lists.n == std::vector<int>{1, 3});
  CHECK(lists.q == std::vector<int>{2});

  CHECK_THROWS_AS(apply_json(lists, {{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(apply_json(lists, {{"paths", "many"}}), ConfigError);
  CHECK_THROWS_AS(apply_json(lists, {{"t_grid", "0.1,x"}}), ConfigError);
}

TEST_CASE("manifest config round trip") {
  ExperimentConfig cfg{"scaling", "interval"};
  cfg.t_grid = {0.2, 0.1};
  cfg.paths = 4000;
  cfg.seed = 11;
  ExperimentConfig back;
  apply_json(back, {{"config", to_json(cfg)}, {"version", "x"}});
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("validation names the violated invariant") {
  auto message = [](ExperimentConfig c) {
    try {
      validate(with_defaults(std::move(c)));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const auto unknown = message({"verify-gbc", "no-such"});
  for (const char* m : {"interval", "disk", "hemisphere", "ball3", "sphere2", "halfspace"})
    CHECK(unknown.find(m) != std::string::npos);
  CHECK(message({"verify-gbc", "halfspace"}).find("compact") != std::string::npos);
  CHECK(message({"no-such-experiment"}).find("moments") != std::string::npos);
  ExperimentConfig few{"moments"};
  few.paths = 999;
  CHECK(message(few).find("1000") != std::string::npos);
  ExperimentConfig coarse{"moments"};
  coarse.steps = 10;
  CHECK(message(coarse).find("steps") != std::string::npos);
  CHECK(message({"mckean-singer", "disk"}).find("interval") != std::string::npos);
  ExperimentConfig high{"scaling"};
  high.n = {4};
  CHECK(message(high).find("1..3") != std::string::npos);
  CHECK(message({"boundary-limit", "sphere2"}).find("boundary") != std::string::npos);
  CHECK(message({"verify-gbc", "disk"}).empty());
}

TEST_CASE("seed from the environment") {
  ::setenv("GBC_SEED", "4242", 1);
  CHECK(*with_defaults(ExperimentConfig{"moments"}).seed == 4242u);
  ExperimentConfig explicit_seed{"moments"};
  explicit_seed.seed = 7;
  CHECK(*with_defaults(explicit_seed).seed == 7u);
  ::setenv("GBC_SEED", "not-a-number", 1);
  CHECK_THROWS_AS(with_defaults(ExperimentConfig{"moments"}), ConfigError);
  ::unsetenv("GBC_SEED");
}

TEST_CASE("model table") {
  const std::string table = list_models();
  std::istringstream in(table);
  std::string line;
  int rows = 0;
  bool interval = false, sphere = false;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string name;
    int dim = 0, chi = 0;
    fields >> name >> dim >> chi;
    ++rows;
    interval = interval || (name == "interval" && dim == 1 && chi == 1);
    sphere = sphere || (name == "sphere2" && dim == 2 && chi == 2);
  }
  CHECK(rows == 6);
  CHECK(interval);
  CHECK(sphere);
}

TEST_CASE("verify-gbc writes report, tables and manifest") {
  ExperimentConfig cfg{"verify-gbc", "disk"};
  cfg.out = scratch("verify");
  std::string out;
  CHECK(run_quiet(cfg, &out) == kExitPass);
  CHECK(out.find("total=1.000000") != std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(cfg.out / "manifest.json"));
  CHECK(manifest.at("config").at("model") == "disk");
  CHECK(manifest.contains("started"));
  CHECK(manifest.contains("finished"));
  CHECK(manifest.at("version") == GBC_VERSION);
  for (const auto& [file, digest] : manifest.at("files").items())
    CHECK(digest.get<std::string>() == sha256(slurp(cfg.out / file)));
  const auto report = nlohmann::json::parse(slurp(cfg.out / "report.json"));
  CHECK(report.at("pass") == true);

  std::string err;
  CHECK(run_quiet(ExperimentConfig{"verify-gbc", "no-such"}, nullptr, &err) == kExitConfig);
  CHECK(err.find("registered models") != std::string::npos);
}

TEST_CASE("CSV output is byte-identical across reruns and carries MC metadata") {
  ExperimentConfig cfg{"moments"};
  cfg.q = {1, 2};
  cfg.paths = 1000;
  cfg.steps = 100;
  cfg.seed = 3;
  cfg.out = scratch("det_a");
  run_quiet(cfg);
  const std::string first = slurp(cfg.out / "moments.csv");
  cfg.out = scratch("det_b");
  run_quiet(cfg);
  CHECK(first == slurp(cfg.out / "moments.csv"));

  std::istringstream in(first);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "experiment,q,estimate,std_error,closed_form,paths,steps,seed");
  std::getline(in, row);
  CHECK(row.substr(row.size() - std::string(",1000,100,3").size()) == ",1000,100,3");

  // Rerunning from the manifest reproduces the bytes.
  ExperimentConfig again;
  std::ifstream mf(cfg.out / "manifest.json");
  apply_json(again, nlohmann::json::parse(mf));
  again.out = scratch("det_c");
  run_quiet(again);
  CHECK(first == slurp(again.out / "moments.csv"));

  ExperimentConfig other = cfg;
  other.seed = 4;
  other.out = scratch("det_d");
  run_quiet(other);
  CHECK(first != slurp(other.out / "moments.csv"));
}

TEST_CASE("full precision in tables") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("exit code follows the checks") {
  ExperimentConfig pass{"patodi"};
  pass.paths = 50;
  pass.seed = 1;
  pass.out = scratch("patodi");
  CHECK(run_quiet(pass) == kExitPass);

  ExperimentConfig exact{"moments"};
  exact.q = {0};
  exact.paths = 1000;
  exact.steps = 100;
  exact.seed = 1;
  exact.out = scratch("q0");
  const auto res = run_experiment(with_defaults(exact));
  REQUIRE(res.checks.size() == 1);
  CHECK(res.checks[0].value == 0.25);
  CHECK(res.pass());

  ExperimentResult failing;
  failing.checks.push_back({"x", 1.0, 0.0, 0.5, false});
  CHECK(!failing.pass());
}
