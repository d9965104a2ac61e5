#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "klab/scenario.hpp"

using namespace klab;
namespace fs = std::filesystem;

namespace {

bool has_error(const ValidationResult& r, const std::string& text) {
  return std::any_of(r.errors.begin(), r.errors.end(),
                     [&](const std::string& e) { return e.find(text) != std::string::npos; });
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("klab-test-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli(const std::string& args, const TempDir& dir) {
  const auto out = dir.path / "stdout.txt";
  const auto err = dir.path / "stderr.txt";
  const std::string cmd = std::string("\"") + KLAB_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const TempDir& dir, const std::string& name, const nlohmann::json& j) {
  const auto p = dir.path / name;
  std::ofstream(p) << j.dump();
  return p;
}

}  // namespace

TEST_CASE("validate reports a missing scenario") {
  const auto r = validate_config(nlohmann::json::object());
  CHECK_FALSE(r.ok());
  CHECK(has_error(r, "scenario: required"));
}

TEST_CASE("validate aggregates every error") {
  const auto r = validate_config({{"tau", -1.0}, {"N", 3}, {"colour", "red"}});
  CHECK(has_error(r, "scenario: required"));
  CHECK(has_error(r, "tau: must be positive"));
  CHECK(has_error(r, "N: must be an integer >= 8"));
  CHECK(has_error(r, "colour: unknown field"));
  CHECK(r.errors.size() == 4);
}

TEST_CASE("validate names the registry for an unknown scenario") {
  const auto r = validate_config({{"scenario", "nope"}});
  REQUIRE(r.errors.size() == 1);
  for (const auto& s : list_scenarios()) CHECK(r.errors[0].find(s.name) != std::string::npos);
}

TEST_CASE("validate fills the documented defaults") {
  const auto r = validate_config({{"scenario", "bernstein-classical"}});
  REQUIRE(r.ok());
  const auto& c = *r.config;
  CHECK(c.N == 200);
  CHECK(c.tau == 0.02);
  CHECK(c.epsilon == 0.1);
  CHECK(c.grid_m == 200);
  CHECK(c.seed == 0);
  CHECK(c.offset == 0);
  CHECK(c.operator_name == "bernstein");
  CHECK(c.method.at("kind") == "norm");
  CHECK(c.output_dir == "results/bernstein-classical");

  const auto fejer = validate_config({{"scenario", "fejer-trig"}});
  REQUIRE(fejer.ok());
  CHECK(fejer.config->grid_m == 256);
  const auto big = validate_config({{"scenario", "fejer-trig"}, {"N", 400}});
  REQUIRE(big.ok());
  CHECK(big.config->grid_m == 402);
}

TEST_CASE("validate rejects inconsistent parameters") {
  CHECK(has_error(validate_config({{"scenario", "fejer-trig"}, {"grid_m", 64}}),
                  "N: must not exceed grid_m - 2 = 62 for operator fejer"));
  CHECK(has_error(validate_config({{"scenario", "bernstein-classical"}, {"operator", "wavelet"}}),
                  "operator: scenario bernstein-classical accepts one of"));
  CHECK(has_error(validate_config({{"scenario", "almost-alternating"}, {"operator", "bernstein"}}),
                  "operator: not used"));
  CHECK(has_error(validate_config({{"scenario", "regularity-audit"}, {"method", {{"kind", "norm"}}}}),
                  "method.kind: 'norm' is not supported"));
  CHECK(has_error(validate_config({{"scenario", "statistical-counterexample"}, {"epsilon", 1.5}}),
                  "epsilon: must lie in (0, 1)"));
  CHECK(has_error(validate_config({{"scenario", "cesaro-matrix"}, {"N", 20}, {"offset", 15}}),
                  "with offset 15"));
  CHECK(has_error(validate_config_text("{not json"), "config: invalid JSON"));
}

TEST_CASE("normalized configs validate to themselves") {
  for (const auto& s : list_scenarios()) {
    const auto r = validate_config({{"scenario", s.name}});
    REQUIRE(r.ok());
    const auto again = validate_config(to_json(*r.config));
    REQUIRE(again.ok());
    CHECK(to_json(*again.config) == to_json(*r.config));
  }
}

TEST_CASE("bernstein-classical meets its expectation") {
  const auto r = validate_config({{"scenario", "bernstein-classical"}});
  const auto result = execute(*r.config);
  CHECK(result.expectation_met());
  CHECK(result.report.at("expectation_met") == true);
  CHECK_FALSE(result.files.empty());
}

TEST_CASE("cli list-scenarios prints the registry") {
  const TempDir dir;
  const auto run = cli("list-scenarios", dir);
  CHECK(run.status == exit_expected);
  for (const auto& s : list_scenarios()) CHECK(run.out.find(s.name) != std::string::npos);
}

TEST_CASE("cli validate prints the normalized config") {
  const TempDir dir;
  const auto cfg = write_config(dir, "c.json", {{"scenario", "cesaro-matrix"}});
  const auto run = cli("validate --config \"" + cfg.string() + "\"", dir);
  REQUIRE(run.status == exit_expected);
  const auto j = nlohmann::json::parse(run.out);
  CHECK(j.at("scenario") == "cesaro-matrix");
  CHECK(j.at("method").at("kind") == "matrix");

  const auto bad = write_config(dir, "bad.json", {{"tau", -1}});
  const auto fail = cli("validate --config \"" + bad.string() + "\"", dir);
  CHECK(fail.status == exit_config_error);
  CHECK(fail.err.find("scenario: required") != std::string::npos);
  CHECK(fail.err.find("tau: must be positive") != std::string::npos);
}

TEST_CASE("cli run on an unknown scenario exits 1 with the registry") {
  const TempDir dir;
  const auto cfg = write_config(dir, "c.json", {{"scenario", "nope"}});
  const auto run = cli("run --config \"" + cfg.string() + "\"", dir);
  CHECK(run.status == exit_config_error);
  CHECK(run.err.find("registered scenarios") != std::string::npos);
  for (const auto& s : list_scenarios()) CHECK(run.err.find(s.name) != std::string::npos);
}

TEST_CASE("cli run on a missing config exits 1") {
  const TempDir dir;
  CHECK(cli("run --config \"" + (dir.path / "absent.json").string() + "\"", dir).status ==
        exit_config_error);
}

TEST_CASE("cli run writes byte-identical outputs for a fixed config and seed") {
  const TempDir dir;
  const auto out = dir.path / "out";
  const auto cfg = write_config(dir, "c.json", {{"scenario", "squeeze-audit"}});
  const std::string args = "run --config \"" + cfg.string() + "\" --seed 7 --output-dir \"" + out.string() + "\"";
  const auto first = cli(args, dir);
  REQUIRE(first.status == exit_expected);
  std::vector<std::pair<fs::path, std::string>> files;
  for (const auto& e : fs::directory_iterator(out)) files.emplace_back(e.path(), slurp(e.path()));
  const auto second = cli(args, dir);
  REQUIRE(second.status == exit_expected);
  CHECK(first.out == second.out);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "summary.txt"));
  CHECK(files.size() > 2);
  std::size_t after = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    ++after;
    CHECK(e.path().extension() != ".tmp");
  }
  CHECK(after == files.size());
  for (const auto& [path, body] : files) CHECK(slurp(path) == body);
  CHECK(nlohmann::json::parse(slurp(out / "report.json")).at("config").at("seed") == 7);
}

TEST_CASE("cli run exits 2 and names condition (iii) for doubled Cesaro") {
  const TempDir dir;
  const auto cfg = write_config(
      dir, "c.json",
      {{"scenario", "regularity-audit"},
       {"method", {{"kind", "matrix"}, {"matrix", {{"name", "cesaro"}, {"scale", 2.0}}}}},
       {"output_dir", (dir.path / "out").string()}});
  const auto run = cli("run --config \"" + cfg.string() + "\"", dir);
  CHECK(run.status == exit_mismatch);
  CHECK(run.out.find("FAIL  (iii) row sums tend to 1") != std::string::npos);
  CHECK(run.out.find("PASS  (i) bounded row sums") != std::string::npos);
  CHECK(run.out.find("PASS  (ii) vanishing columns") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir.path / "out" / "report.json"));
  CHECK(report.at("regularity").at("row_sum_at_horizon").get<double>() ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cli run of the statistical counterexample exits 0") {
  const TempDir dir;
  const auto cfg = write_config(dir, "c.json",
                                {{"scenario", "statistical-counterexample"},
                                 {"output_dir", (dir.path / "out").string()}});
  const auto run = cli("run --config \"" + cfg.string() + "\"", dir);
  CHECK(run.status == exit_expected);
  CHECK(run.out.find("FAIL") == std::string::npos);
}
