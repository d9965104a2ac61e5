#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "klab/parallel.hpp"
#include "klab/scenario.hpp"

namespace {

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void print_registry(std::ostream& out) {
  for (const auto& s : klab::list_scenarios()) out << "  " << s.name << "  " << s.description << '\n';
}

klab::ValidationResult load(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    klab::ValidationResult r;
    r.errors.push_back("config: cannot read '" + path + "'");
    return r;
  }
  return klab::validate_config_text(*text);
}

int report_errors(const klab::ValidationResult& r) {
  for (const auto& e : r.errors) std::cerr << "error: " << e << '\n';
  for (const auto& e : r.errors) {
    if (e.rfind("scenario:", 0) == 0) {
      std::cerr << "registered scenarios:\n";
      print_registry(std::cerr);
      break;
    }
  }
  return klab::exit_config_error;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"korovkin-lab: Korovkin-type approximation under summability methods"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--output-dir", output_dir, "override the config's output_dir");
  run->add_option("--seed", seed, "override the config's seed");

  auto* list = app.add_subcommand("list-scenarios", "list registered scenarios");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config and print it normalized");
  validate->add_option("--config", validate_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : klab::exit_config_error;
  }

  klab::apply_thread_env();

  if (*list) {
    print_registry(std::cout);
    return klab::exit_expected;
  }

  if (*validate) {
    const auto r = load(validate_path);
    if (!r.ok()) return report_errors(r);
    std::cout << klab::to_json(*r.config).dump(2) << '\n';
    return klab::exit_expected;
  }

  auto r = load(config_path);
  if (!r.ok()) return report_errors(r);
  auto config = *r.config;
  if (!output_dir.empty()) config.output_dir = output_dir;
  if (seed) config.seed = *seed;

  try {
    const auto result = klab::execute(config);
    klab::write_outputs(result, config, config.output_dir);
    std::cout << klab::summary_text(result, config);
    return result.expectation_met() ? klab::exit_expected : klab::exit_mismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return klab::exit_config_error;
  }
}
