// bpre: command-line front end.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "bpre/commands.hpp"
#include "bpre/config.hpp"
#include "bpre/report.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kAcceptanceFailure = 2, kRuntimeError = 3 };

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

bpre::ExperimentConfig resolve(const Overrides& o) {
  bpre::ExperimentConfig cfg = o.config_path.empty() ? bpre::ExperimentConfig{} : bpre::load_config(o.config_path);
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.workers) cfg.run.workers = *o.workers;
  if (o.out) cfg.output.directory = *o.out;
  if (o.format) cfg.output.format = *o.format;
  cfg.validate();
  return cfg;
}

int run_validate(const bpre::ExperimentConfig& cfg, const std::vector<int>& only) {
  const bpre::acceptance::Options opts{cfg.run.seed, cfg.run.workers};
  const std::vector<int> ids = only.empty() ? bpre::acceptance::criterion_ids() : only;
  int failed = 0;
  for (int id : ids) {
    const auto r = bpre::acceptance::run_criterion(id, opts);
    std::cout << bpre::acceptance::format_line(r) << std::endl;
    std::fprintf(stderr, "criterion %d: %.2f s\n", id, r.seconds);
    if (!r.passed) ++failed;
  }
  std::cout << (ids.size() - failed) << "/" << ids.size() << " criteria passed" << std::endl;
  return failed ? kAcceptanceFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subcritical branching processes in random environment with Pareto tails"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bpre::kVersion));

  Overrides o;
  std::vector<int> criteria;
  const std::vector<std::string> names = {"simulate", "constants", "survival", "unlaw", "flt", "validate"};
  for (const std::string& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config_path, "INI experiment file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
    if (name == "validate") sub->add_option("--criterion", criteria, "run only these criteria (1-14)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  int code = kOk;
  try {
    const bpre::ExperimentConfig cfg = resolve(o);
    if (command == "validate") {
      for (int id : criteria)
        if (id < 1 || id > 14) throw bpre::ConfigError("no acceptance criterion " + std::to_string(id));
      code = run_validate(cfg, criteria);
    } else {
      const bpre::CommandOutput result = bpre::run_command(command, cfg);
      for (const auto& [file, text] : result.files) bpre::write_file(cfg.output.directory, file, text);
      std::cout << result.summary;
      if (!result.summary.empty() && result.summary.back() != '\n') std::cout << '\n';
    }
  } catch (const bpre::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "%s: wall time %.2f s\n", command.c_str(), secs);
  return code;
}
