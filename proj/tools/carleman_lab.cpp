// carleman-lab: run or validate an experiment config.
//
// Exit status: 0 all invariants hold, 1 an invariant failed or the run errored,
// 2 the config (or command line) is invalid.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "carleman/experiment.hpp"

namespace {

int report_config_error(const carleman::ConfigError &e) {
  std::cerr << "config error:\n";
  for (const auto &msg : e.errors()) std::cerr << "  " << msg << '\n';
  return 2;
}

std::optional<std::uint64_t> env_seed() {
  const char *s = std::getenv("CARLEMAN_LAB_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos == std::string(s).size()) return v;
  } catch (const std::exception &) {
  }
  throw carleman::ConfigError({"CARLEMAN_LAB_SEED: must be a nonnegative integer"});
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Carleman weights, inequality checks and null controls for degenerate parabolic problems"};
  app.require_subcommand(1);

  std::string run_path, validate_path;
  std::size_t jobs = 1;
  std::string out_dir;
  auto *run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", run_path, "JSON experiment config")->required();
  run->add_option("--jobs,-j", jobs, "worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out_dir, "output directory (overrides output_dir)");

  auto *validate = app.add_subcommand("validate", "check a config and print the resolved settings");
  validate->add_option("config", validate_path, "JSON experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const auto cfg = carleman::load_config(validate_path);
      const auto spec = carleman::make_spec(cfg);
      std::cout << "ok: " << carleman::to_string(cfg.experiment) << ", a = " << spec.coef.label()
                << ", boundary " << carleman::to_string(spec.left_bc) << ", N = " << spec.N()
                << ", M = " << spec.time_steps << ", config_hash " << carleman::config_hash(cfg.raw) << '\n';
      return 0;
    }

    const auto cfg = carleman::load_config(run_path);
    carleman::RunOptions opts;
    opts.jobs = jobs;
    if (!out_dir.empty()) opts.out_dir = out_dir;
    opts.seed = env_seed();
    const auto outcome = carleman::run_experiment(cfg, opts);
    for (const auto &c : outcome.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    std::cout << "results in " << outcome.output_dir << '\n';
    return outcome.exit_status();
  } catch (const carleman::ConfigError &e) {
    return report_config_error(e);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
