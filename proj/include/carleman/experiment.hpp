#ifndef CARLEMAN_EXPERIMENT_HPP
#define CARLEMAN_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "carleman/pde_solver.hpp"
#include "carleman/weights.hpp"

namespace carleman {

enum class ExperimentKind {
  Classify,
  Hardy,
  Energy,
  CarlemanSweep,
  LemmaChecks,
  Observability,
  NullControl,
  Convergence
};

std::string to_string(ExperimentKind k);

/// Invalid configuration; `errors` holds one "field: message" entry per problem.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string> &errors() const { return errors_; }

private:
  std::vector<std::string> errors_;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Classify;
  nlohmann::json coefficient;
  std::size_t N = 64;
  double grading = 2.0;
  double T = 1.0;
  std::size_t time_steps = 64;
  TimeScheme scheme = TimeScheme::CrankNicolson;
  std::size_t rannacher_steps = 2;
  std::optional<BoundaryCondition> boundary;  // empty: the regime's convention
  bool allow_regime_override = false;
  Interval omega{0.3, 0.7};
  std::optional<double> alpha_prime, beta_prime;
  std::vector<double> lambdas{2.0, 4.0};
  std::vector<double> s_grid;  // explicit s values; empty: s0 * 2^j
  int doublings = 4;
  double lambda0 = 2.0;
  std::optional<double> s0;
  std::size_t samples = 20;
  std::uint64_t seed = 42;
  std::vector<double> epsilons{1e-4, 1e-6, 1e-8};
  double cg_tol = 1e-8;
  std::size_t cg_max_iter = 500;
  std::string initial = "sin_pi";  // or "random"
  bool refine = true;
  std::vector<std::size_t> convergence_N{16, 32, 64};
  std::vector<std::size_t> convergence_M{16, 32, 64};
  std::size_t convergence_fine_N = 2048;
  std::size_t convergence_fine_M = 4096;
  std::string output_dir = "out";
  nlohmann::json raw;

  Interval omega_prime() const;
};

/// Parses and validates; throws ConfigError listing every bad field.
ExperimentConfig parse_config(const nlohmann::json &j);
ExperimentConfig load_config(const std::string &path);

/// Problem spec described by the config (coefficient, mesh, time grid, boundary).
ProblemSpec make_spec(const ExperimentConfig &cfg);

/// 64-bit FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json &j);

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunOptions {
  std::optional<std::size_t> jobs;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

struct ExperimentOutcome {
  std::vector<InvariantCheck> checks;
  nlohmann::json summary;
  std::string output_dir;

  bool passed() const;
  int exit_status() const { return passed() ? 0 : 1; }
};

/// Runs the configured experiment and writes <out>/<experiment>*.csv,
/// <out>/summary.json and <out>/run.log.
ExperimentOutcome run_experiment(const ExperimentConfig &cfg, const RunOptions &options = {});

}  // namespace carleman

#endif
