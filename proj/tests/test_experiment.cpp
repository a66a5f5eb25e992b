#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "carleman/experiment.hpp"

using namespace carleman;
using nlohmann::json;

namespace {

json base() {
  return {{"experiment", "classify"}, {"coefficient", {{"kind", "power"}, {"params", {{"gamma", 0.5}}}}}};
}

std::vector<std::string> errors_of(const json &j) {
  try {
    parse_config(j);
  } catch (const ConfigError &e) {
    return e.errors();
  }
  return {};
}

bool mentions(const std::vector<std::string> &errs, const std::string &field) {
  for (const auto &e : errs)
    if (e.rfind(field + ":", 0) == 0) return true;
  return false;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  auto j = base();
  j["mesh"] = {{"N", 32}};
  j["time"] = {{"T", 2.0}, {"scheme", "backward_euler"}};
  const auto cfg = parse_config(j);
  CHECK(cfg.N == 32);
  CHECK(cfg.T == 2.0);
  CHECK(cfg.scheme == TimeScheme::BackwardEuler);
  CHECK(cfg.seed == 42);
  CHECK(make_spec(cfg).left_bc == BoundaryCondition::DirichletZero);
}

TEST_CASE("field-level config errors") {
  CHECK(mentions(errors_of({{"experiment", "classify"}}), "coefficient"));
  auto j = base();
  j["experiment"] = "nope";
  j["mesh"] = {{"N", 4}};
  j["omega"] = {0.7, 0.3};
  j["weights"] = {{"lambda", json::array()}};
  const auto errs = errors_of(j);
  CHECK(mentions(errs, "experiment"));
  CHECK(mentions(errs, "mesh.N"));
  CHECK(mentions(errs, "omega"));
  CHECK(mentions(errs, "weights.lambda"));

  auto bad_coef = base();
  bad_coef["coefficient"]["params"]["gamma"] = 3.0;
  CHECK_FALSE(errors_of(bad_coef).empty());

  auto sdc_dirichlet = base();
  sdc_dirichlet["coefficient"]["params"]["gamma"] = 1.5;
  sdc_dirichlet["boundary"] = "dirichlet";
  CHECK_FALSE(errors_of(sdc_dirichlet).empty());
  sdc_dirichlet["allow_regime_override"] = true;
  CHECK(errors_of(sdc_dirichlet).empty());
}

TEST_CASE("config hash ignores key order") {
  const json a = json::parse(R"({"experiment":"classify","seed":3})");
  const json b = json::parse(R"({"seed":3,"experiment":"classify"})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(json::parse(R"({"experiment":"classify","seed":4})")));
}

TEST_CASE("classify run writes its artifacts") {
  const auto dir = std::filesystem::path("exp_classify_out");
  const auto out = run_experiment(parse_config(base()), {.out_dir = dir.string()});
  CHECK(out.passed());
  CHECK(out.summary["results"]["regime"] == "WDC");
  CHECK(out.summary["results"]["K_est"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::filesystem::exists(dir / "classify.csv"));
  CHECK(std::filesystem::exists(dir / "run.log"));
  const auto summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["seed"] == 42);
  CHECK(summary.contains("anchor"));
  CHECK(summary["config_hash"] == config_hash(base()));
}

TEST_CASE("runs are bit identical across worker counts") {
  auto j = base();
  j["experiment"] = "energy";
  j["mesh"] = {{"N", 32}};
  j["time"] = {{"steps", 32}};
  j["samples"] = 6;
  const auto cfg = parse_config(j);
  run_experiment(cfg, {.jobs = 1, .out_dir = "exp_energy_1"});
  run_experiment(cfg, {.jobs = 3, .out_dir = "exp_energy_3"});
  CHECK(slurp("exp_energy_1/energy.csv") == slurp("exp_energy_3/energy.csv"));
  run_experiment(cfg, {.jobs = 1, .out_dir = "exp_energy_s", .seed = 5});
  CHECK(slurp("exp_energy_1/energy.csv") != slurp("exp_energy_s/energy.csv"));
}
