// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "carleman/experiment.hpp"
#include "carleman/sampling.hpp"
#include "carleman/weights.hpp"

using namespace carleman;
using nlohmann::json;

namespace {

json power(double g) { return {{"kind", "power"}, {"params", {{"gamma", g}}}}; }

struct Verdict {
  bool ok = true;
  std::string detail;
};

ExperimentOutcome run(json cfg, const std::string &tag) {
  cfg["output_dir"] = "acceptance_out/" + tag;
  return run_experiment(parse_config(cfg), {.jobs = 2});
}

// Collects the checks of several runs; `only` keeps checks with that name.
Verdict gather(const std::vector<std::pair<std::string, ExperimentOutcome>> &runs, const std::string &only = "") {
  Verdict v;
  std::size_t n = 0;
  std::ostringstream failed;
  for (const auto &[tag, out] : runs)
    for (const auto &c : out.checks) {
      if (!only.empty() && c.name != only) continue;
      ++n;
      if (!c.passed) {
        v.ok = false;
        failed << " " << tag << "/" << c.name << " (" << c.detail << ")";
      }
    }
  v.detail = std::to_string(n) + " checks" + (v.ok ? "" : ", failed:" + failed.str());
  if (n == 0) v = {false, "no checks ran"};
  return v;
}

int failures = 0;

void report(int id, const std::string &title, const Verdict &v) {
  failures += !v.ok;
  std::cout << (v.ok ? "PASS" : "FAIL") << " criterion " << id << " " << title << ": " << v.detail << std::endl;
}

Verdict weight_sanity() {
  Verdict v;
  const CounterRng rng(2024);
  const auto psi = std::make_shared<const PsiFunction>(build_psi(make_power_coefficient(0.5), 0.4, 0.6));
  const CarlemanWeights w(psi, 2.0, 1.0);
  std::size_t positive = 0, nonzero_ends = 0;
  for (std::size_t k = 0; k < 10000; ++k) {
    const double t = rng.uniform(k, kStreamPoints, 0), x = rng.uniform(k, kStreamPoints, 1);
    positive += !(w.phi(t, x) < 0.0);
    for (double te : {0.0, 1.0}) nonzero_ends += eval_weight(w, te, x, 10.0, 3.0) != 0.0;
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < 100; ++k) {
    double g = 0.1 + 1.8 * rng.uniform(k, kStreamPoints, 2);
    if (std::abs(g - 1.0) < 1e-3) g = 1.0 + 1e-3;
    const double ap = 0.2 + 0.3 * rng.uniform(k, kStreamPoints, 3);
    const double bp = ap + 0.05 + 0.3 * rng.uniform(k, kStreamPoints, 4);
    const auto p = build_psi(make_power_coefficient(g), ap, bp);
    const auto l = p.left_branch(ap), r = p.right_branch(bp);
    const auto bl = p.bridge(ap), br = p.bridge(bp);
    for (int d = 0; d < 3; ++d) {
      worst = std::max(worst, std::abs(l[d] - bl[d]) / (1 + std::abs(l[2])));
      worst = std::max(worst, std::abs(r[d] - br[d]) / (1 + std::abs(r[2])));
    }
  }
  v.ok = positive == 0 && nonzero_ends == 0 && worst < 1e-6;
  std::ostringstream os;
  os << positive << " of 10000 points with phi >= 0, " << nonzero_ends << " nonzero end weights, C2 mismatch "
     << worst;
  v.detail = os.str();
  return v;
}

}  // namespace

int main() {
  try {
    // 1, 2: manufactured identity and boundary sign, two coefficients per regime
    std::vector<std::pair<std::string, ExperimentOutcome>> lemma;
    for (double g : {0.3, 0.5, 1.2, 1.5}) {
      char tag[32];
      std::snprintf(tag, sizeof tag, "lemma_x%.1f", g);
      lemma.emplace_back(tag, run({{"experiment", "lemma_checks"},
                                   {"coefficient", power(g)},
                                   {"mesh", {{"N", 256}}},
                                   {"time", {{"steps", 256}}},
                                   {"weights", {{"lambda", {1.0}}, {"s", {1.0}}}},
                                   {"samples", 50}},
                                  tag));
    }
    Verdict ident = gather(lemma, "identity_residual_small");
    const Verdict shrink = gather(lemma, "identity_residual_decreases");
    ident.ok = ident.ok && shrink.ok;
    ident.detail += "; refinement: " + shrink.detail;
    report(1, "product identity residual", ident);
    report(2, "boundary term sign", gather({lemma[1], lemma[3]}, "boundary_term_sign"));

    // 3: Carleman sweep, both regimes, N = 128 then 256
    std::vector<std::pair<std::string, ExperimentOutcome>> sweep;
    for (double g : {0.5, 1.5}) {
      const std::string tag = g < 1 ? "sweep_sqrt" : "sweep_x15";
      sweep.emplace_back(tag, run({{"experiment", "carleman_sweep"},
                                   {"coefficient", power(g)},
                                   {"mesh", {{"N", 128}}},
                                   {"time", {{"T", 1.0}, {"steps", 128}}},
                                   {"weights", {{"lambda", {2.0, 4.0}}, {"doublings", 4}}},
                                   {"samples", 20}},
                                  tag));
    }
    Verdict sv = gather(sweep);
    for (const auto &[tag, out] : sweep) {
      const auto &r = out.summary["results"];
      std::ostringstream os;
      os << "; " << tag << " C " << r["empirical_C"] << " -> " << r["empirical_C_refined"] << ", growth factors";
      for (const auto &f : r["growth_factors"]) os << " " << f["factor"].get<double>();
      sv.detail += os.str();
    }
    report(3, "Carleman sweep", sv);

    // 4: Hardy, both cases plus the auxiliary functions
    report(4, "Hardy-Poincare",
           gather({{"hardy_sqrt", run({{"experiment", "hardy"}, {"coefficient", power(0.5)}, {"mesh", {{"N", 256}}},
                                       {"samples", 100}}, "hardy_sqrt")},
                   {"hardy_x15", run({{"experiment", "hardy"}, {"coefficient", power(1.5)}, {"mesh", {{"N", 256}}},
                                      {"samples", 100}}, "hardy_x15")},
                   {"hardy_x", run({{"experiment", "hardy"}, {"coefficient", power(1.0)}, {"mesh", {{"N", 256}}},
                                    {"samples", 100}}, "hardy_x")}}));

    // 5: energy estimate
    std::vector<std::pair<std::string, ExperimentOutcome>> energy;
    for (double g : {0.5, 1.5}) {
      const std::string tag = g < 1 ? "energy_sqrt" : "energy_x15";
      energy.emplace_back(tag, run({{"experiment", "energy"}, {"coefficient", power(g)}, {"mesh", {{"N", 128}}},
                                    {"time", {{"steps", 128}}}, {"samples", 20}},
                                   tag));
    }
    Verdict ev = gather(energy, "ratios_finite");
    for (const auto &[tag, out] : energy) ev.detail += "; " + tag + " max " + out.summary["results"]["max_ratio"].dump();
    report(5, "energy estimate", ev);

    // 6: solver convergence for a = x with Dirichlet data
    report(6, "solver convergence",
           gather({{"convergence_x", run({{"experiment", "convergence"},
                                          {"coefficient", power(1.0)},
                                          {"boundary", "dirichlet"},
                                          {"allow_regime_override", true}},
                                         "convergence_x")}}));

    // 7-9: duality gate, observability, null control
    const auto obs = run({{"experiment", "observability"}, {"coefficient", power(0.5)}, {"samples", 20}}, "observability");
    const auto hum = run({{"experiment", "null_control"},
                          {"coefficient", power(0.5)},
                          {"control", {{"epsilon", {1e-4, 1e-6, 1e-8}}, {"initial", "sin_pi"}}}},
                         "null_control");
    report(7, "discrete duality", gather({{"observability", obs}, {"null_control", hum}}, "duality_gate"));
    report(8, "observability", gather({{"observability", obs}}));
    report(9, "null control", gather({{"null_control", hum}}));

    report(10, "weight sanity", weight_sanity());
  } catch (const std::exception &e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
