#include <doctest.h>

#include <cmath>
#include <memory>

#include "carleman/carleman.hpp"
#include "carleman/sampling.hpp"

using namespace carleman;

namespace {

ProblemSpec spec_for(double gamma, std::size_t N = 64) {
  ProblemSpec s;
  s.coef = make_power_coefficient(gamma);
  s.left_bc = default_boundary(classify(s.coef).regime);
  s.mesh = build_mesh(N, 2.0);
  s.time_steps = N;
  return s;
}

std::shared_ptr<const PsiFunction> psi_for(const ProblemSpec &spec) {
  const auto op = default_omega_prime(spec.omega);
  return std::make_shared<const PsiFunction>(build_psi(spec.coef, op.lo, op.hi));
}

}  // namespace

TEST_CASE("product identity residual is small and shrinks") {
  for (double g : {0.5, 1.5}) {
    const auto spec = spec_for(g);
    const CarlemanWeights w(psi_for(spec), 1.0, 1.0);
    for (const auto &f : manufactured_suite(spec.left_bc, 1.0)) {
      const double r1 = lemma32_identity_residual(f, w, {1.0, 1.0}, 64, 64);
      const double r2 = lemma32_identity_residual(f, w, {1.0, 1.0}, 128, 128);
      CHECK_MESSAGE(r1 < 1e-3, f.label);
      CHECK_MESSAGE(r2 < r1, f.label);
    }
  }
}

TEST_CASE("boundary term parts are nonnegative") {
  for (double g : {0.5, 1.5}) {
    const auto spec = spec_for(g);
    const CarlemanWeights w(psi_for(spec), 1.0, 1.0);
    const CounterRng rng(21);
    for (std::size_t k = 0; k < 10; ++k) {
      const auto v = solve_adjoint(spec, sample_sine_nodes(spec.mesh, rng, k, kStreamTerminal));
      const auto wt = transform_to_w(v, w, {1.0, 1.0}, spec.left_bc);
      const auto parts = lemma33_boundary_parts(wt, w, {1.0, 1.0});
      CHECK(parts[0] >= 0.0);
      CHECK(parts[1] >= 0.0);
      CHECK(lemma33_boundary_sign(wt, w, {1.0, 1.0}) == doctest::Approx(parts[0] + parts[1]));
    }
  }
}

TEST_CASE("transform round trip") {
  const auto spec = spec_for(0.5);
  const CarlemanWeights w(psi_for(spec), 2.0, 1.0);
  const CounterRng rng(1);
  const auto v = solve_adjoint(spec, sample_sine_nodes(spec.mesh, rng, 0, kStreamTerminal));
  const CarlemanParams p{0.5, 2.0};
  const auto back = transform_from_w(transform_to_w(v, w, p, spec.left_bc), w, p);
  for (std::size_t m = 1; m + 1 < back.levels(); ++m)
    for (std::size_t i = 0; i < back.nodes(); ++i)
      if (p.s * w.phi(v.times[m], spec.mesh.node(i)) > kUnderflowExponent) CHECK(back(m, i) == doctest::Approx(v.values(m, i)).epsilon(1e-12));
}

TEST_CASE("Carleman ratios are scale invariant") {
  const auto spec = spec_for(0.5);
  const CarlemanWeights w(psi_for(spec), 2.0, 1.0);
  const CounterRng rng(6);
  auto vT = sample_sine_nodes(spec.mesh, rng, 0, kStreamTerminal);
  auto F = sample_source(spec, rng, 0);
  const CarlemanParams p{default_s0(w.psi(), 1.0, 2.0), 2.0};
  const auto r1 = carleman_sides(spec, vT, F, w, p);
  for (double &x : vT) x *= 3.0;
  for (double &x : F.data()) x *= 3.0;
  const auto r2 = carleman_sides(spec, vT, F, w, p);
  CHECK(std::isfinite(r1.ratio));
  CHECK(r2.ratio == doctest::Approx(r1.ratio).epsilon(1e-10));
}

TEST_CASE("sweep results do not depend on the worker count") {
  const auto spec = spec_for(1.5, 32);
  const auto psi = psi_for(spec);
  SweepConfig cfg;
  cfg.n_samples = 4;
  cfg.points = default_sweep_points(*psi, 1.0, {2.0}, 1);
  cfg.seed = 99;
  cfg.jobs = 1;
  const auto a = carleman_sweep(spec, psi, cfg);
  cfg.jobs = 3;
  const auto b = carleman_sweep(spec, psi, cfg);
  REQUIRE(a.reports.size() == b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(a.reports[i].ratio == b.reports[i].ratio);
    CHECK(a.reports[i].lhs_grad == b.reports[i].lhs_grad);
  }
  CHECK(a.empirical_C == b.empirical_C);
}

TEST_CASE("observability ratio is homogeneous of degree zero") {
  const auto spec = spec_for(0.5);
  const CounterRng rng(12);
  auto vT = sample_sine_nodes(spec.mesh, rng, 0, kStreamTerminal);
  const double r1 = observability_sample_ratio(spec, vT);
  for (double &x : vT) x *= 1e3;
  const double r2 = observability_sample_ratio(spec, vT);
  CHECK(std::abs(r2 - r1) <= 1e-10 * r1);
  const auto rep = observability_ratio(spec, 5, 12);
  CHECK(std::isfinite(rep.constant));
  CHECK(rep.constant > 0.0);
}
