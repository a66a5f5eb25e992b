#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "carleman/carleman.hpp"
#include "carleman/functionals.hpp"
#include "carleman/sampling.hpp"

using namespace carleman;

TEST_CASE("seminorm of x(1-x) against a = x") {
  // int_0^1 x (1 - 2x)^2 dx = 1/6
  const auto mesh = build_mesh(512, 2.0);
  const WeightedNorms norms(mesh, make_power_coefficient(1.0));
  const auto u = sample_nodes(mesh, [](double x) { return x * (1 - x); });
  CHECK(norms.seminorm_sq(u) == doctest::Approx(1.0 / 6.0).epsilon(1e-5));
  CHECK(norms.l2_sq(u) == doctest::Approx(1.0 / 30.0).epsilon(1e-5));
}

TEST_CASE("Hardy quotient of w = x is one") {
  for (double g : {0.3, 0.5, 0.9}) {
    const auto mesh = build_mesh(128, 2.0);
    const auto r = hardy_ratio(make_power_coefficient(g), mesh, mesh.nodes(), HardyCase::CaseA);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_FALSE(r.violation);
  }
}

TEST_CASE("Hardy quotients stay bounded under refinement") {
  const auto a = make_power_coefficient(1.5);
  const CounterRng rng(8);
  for (std::size_t k = 0; k < 10; ++k) {
    const auto r1 = hardy_ratio(a, build_mesh(256), sample_quarter_wave(build_mesh(256), rng, k, QuarterWave::VanishAtOne),
                                HardyCase::CaseB);
    const auto r2 = hardy_ratio(a, build_mesh(512), sample_quarter_wave(build_mesh(512), rng, k, QuarterWave::VanishAtOne),
                                HardyCase::CaseB);
    CHECK(std::isfinite(r1.ratio));
    CHECK(r2.ratio == doctest::Approx(r1.ratio).epsilon(0.02));
  }
}

TEST_CASE("product moments agree with the trapezoid on a resolved weight") {
  ProblemSpec spec;
  spec.coef = make_power_coefficient(0.5);
  spec.mesh = build_mesh(128, 2.0);
  spec.time_steps = 256;
  const auto psi = std::make_shared<const PsiFunction>(build_psi(spec.coef, 0.4, 0.6));
  const CarlemanWeights w(psi, 1.0, 1.0);
  const CounterRng rng(4);
  const auto v = solve_adjoint(spec, sample_sine_nodes(spec.mesh, rng, 0, kStreamTerminal));
  for (auto integrand : {Integrand::VSq, Integrand::AVxSq})
    for (auto region : {Region::Q, Region::QOmega}) {
      IntegralOptions trap, prod;
      prod.quadrature = WeightQuadrature::Product;
      const double a = spacetime_weighted_integral(v, w, 0.05, 1.0, integrand, region, trap);
      const double b = spacetime_weighted_integral(v, w, 0.05, 1.0, integrand, region, prod);
      CHECK_MESSAGE(b == doctest::Approx(a).epsilon(2e-3), to_string(region));
    }
}

TEST_CASE("moments of a constant field sum to the weight integral") {
  const auto mesh = build_mesh(32, 2.0);
  const auto times = time_grid(1.0, 32);
  const auto psi = std::make_shared<const PsiFunction>(build_psi(make_power_coefficient(1.5), 0.4, 0.6));
  const CarlemanWeights w(psi, 2.0, 1.0);
  const double shift = carleman_log_shift(w, 1.0);
  const auto coarse = weight_moments(mesh, times, w, 1.0, 0.0, shift);
  MomentOptions tight;
  tight.rtol = 1e-11;
  const auto fine = weight_moments(mesh, times, w, 1.0, 0.0, shift, tight);
  CHECK(coarse.converged);
  SpaceTimeField ones(times.size(), mesh.size(), 1.0);
  const double a = moment_integral(coarse, mesh, ones, Integrand::VSq);
  const double b = moment_integral(fine, mesh, ones, Integrand::VSq);
  CHECK(a > 0.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-7));
}
