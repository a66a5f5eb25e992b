#include <doctest.h>

#include <cmath>
#include <numbers>

#include "carleman/hum.hpp"
#include "carleman/sampling.hpp"

using namespace carleman;

namespace {

ProblemSpec sqrt_spec() {
  ProblemSpec s;
  s.coef = make_power_coefficient(0.5);
  s.mesh = build_mesh(48, 2.0);
  s.time_steps = 48;
  return s;
}

std::vector<double> sine(const Mesh &mesh) {
  return sample_nodes(mesh, [](double x) { return std::sin(std::numbers::pi * x); });
}

}  // namespace

TEST_CASE("dual gradient matches central differences") {
  const auto spec = sqrt_spec();
  const DualFunctional J(spec, sine(spec.mesh), 1e-4);
  const CounterRng rng(31);
  const auto v = sample_sine_nodes(spec.mesh, rng, 0, kStreamControl);
  const auto g = J.gradient(v);
  for (std::size_t d = 0; d < 5; ++d) {
    const auto dir = sample_sine_nodes(spec.mesh, rng, d, kStreamDirection);
    std::vector<double> vp(v), vm(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      vp[i] += 1e-3 * dir[i];
      vm[i] -= 1e-3 * dir[i];
    }
    const double fd = (J.value(vp) - J.value(vm)) / 2e-3;
    CHECK(fd == doctest::Approx(inner(spec.mesh, g, dir)).epsilon(1e-6));
  }
}

TEST_CASE("penalized control: smaller epsilon, smaller terminal state, larger cost") {
  const auto spec = sqrt_spec();
  const auto u0 = sine(spec.mesh);
  double prev_terminal = INFINITY, prev_cost = 0.0;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    const auto r = synthesize_null_control(spec, u0, eps);
    CHECK(r.converged);
    CHECK(r.terminal_norm < prev_terminal);
    CHECK(r.control_cost >= prev_cost);
    CHECK(verify_control(spec, u0, r.h) == doctest::Approx(r.terminal_norm).epsilon(1e-9));
    prev_terminal = r.terminal_norm;
    prev_cost = r.control_cost;
  }
}

TEST_CASE("control vanishes outside omega") {
  const auto spec = sqrt_spec();
  const auto r = synthesize_null_control(spec, sine(spec.mesh), 1e-4);
  const auto mask = omega_mask(spec.mesh, spec.omega);
  for (std::size_t m = 0; m < r.h.levels(); ++m)
    for (std::size_t i = 0; i < r.h.nodes(); ++i)
      if (!mask[i]) CHECK(r.h(m, i) == 0.0);
}

TEST_CASE("zero initial state needs no control") {
  const auto spec = sqrt_spec();
  const std::vector<double> zero(spec.mesh.size(), 0.0);
  const auto r = synthesize_null_control(spec, zero, 1e-4);
  CHECK(r.terminal_norm == 0.0);
  CHECK(r.control_cost == 0.0);
}

TEST_CASE("penalty below round-off is rejected") {
  const auto spec = sqrt_spec();
  CHECK_THROWS_WITH_AS(synthesize_null_control(spec, sine(spec.mesh), 1e-30), doctest::Contains("penalty underflow"),
                       std::domain_error);
}
