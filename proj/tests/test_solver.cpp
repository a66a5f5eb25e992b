#include <doctest.h>

#include <cmath>
#include <numbers>

#include "carleman/functionals.hpp"
#include "carleman/pde_solver.hpp"
#include "carleman/sampling.hpp"

using namespace carleman;

namespace {

ProblemSpec spec_for(double gamma, std::size_t N = 64, std::size_t M = 64) {
  ProblemSpec s;
  s.coef = make_power_coefficient(gamma);
  s.left_bc = default_boundary(classify(s.coef).regime);
  s.mesh = build_mesh(N, 2.0);
  s.time_steps = M;
  return s;
}

}  // namespace

TEST_CASE("graded mesh nodes") {
  const auto m = build_mesh(4, 2.0);
  REQUIRE(m.size() == 5);
  const double expect[] = {0.0, 1.0 / 16, 0.25, 9.0 / 16, 1.0};
  for (int i = 0; i < 5; ++i) CHECK(m.node(i) == doctest::Approx(expect[i]).epsilon(1e-15));
  CHECK(m.face(0) == doctest::Approx(1.0 / 32));
  double total = 0;
  for (double w : m.node_weights()) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("flux stencil is exact on quadratics") {
  // -(x (x^2)')' = -4x
  const auto mesh = build_mesh(16, 1.0);
  const auto op = assemble_diffusion(make_power_coefficient(1.0), mesh, BoundaryCondition::ZeroFlux);
  std::vector<double> u(mesh.size()), out(mesh.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = mesh.node(i) * mesh.node(i);
  op.apply(u, out);
  for (std::size_t i = 1; i + 2 < mesh.size(); ++i) CHECK(out[i] == doctest::Approx(-4.0 * mesh.node(i)).epsilon(1e-12));
}

TEST_CASE("stiffness is symmetric positive semidefinite") {
  for (auto bc : {BoundaryCondition::DirichletZero, BoundaryCondition::ZeroFlux}) {
    const auto mesh = build_mesh(32, 2.0);
    const auto op = assemble_diffusion(make_power_coefficient(0.7), mesh, bc);
    const CounterRng rng(5);
    const auto u = sample_sine_nodes(mesh, rng, 0, kStreamTerminal);
    const auto w = sample_sine_nodes(mesh, rng, 1, kStreamTerminal);
    std::vector<double> ku(u.size()), kw(u.size());
    op.apply_stiffness(u, ku);
    op.apply_stiffness(w, kw);
    double uKw = 0, wKu = 0, uKu = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      uKw += u[i] * kw[i];
      wKu += w[i] * ku[i];
      uKu += u[i] * ku[i];
    }
    CHECK(uKw == doctest::Approx(wKu).epsilon(1e-13));
    CHECK(uKu >= 0.0);
  }
}

TEST_CASE("discrete duality between forward and adjoint") {
  for (double g : {0.5, 1.5})
    for (auto scheme : {TimeScheme::CrankNicolson, TimeScheme::BackwardEuler}) {
      auto spec = spec_for(g);
      spec.scheme = scheme;
      const CounterRng rng(17);
      for (std::size_t k = 0; k < 5; ++k) {
        const auto u0 = sample_sine_nodes(spec.mesh, rng, k, kStreamInitial);
        const auto vT = sample_sine_nodes(spec.mesh, rng, k, kStreamTerminal);
        const auto h = restrict_to_omega(sample_source(spec, rng, k), spec.mesh, spec.omega);
        CHECK(duality_check(spec, u0, h, vT).relative_gap() < 1e-12);
      }
    }
}

TEST_CASE("adjoint without source is the forward flow reversed in time") {
  const auto spec = spec_for(0.5);
  const CounterRng rng(2);
  const auto vT = sample_sine_nodes(spec.mesh, rng, 0, kStreamTerminal);
  const auto u = solve_forward(spec, vT);
  const auto v = solve_adjoint(spec, vT);
  const std::size_t M = spec.time_steps;
  for (std::size_t m = 0; m <= M; ++m)
    for (std::size_t i = 0; i < spec.mesh.size(); ++i)
      CHECK(v.values(m, i) == doctest::Approx(u.values(M - m, i)).epsilon(1e-12).scale(1.0));
}

TEST_CASE("backward Euler keeps nonnegative data nonnegative") {
  auto spec = spec_for(1.5);
  spec.scheme = TimeScheme::BackwardEuler;
  const auto u0 = sample_nodes(spec.mesh, [](double x) { return x < 0.5 ? 1.0 : 0.0; });
  const auto u = solve_forward(spec, u0);
  for (double v : u.values.data()) CHECK(v >= -1e-15);
}

TEST_CASE("heat decays without control") {
  const auto spec = spec_for(0.5);
  const auto u0 = sample_nodes(spec.mesh, [](double x) { return std::sin(std::numbers::pi * x); });
  const auto u = solve_forward(spec, u0);
  double prev = inner(spec.mesh, u.values.row(0), u.values.row(0));
  for (std::size_t m = 1; m <= spec.time_steps; ++m) {
    const double e = inner(spec.mesh, u.values.row(m), u.values.row(m));
    CHECK(e <= prev * (1 + 1e-14));
    prev = e;
  }
}

TEST_CASE("spec validation names the field") {
  auto spec = spec_for(1.5);
  spec.left_bc = BoundaryCondition::DirichletZero;
  CHECK_THROWS_WITH_AS(spec.validate(), doctest::Contains("allow_regime_override"), std::invalid_argument);
  spec.allow_regime_override = true;
  CHECK_NOTHROW(spec.validate());
  auto small = spec_for(0.5, 8);
  CHECK_THROWS_AS(small.validate(), std::invalid_argument);
}

TEST_CASE("binary trajectory round trip") {
  const auto spec = spec_for(0.5, 16, 8);
  const auto u = solve_forward(spec, sample_nodes(spec.mesh, [](double x) { return x * (1 - x); }));
  const std::string path = "traj_roundtrip.bin";
  write_trajectory_binary(u, path);
  const auto g = read_trajectory_binary(path);
  CHECK(g.N == 16);
  CHECK(g.M == 8);
  CHECK(g.T == 1.0);
  CHECK(g.values == u.values.data());
}
