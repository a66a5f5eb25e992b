#include "carleman/hum.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carleman {

nlohmann::json to_json(const ControlResult &r) {
  return {{"epsilon", r.epsilon},
          {"terminal_norm", r.terminal_norm},
          {"control_cost", r.control_cost},
          {"cg_iterations", r.cg_iterations},
          {"converged", r.converged},
          {"relative_residual", r.relative_residual},
          {"diagnostics", r.diagnostics}};
}

DualFunctional::DualFunctional(ProblemSpec spec, std::vector<double> u0, double epsilon)
    : spec_(std::move(spec)), u0_(std::move(u0)), eps_(epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon: must be > 0");
  mask_ = omega_mask(spec_.mesh, spec_.omega);
  const auto free = solve_forward(spec_, u0_);
  const auto last = free.values.row(spec_.time_steps);
  free_T_.assign(last.begin(), last.end());
}

SpaceTimeField DualFunctional::control(std::span<const double> vT) const {
  auto adj = solve_adjoint_full(spec_, vT);
  return restrict_to_omega(adj.pairing, spec_.mesh, spec_.omega);
}

std::vector<double> DualFunctional::gramian(std::span<const double> vT) const {
  const std::vector<double> zero(spec_.mesh.size(), 0.0);
  const auto u = solve_forward(spec_, zero, control(vT));
  const auto last = u.values.row(spec_.time_steps);
  return {last.begin(), last.end()};
}

std::vector<double> DualFunctional::apply(std::span<const double> vT) const {
  auto out = gramian(vT);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps_ * vT[i];
  return out;
}

std::vector<double> DualFunctional::gradient(std::span<const double> vT) const {
  auto g = apply(vT);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += free_T_[i];
  return g;
}

double DualFunctional::value(std::span<const double> vT) const {
  auto adj = solve_adjoint_full(spec_, vT);
  const auto &G = adj.pairing;
  const double obs = spacetime_inner(spec_.mesh, spec_.T, G, G, mask_);
  const auto v0 = adj.v.values.row(0);
  return 0.5 * obs + 0.5 * eps_ * inner(spec_.mesh, vT, vT) + inner(spec_.mesh, u0_, v0);
}

double verify_control(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h) {
  const auto u = solve_forward(spec, u0, h);
  const auto last = u.values.row(spec.time_steps);
  return std::sqrt(inner(spec.mesh, last, last));
}

ControlResult synthesize_null_control(const ProblemSpec &spec, std::span<const double> u0, double epsilon,
                                      double cg_tol, std::size_t cg_max_iter) {
  const DualFunctional J(spec, {u0.begin(), u0.end()}, epsilon);
  const auto &mesh = spec.mesh;
  const std::size_t n = mesh.size();
  auto dot = [&](const std::vector<double> &a, const std::vector<double> &b) { return inner(mesh, a, b); };

  ControlResult res;
  res.epsilon = epsilon;
  std::vector<double> x(n, 0.0), r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = -J.free_terminal()[i];
  const double bnorm = std::sqrt(dot(r, r));

  if (bnorm > 0.0) {
    // Rayleigh estimate of the Gramian's scale from a few power steps
    std::vector<double> p = r;
    double lam = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double pn = std::sqrt(dot(p, p));
      for (double &v : p) v /= pn;
      auto q = J.apply(p);
      lam = dot(p, q) - epsilon;
      p = std::move(q);
    }
    if (epsilon < 1e-15 * lam) throw std::domain_error("penalty underflow");

    p = r;
    double rr = dot(r, r);
    res.relative_residual = 1.0;
    while (res.cg_iterations < cg_max_iter) {
      if (std::sqrt(rr) <= cg_tol * bnorm) break;
      const auto ap = J.apply(p);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) {
        res.diagnostics = "CG breakdown: nonpositive curvature";
        break;
      }
      const double alpha = rr / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_new = dot(r, r);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
      rr = rr_new;
      ++res.cg_iterations;
    }
    res.relative_residual = std::sqrt(rr) / bnorm;
    res.converged = res.relative_residual <= cg_tol;
    if (!res.converged && res.diagnostics.empty()) {
      std::ostringstream os;
      os << "CG stopped after " << res.cg_iterations << " iterations at relative residual " << res.relative_residual;
      res.diagnostics = os.str();
    }
  } else {
    res.converged = true;
  }

  res.vT = x;
  res.h = J.control(x);
  const auto mask = omega_mask(mesh, spec.omega);
  res.control_cost = spacetime_inner(mesh, spec.T, res.h, res.h, mask);
  res.terminal_norm = verify_control(spec, u0, res.h);
  return res;
}

}  // namespace carleman
