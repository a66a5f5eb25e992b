#ifndef CARLEMAN_HUM_HPP
#define CARLEMAN_HUM_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carleman/pde_solver.hpp"

namespace carleman {

struct ControlResult {
  SpaceTimeField h;             // zero outside omega
  std::vector<double> vT;       // minimizer of the dual functional
  double terminal_norm = 0.0;   // |u(T)|_{L2}
  double control_cost = 0.0;    // |h|^2_{L2(Q_omega)}
  double epsilon = 0.0;
  std::size_t cg_iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
  std::string diagnostics;
};

nlohmann::json to_json(const ControlResult &r);

/// Penalized dual problem
///   J(v_T) = 1/2 |chi_omega G(v_T)|^2_Q + eps/2 |v_T|^2 + <u0, v(0)>
/// where v solves the discrete adjoint with F = 0 and G is its control pairing
/// field, so that the forward control-to-state map and G are exact transposes.
class DualFunctional {
public:
  DualFunctional(ProblemSpec spec, std::vector<double> u0, double epsilon);

  double value(std::span<const double> vT) const;
  /// Gradient in the mesh inner product: Lambda v_T + eps v_T + u_free(T).
  std::vector<double> gradient(std::span<const double> vT) const;
  /// Lambda v_T + eps v_T.
  std::vector<double> apply(std::span<const double> vT) const;
  /// Control chi_omega G(v_T).
  SpaceTimeField control(std::span<const double> vT) const;

  const std::vector<double> &free_terminal() const { return free_T_; }
  const ProblemSpec &spec() const { return spec_; }
  double epsilon() const { return eps_; }

private:
  std::vector<double> gramian(std::span<const double> vT) const;  // Lambda v_T

  ProblemSpec spec_;
  std::vector<double> u0_;
  double eps_;
  std::vector<bool> mask_;
  std::vector<double> free_T_;
};

/// Minimizes J by conjugate gradients in the mesh inner product, then verifies
/// the control with a forward solve. Throws std::domain_error("penalty underflow")
/// when epsilon is below round-off relative to the Gramian.
ControlResult synthesize_null_control(const ProblemSpec &spec, std::span<const double> u0, double epsilon,
                                      double cg_tol = 1e-8, std::size_t cg_max_iter = 500);

/// |u(T)|_{L2} of the forward solution driven by h.
double verify_control(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h);

}  // namespace carleman

#endif
