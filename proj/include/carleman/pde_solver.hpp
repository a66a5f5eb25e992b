#ifndef CARLEMAN_PDE_SOLVER_HPP
#define CARLEMAN_PDE_SOLVER_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "carleman/coefficients.hpp"
#include "carleman/mesh.hpp"
#include "carleman/weights.hpp"

namespace carleman {

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryCondition { DirichletZero, ZeroFlux };
enum class TimeScheme { BackwardEuler, CrankNicolson };
enum class Direction { Forward, Backward };

std::string to_string(BoundaryCondition bc);
std::string to_string(TimeScheme s);

/// Boundary condition at x = 0 conventionally paired with a degeneracy regime:
/// Dirichlet for weak degeneracy, zero flux for strong degeneracy.
BoundaryCondition default_boundary(Regime r);

using Potential = std::function<double(double t, double x)>;

/// Space-time array of nodal values, (M+1) time levels by (N+1) nodes, row-major.
class SpaceTimeField {
public:
  SpaceTimeField() = default;
  SpaceTimeField(std::size_t levels, std::size_t nodes, double fill = 0.0)
      : levels_(levels), nodes_(nodes), data_(levels * nodes, fill) {}

  std::size_t levels() const { return levels_; }
  std::size_t nodes() const { return nodes_; }
  bool empty() const { return data_.empty(); }
  double &operator()(std::size_t m, std::size_t i) { return data_[m * nodes_ + i]; }
  double operator()(std::size_t m, std::size_t i) const { return data_[m * nodes_ + i]; }
  std::span<double> row(std::size_t m) { return {data_.data() + m * nodes_, nodes_}; }
  std::span<const double> row(std::size_t m) const { return {data_.data() + m * nodes_, nodes_}; }
  std::vector<double> &data() { return data_; }
  const std::vector<double> &data() const { return data_; }

private:
  std::size_t levels_ = 0;
  std::size_t nodes_ = 0;
  std::vector<double> data_;
};

struct ProblemSpec {
  double T = 1.0;
  DegeneracyCoefficient coef = make_power_coefficient(0.5);
  BoundaryCondition left_bc = BoundaryCondition::DirichletZero;
  Potential c;  // empty means c = 0
  Interval omega{0.3, 0.7};
  Mesh mesh = build_mesh(64, 2.0);
  std::size_t time_steps = 64;
  TimeScheme scheme = TimeScheme::CrankNicolson;
  std::size_t rannacher_steps = 2;  // backward Euler steps at each end of a Crank-Nicolson run
  bool allow_regime_override = false;

  std::size_t N() const { return mesh.cells(); }
  double dt() const { return T / double(time_steps); }
  double potential(double t, double x) const { return c ? c(t, x) : 0.0; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Trajectory {
  SpaceTimeField values;
  Mesh mesh;
  std::vector<double> times;
  Direction direction = Direction::Forward;

  double T() const { return times.back(); }
  std::size_t steps() const { return times.size() - 1; }
};

/// Flux-form discretization of -(a u_x)_x. Node i row reads
/// -[a_{i+1/2}(u_{i+1}-u_i)/h_{i+1/2} - a_{i-1/2}(u_i-u_{i-1})/h_{i-1/2}] / h_i
/// with a evaluated at faces and h_i the trapezoid node weight. The stiffness
/// K = H A is symmetric positive semidefinite; only nodes first..N-1 are unknowns.
struct DiffusionOperator {
  std::size_t first = 1;
  std::size_t last = 0;
  std::vector<double> mass;    // h_i, all nodes
  std::vector<double> face_a;  // a(x_{i+1/2})
  std::vector<double> diag;    // K_ii (zero outside the unknown range)
  std::vector<double> off;     // K_{i,i+1} (zero unless both i, i+1 are unknowns)

  bool is_unknown(std::size_t i) const { return i >= first && i <= last; }
  /// out = K u on unknowns, 0 on eliminated nodes.
  void apply_stiffness(std::span<const double> u, std::span<double> out) const;
  /// out = A u = H^{-1} K u on unknowns, 0 on eliminated nodes.
  void apply(std::span<const double> u, std::span<double> out) const;
  /// Discrete sum of a u_x^2 over faces (equals u^T K u).
  double energy(std::span<const double> u) const;
};

DiffusionOperator assemble_diffusion(const DegeneracyCoefficient &coef, const Mesh &mesh, BoundaryCondition bc);

/// Solves a symmetric tridiagonal system in place (Thomas algorithm); throws SolverError
/// on a nonpositive pivot.
void solve_spd_tridiagonal(std::vector<double> diag, std::vector<double> off, std::span<double> rhs);

/// Theta-scheme weight used on step m (from t_m to t_{m+1}).
double step_theta(const ProblemSpec &spec, std::size_t m);

/// Forward problem u_t - (a u_x)_x + c u = h. `h` is a nodal space-time field (empty
/// means zero); the caller restricts it to omega where that matters.
Trajectory solve_forward(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h = {});

struct AdjointSolution {
  Trajectory v;
  /// Field G with sum_m tau_m <g^m, G^m>_h equal to the discrete control pairing of the
  /// forward scheme (tau_m are trapezoid time weights).
  SpaceTimeField pairing;
};

/// Backward problem v_t + (a v_x)_x - c v = F, v(T) = v_T, built as the exact transpose
/// of the forward step map in the mesh inner product.
Trajectory solve_adjoint(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F = {});
AdjointSolution solve_adjoint_full(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F = {});

struct DualityCheck {
  double lhs = 0.0;    // <u(T), v_T> - <u0, v(0)>
  double rhs = 0.0;    // control pairing sum_m tau_m <h^m, G^m>
  double scale = 0.0;  // |u(T)| |v_T| + |u0| |v(0)| + |h| |G|
  double relative_gap() const { return scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0; }
};

/// Forward solve from (u0, h) and adjoint solve from v_T with F = 0, paired.
DualityCheck duality_check(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h,
                           std::span<const double> vT);

/// Mesh-weighted inner product sum_i h_i u_i w_i.
double inner(const Mesh &mesh, std::span<const double> u, std::span<const double> w);
/// Space-time trapezoid inner product; `mask` selects nodes (empty: all nodes).
double spacetime_inner(const Mesh &mesh, double T, const SpaceTimeField &f, const SpaceTimeField &g,
                       const std::vector<bool> &mask = {});

/// Nodes strictly inside omega.
std::vector<bool> omega_mask(const Mesh &mesh, const Interval &omega);
/// Copy of h with nodes outside omega zeroed.
SpaceTimeField restrict_to_omega(const SpaceTimeField &h, const Mesh &mesh, const Interval &omega);

/// Samples f(t, x) on the spec's nodes and time levels.
SpaceTimeField sample_field(const ProblemSpec &spec, const std::function<double(double, double)> &f);
std::vector<double> sample_nodes(const Mesh &mesh, const std::function<double(double)> &f);

struct EnergyReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool inconsistent = false;
};

/// sup_t |u|_{H1a}^2 + int (|u_t|^2 + |(a u_x)_x|^2) against |u0|_{H1a}^2 + |h|^2_{L2(Q_omega)}.
EnergyReport energy_report(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h = {});

/// CSV rows "t,x,value".
void write_trajectory_csv(const Trajectory &traj, const std::string &path);
/// Little-endian binary: uint64 N, uint64 M, double T, then (M+1)(N+1) doubles row-major.
void write_trajectory_binary(const Trajectory &traj, const std::string &path);
struct BinaryGrid {
  std::size_t N = 0;
  std::size_t M = 0;
  double T = 0.0;
  std::vector<double> values;
};
BinaryGrid read_trajectory_binary(const std::string &path);
void write_field_binary(const SpaceTimeField &f, double T, const std::string &path);

}  // namespace carleman

#endif
