#include "carleman/pde_solver.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace carleman {

std::string to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::DirichletZero ? "dirichlet" : "zero_flux";
}

std::string to_string(TimeScheme s) {
  return s == TimeScheme::BackwardEuler ? "backward_euler" : "crank_nicolson";
}

BoundaryCondition default_boundary(Regime r) {
  return r == Regime::SDC ? BoundaryCondition::ZeroFlux : BoundaryCondition::DirichletZero;
}

void ProblemSpec::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T: must be a positive number");
  if (time_steps < 1) throw std::invalid_argument("time_steps: must be >= 1");
  if (!(omega.lo > 0.0 && omega.lo < omega.hi && omega.hi < 1.0))
    throw std::invalid_argument("omega: need 0 < alpha < beta < 1");
  if (mesh.cells() < 16) throw std::invalid_argument("mesh.N: must be >= 16");
  const auto rep = classify(coef);
  if (rep.regime == Regime::Violation)
    throw std::invalid_argument("coefficient: fails the degeneracy hypothesis (" + coef.label() + ")");
  if (!allow_regime_override && left_bc != default_boundary(rep.regime))
    throw std::invalid_argument("regime: " + to_string(left_bc) + " boundary is not the convention for " +
                                to_string(rep.regime) + " (set allow_regime_override to force it)");
  if (c) {
    for (std::size_t m = 0; m <= time_steps; m += std::max<std::size_t>(1, time_steps / 16))
      for (double x : mesh.nodes())
        if (!std::isfinite(c(T * double(m) / double(time_steps), x)))
          throw std::invalid_argument("c: potential must be finite on the grid");
  }
}

DiffusionOperator assemble_diffusion(const DegeneracyCoefficient &coef, const Mesh &mesh, BoundaryCondition bc) {
  const std::size_t n = mesh.size();
  DiffusionOperator op;
  op.first = bc == BoundaryCondition::DirichletZero ? 1 : 0;
  op.last = n - 2;
  op.mass = mesh.node_weights();
  op.face_a.resize(n - 1);
  for (std::size_t f = 0; f + 1 < n; ++f) {
    const double a = coef(mesh.face(f));
    if (!(a > 0.0) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "assemble_diffusion: a(" << mesh.face(f) << ") = " << a << " is not positive";
      throw std::invalid_argument(os.str());
    }
    op.face_a[f] = a;
  }
  op.diag.assign(n, 0.0);
  op.off.assign(n - 1, 0.0);
  for (std::size_t f = 0; f + 1 < n; ++f) {
    const double k = op.face_a[f] / mesh.cell_length(f);
    if (op.is_unknown(f)) op.diag[f] += k;
    if (op.is_unknown(f + 1)) op.diag[f + 1] += k;
    if (op.is_unknown(f) && op.is_unknown(f + 1)) op.off[f] = -k;
  }
  return op;
}

void DiffusionOperator::apply_stiffness(std::span<const double> u, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = first; i <= last; ++i) {
    double v = diag[i] * u[i];
    if (i > first) v += off[i - 1] * u[i - 1];
    if (i < last) v += off[i] * u[i + 1];
    out[i] = v;
  }
}

void DiffusionOperator::apply(std::span<const double> u, std::span<double> out) const {
  apply_stiffness(u, out);
  for (std::size_t i = first; i <= last; ++i) out[i] /= mass[i];
}

double DiffusionOperator::energy(std::span<const double> u) const {
  // u^T K u over the unknowns: sum over faces of a (du)^2 / h with eliminated nodes at 0
  double s = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    s += diag[i] * u[i] * u[i];
    if (i < last) s += 2.0 * off[i] * u[i] * u[i + 1];
  }
  return s;
}

void solve_spd_tridiagonal(std::vector<double> diag, std::vector<double> off, std::span<double> rhs) {
  const std::size_t n = diag.size();
  if (rhs.size() != n || (n > 0 && off.size() + 1 != n))
    throw std::invalid_argument("solve_spd_tridiagonal: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double l = off[i - 1] / diag[i - 1];
      diag[i] -= l * off[i - 1];
      rhs[i] -= l * rhs[i - 1];
    }
    if (!(diag[i] > 0.0) || !std::isfinite(diag[i])) throw SolverError("non-SPD step matrix");
  }
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n) rhs[i] -= off[i] * rhs[i + 1];
    rhs[i] /= diag[i];
  }
}

double step_theta(const ProblemSpec &spec, std::size_t m) {
  if (spec.scheme == TimeScheme::BackwardEuler) return 1.0;
  const std::size_t r = spec.rannacher_steps;
  if (m < r || m + r >= spec.time_steps) return 1.0;
  return 0.5;
}

namespace {

// One theta-step system (H + dt theta K_m) restricted to the unknown nodes.
struct StepMatrix {
  std::vector<double> cmass;  // h_i c(t_{m+1/2}, x_i)
  std::vector<double> diag;
  std::vector<double> off;
};

StepMatrix step_matrix(const ProblemSpec &spec, const DiffusionOperator &op, std::size_t m, double theta) {
  const double dt = spec.dt();
  const double tm = (double(m) + 0.5) * dt;
  StepMatrix s;
  s.cmass.assign(op.mass.size(), 0.0);
  for (std::size_t i = op.first; i <= op.last; ++i) s.cmass[i] = op.mass[i] * spec.potential(tm, spec.mesh.node(i));
  const std::size_t n = op.last - op.first + 1;
  s.diag.resize(n);
  s.off.resize(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = op.first + k;
    s.diag[k] = op.mass[i] + dt * theta * (op.diag[i] + s.cmass[i]);
    if (k + 1 < n) s.off[k] = dt * theta * op.off[i];
  }
  return s;
}

void check_sizes(const ProblemSpec &spec, std::size_t vec, const SpaceTimeField &f, const char *what) {
  if (vec != spec.mesh.size()) throw std::invalid_argument(std::string(what) + ": nodal vector size mismatch");
  if (!f.empty() && (f.levels() != spec.time_steps + 1 || f.nodes() != spec.mesh.size()))
    throw std::invalid_argument(std::string(what) + ": space-time field shape mismatch");
}

}  // namespace

Trajectory solve_forward(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h) {
  check_sizes(spec, u0.size(), h, "solve_forward");
  const auto op = assemble_diffusion(spec.coef, spec.mesh, spec.left_bc);
  const std::size_t M = spec.time_steps, n = spec.mesh.size();
  const double dt = spec.dt();

  Trajectory traj{SpaceTimeField(M + 1, n), spec.mesh, time_grid(spec.T, M), Direction::Forward};
  auto first = traj.values.row(0);
  for (std::size_t i = op.first; i <= op.last; ++i) first[i] = u0[i];

  std::vector<double> ku(n), rhs(op.last - op.first + 1);
  for (std::size_t m = 0; m < M; ++m) {
    const double theta = step_theta(spec, m);
    const auto sys = step_matrix(spec, op, m, theta);
    auto prev = traj.values.row(m);
    op.apply_stiffness(prev, ku);
    for (std::size_t i = op.first; i <= op.last; ++i) {
      double r = op.mass[i] * prev[i] - dt * (1.0 - theta) * (ku[i] + sys.cmass[i] * prev[i]);
      if (!h.empty()) r += dt * op.mass[i] * (theta * h(m + 1, i) + (1.0 - theta) * h(m, i));
      rhs[i - op.first] = r;
    }
    solve_spd_tridiagonal(sys.diag, sys.off, rhs);
    auto next = traj.values.row(m + 1);
    for (std::size_t i = op.first; i <= op.last; ++i) next[i] = rhs[i - op.first];
  }
  return traj;
}

AdjointSolution solve_adjoint_full(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F) {
  check_sizes(spec, vT.size(), F, "solve_adjoint");
  const auto op = assemble_diffusion(spec.coef, spec.mesh, spec.left_bc);
  const std::size_t M = spec.time_steps, n = spec.mesh.size();
  const double dt = spec.dt();

  AdjointSolution out{Trajectory{SpaceTimeField(M + 1, n), spec.mesh, time_grid(spec.T, M), Direction::Backward},
                      SpaceTimeField(M + 1, n)};
  auto &v = out.v.values;
  auto last_row = v.row(M);
  for (std::size_t i = op.first; i <= op.last; ++i) last_row[i] = vT[i];

  std::vector<double> z(n, 0.0), kz(n), rhs(op.last - op.first + 1), fbar(n, 0.0);
  for (std::size_t m = M; m-- > 0;) {
    const double theta = step_theta(spec, m);
    const auto sys = step_matrix(spec, op, m, theta);
    auto next = v.row(m + 1);
    for (std::size_t i = op.first; i <= op.last; ++i) {
      fbar[i] = F.empty() ? 0.0 : theta * F(m, i) + (1.0 - theta) * F(m + 1, i);
      rhs[i - op.first] = op.mass[i] * (next[i] - theta * dt * fbar[i]);
    }
    solve_spd_tridiagonal(sys.diag, sys.off, rhs);
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t i = op.first; i <= op.last; ++i) z[i] = rhs[i - op.first];
    op.apply_stiffness(z, kz);
    auto cur = v.row(m);
    for (std::size_t i = op.first; i <= op.last; ++i) {
      const double hv = op.mass[i] * next[i] - dt * (kz[i] + sys.cmass[i] * z[i] + op.mass[i] * fbar[i]);
      cur[i] = hv / op.mass[i];
      out.pairing(m, i) += dt * (1.0 - theta) * z[i];
      out.pairing(m + 1, i) += dt * theta * z[i];
    }
  }
  const auto tau = time_weights(spec.T, M);
  for (std::size_t m = 0; m <= M; ++m)
    for (double &g : out.pairing.row(m)) g /= tau[m];
  return out;
}

Trajectory solve_adjoint(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F) {
  return solve_adjoint_full(spec, vT, F).v;
}

double inner(const Mesh &mesh, std::span<const double> u, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < mesh.size(); ++i) s += mesh.node_weight(i) * u[i] * w[i];
  return s;
}

double spacetime_inner(const Mesh &mesh, double T, const SpaceTimeField &f, const SpaceTimeField &g,
                       const std::vector<bool> &mask) {
  const auto tau = time_weights(T, f.levels() - 1);
  double s = 0.0;
  for (std::size_t m = 0; m < f.levels(); ++m) {
    double row = 0.0;
    for (std::size_t i = 0; i < f.nodes(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      row += mesh.node_weight(i) * f(m, i) * g(m, i);
    }
    s += tau[m] * row;
  }
  return s;
}

DualityCheck duality_check(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h,
                           std::span<const double> vT) {
  const auto &mesh = spec.mesh;
  const auto u = solve_forward(spec, u0, h);
  const auto adj = solve_adjoint_full(spec, vT);
  const auto uT = u.values.row(spec.time_steps);
  const auto v0 = adj.v.values.row(0);
  auto norm = [&](std::span<const double> f) { return std::sqrt(inner(mesh, f, f)); };
  DualityCheck d;
  d.lhs = inner(mesh, uT, vT) - inner(mesh, u0, v0);
  d.scale = norm(uT) * norm(vT) + norm(u0) * norm(v0);
  if (!h.empty()) {
    d.rhs = spacetime_inner(mesh, spec.T, h, adj.pairing);
    d.scale += std::sqrt(spacetime_inner(mesh, spec.T, h, h) * spacetime_inner(mesh, spec.T, adj.pairing, adj.pairing));
  }
  return d;
}

std::vector<bool> omega_mask(const Mesh &mesh, const Interval &omega) {
  std::vector<bool> mask(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) mask[i] = omega.contains_open(mesh.node(i));
  return mask;
}

SpaceTimeField restrict_to_omega(const SpaceTimeField &h, const Mesh &mesh, const Interval &omega) {
  SpaceTimeField out = h;
  const auto mask = omega_mask(mesh, omega);
  for (std::size_t m = 0; m < out.levels(); ++m)
    for (std::size_t i = 0; i < out.nodes(); ++i)
      if (!mask[i]) out(m, i) = 0.0;
  return out;
}

SpaceTimeField sample_field(const ProblemSpec &spec, const std::function<double(double, double)> &f) {
  const auto t = time_grid(spec.T, spec.time_steps);
  SpaceTimeField out(t.size(), spec.mesh.size());
  for (std::size_t m = 0; m < t.size(); ++m)
    for (std::size_t i = 0; i < spec.mesh.size(); ++i) out(m, i) = f(t[m], spec.mesh.node(i));
  return out;
}

std::vector<double> sample_nodes(const Mesh &mesh, const std::function<double(double)> &f) {
  std::vector<double> out(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) out[i] = f(mesh.node(i));
  return out;
}

EnergyReport energy_report(const ProblemSpec &spec, std::span<const double> u0, const SpaceTimeField &h) {
  const auto traj = solve_forward(spec, u0, h);
  const auto op = assemble_diffusion(spec.coef, spec.mesh, spec.left_bc);
  const std::size_t M = spec.time_steps, n = spec.mesh.size();
  const double dt = spec.dt();
  const auto &mesh = spec.mesh;

  auto h1a_sq = [&](std::span<const double> u) { return inner(mesh, u, u) + op.energy(u); };

  double sup = 0.0, ut = 0.0, flux = 0.0;
  std::vector<double> au(n), du(n);
  for (std::size_t m = 0; m <= M; ++m) {
    const auto u = traj.values.row(m);
    sup = std::max(sup, h1a_sq(u));
    if (m > 0) {
      const auto prev = traj.values.row(m - 1);
      for (std::size_t i = 0; i < n; ++i) du[i] = (u[i] - prev[i]) / dt;
      ut += dt * inner(mesh, du, du);
      op.apply(u, au);
      flux += dt * inner(mesh, au, au);
    }
  }
  EnergyReport rep;
  rep.lhs = sup + ut + flux;
  rep.rhs = h1a_sq(traj.values.row(0));
  if (!h.empty()) {
    const auto mask = omega_mask(mesh, spec.omega);
    rep.rhs += spacetime_inner(mesh, spec.T, h, h, mask);
  }
  constexpr double kTol = 1e-300;
  if (rep.rhs > kTol) {
    rep.ratio = rep.lhs / rep.rhs;
  } else if (rep.lhs > kTol) {
    rep.inconsistent = true;
    rep.ratio = std::numeric_limits<double>::infinity();
  }
  return rep;
}

void write_trajectory_csv(const Trajectory &traj, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "t,x,value\n" << std::setprecision(17);
  for (std::size_t m = 0; m < traj.values.levels(); ++m)
    for (std::size_t i = 0; i < traj.values.nodes(); ++i)
      os << traj.times[m] << ',' << traj.mesh.node(i) << ',' << traj.values(m, i) << '\n';
}

namespace {

template <class T>
void put_le(std::ostream &os, T value) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  os.write(reinterpret_cast<const char *>(bits.data()), bits.size());
}

template <class T>
T get_le(std::istream &is) {
  std::array<unsigned char, sizeof(T)> bits{};
  is.read(reinterpret_cast<char *>(bits.data()), bits.size());
  if (!is) throw std::runtime_error("binary grid: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_field_binary(const SpaceTimeField &f, double T, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  put_le<std::uint64_t>(os, f.nodes() - 1);
  put_le<std::uint64_t>(os, f.levels() - 1);
  put_le<double>(os, T);
  for (double v : f.data()) put_le<double>(os, v);
}

void write_trajectory_binary(const Trajectory &traj, const std::string &path) {
  write_field_binary(traj.values, traj.T(), path);
}

BinaryGrid read_trajectory_binary(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  BinaryGrid g;
  g.N = static_cast<std::size_t>(get_le<std::uint64_t>(is));
  g.M = static_cast<std::size_t>(get_le<std::uint64_t>(is));
  g.T = get_le<double>(is);
  g.values.resize((g.N + 1) * (g.M + 1));
  for (double &v : g.values) v = get_le<double>(is);
  return g;
}

}  // namespace carleman
