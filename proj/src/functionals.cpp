#include "carleman/functionals.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace carleman {

WeightedNorms::WeightedNorms(const Mesh &mesh, const DegeneracyCoefficient &coef) : mesh_(mesh) {
  face_a_.resize(mesh.cells());
  for (std::size_t f = 0; f < mesh.cells(); ++f) face_a_[f] = coef(mesh.face(f));
}

double WeightedNorms::l2_sq(std::span<const double> u) const { return inner(mesh_, u, u); }

double WeightedNorms::seminorm_sq(std::span<const double> u) const {
  double s = 0.0;
  for (std::size_t f = 0; f < mesh_.cells(); ++f) {
    const double h = mesh_.cell_length(f);
    const double du = u[f + 1] - u[f];
    s += face_a_[f] * du * du / h;
  }
  return s;
}

double WeightedNorms::flux_sq(std::span<const double> u) const {
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < mesh_.size(); ++i) {
    const double right = face_a_[i] * (u[i + 1] - u[i]) / mesh_.cell_length(i);
    const double left = face_a_[i - 1] * (u[i] - u[i - 1]) / mesh_.cell_length(i - 1);
    const double d = (right - left) / mesh_.node_weight(i);
    s += mesh_.node_weight(i) * d * d;
  }
  return s;
}

double WeightedNorms::norm_sq(NormKind kind, std::span<const double> u) const {
  switch (kind) {
    case NormKind::L2: return l2_sq(u);
    case NormKind::H1a: return l2_sq(u) + seminorm_sq(u);
    case NormKind::H2a: return l2_sq(u) + seminorm_sq(u) + flux_sq(u);
  }
  return 0.0;
}

double WeightedNorms::norm(NormKind kind, std::span<const double> u) const { return std::sqrt(norm_sq(kind, u)); }

double weighted_norm(const WeightedNorms &norms, NormKind kind, std::span<const double> u) {
  return norms.norm(kind, u);
}

std::string to_string(Region r) {
  switch (r) {
    case Region::Q: return "Q";
    case Region::QOmega: return "Q_omega";
    case Region::QOmegaPrime: return "Q_omega_prime";
    case Region::LeftOfAlphaPrime: return "left_of_alpha_prime";
    case Region::RightOfBetaPrime: return "right_of_beta_prime";
  }
  return "?";
}

bool in_region(Region r, double x, const Interval &omega, const Interval &omega_prime) {
  switch (r) {
    case Region::Q: return true;
    case Region::QOmega: return omega.contains_open(x);
    case Region::QOmegaPrime: return omega_prime.contains_open(x);
    case Region::LeftOfAlphaPrime: return x <= omega_prime.lo;
    case Region::RightOfBetaPrime: return x >= omega_prime.hi;
  }
  return false;
}

WeightTable weight_table(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s,
                         double k, double log_shift) {
  std::vector<double> psi_nodes(mesh.size()), psi_faces(mesh.cells());
  for (std::size_t i = 0; i < mesh.size(); ++i) psi_nodes[i] = w.psi().value(mesh.node(i));
  for (std::size_t f = 0; f < mesh.cells(); ++f) psi_faces[f] = w.psi().value(mesh.face(f));
  WeightTable table{SpaceTimeField(times.size(), mesh.size()), SpaceTimeField(times.size(), mesh.cells()), log_shift};
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double t = times[m];
    if (!(t > 0.0 && t < w.T())) continue;
    for (std::size_t i = 0; i < mesh.size(); ++i) table.nodes(m, i) = eval_weight_psi(w, t, psi_nodes[i], s, k, log_shift);
    for (std::size_t f = 0; f < mesh.cells(); ++f) table.faces(m, f) = eval_weight_psi(w, t, psi_faces[f], s, k, log_shift);
  }
  return table;
}

double weighted_integral(const WeightTable &table, const Mesh &mesh, double T, const SpaceTimeField &field,
                         Integrand integrand, const std::vector<double> &face_a, const std::vector<bool> &node_mask,
                         const std::vector<bool> &face_mask) {
  const std::size_t M = field.levels() - 1;
  const auto tau = time_weights(T, M);
  double total = 0.0;
  for (std::size_t m = 0; m <= M; ++m) {
    double row = 0.0;
    if (integrand == Integrand::AVxSq) {
      for (std::size_t f = 0; f < mesh.cells(); ++f) {
        if (!face_mask[f]) continue;
        const double wgt = table.faces(m, f);
        if (wgt == 0.0) continue;
        const double h = mesh.cell_length(f);
        const double d = field(m, f + 1) - field(m, f);
        row += wgt * face_a[f] * d * d / h;
      }
    } else {
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        if (!node_mask[i]) continue;
        const double wgt = table.nodes(m, i);
        if (wgt == 0.0) continue;
        row += wgt * mesh.node_weight(i) * field(m, i) * field(m, i);
      }
    }
    total += tau[m] * row;
  }
  return total;
}

double spacetime_weighted_integral(const Trajectory &traj, const CarlemanWeights &w, double s, double k,
                                   Integrand integrand, Region region, const IntegralOptions &options) {
  if (std::abs(traj.T() - w.T()) > 1e-12 * w.T())
    throw std::invalid_argument("spacetime_weighted_integral: trajectory and weights disagree on T");
  const SpaceTimeField *field = &traj.values;
  if (integrand == Integrand::SourceSq) {
    if (!options.source) throw std::invalid_argument("spacetime_weighted_integral: source_sq needs a source field");
    field = options.source;
  }
  const auto &mesh = traj.mesh;
  const Interval omega_prime{w.psi().alpha_prime(), w.psi().beta_prime()};
  if (options.quadrature == WeightQuadrature::Product) {
    const auto span = region_interval(region, options.omega, omega_prime);
    MomentOptions mo;
    mo.x_lo = span.lo;
    mo.x_hi = span.hi;
    mo.values = integrand != Integrand::AVxSq;
    mo.gradient = integrand == Integrand::AVxSq;
    const auto mom = weight_moments(mesh, traj.times, w, s, k, options.log_shift, mo);
    return moment_integral(mom, mesh, *field, integrand);
  }
  std::vector<bool> node_mask(mesh.size()), face_mask(mesh.cells());
  for (std::size_t i = 0; i < mesh.size(); ++i) node_mask[i] = in_region(region, mesh.node(i), options.omega, omega_prime);
  for (std::size_t f = 0; f < mesh.cells(); ++f) face_mask[f] = in_region(region, mesh.face(f), options.omega, omega_prime);
  std::vector<double> face_a(mesh.cells());
  for (std::size_t f = 0; f < mesh.cells(); ++f) face_a[f] = w.psi().coefficient()(mesh.face(f));
  const auto table = weight_table(mesh, traj.times, w, s, k, options.log_shift);
  return weighted_integral(table, mesh, traj.T(), *field, integrand, face_a, node_mask, face_mask);
}

std::string to_string(HardyCase c) {
  switch (c) {
    case HardyCase::CaseA: return "case_a";
    case HardyCase::CaseB: return "case_b";
    case HardyCase::AuxiliaryP: return "auxiliary_p";
    case HardyCase::AuxiliaryB: return "auxiliary_b";
  }
  return "?";
}

nlohmann::json to_json(const HardyReport &r) {
  return {{"case", to_string(r.hardy_case)}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio},
          {"violation", r.violation}};
}

HardyReport hardy_ratio(const DegeneracyCoefficient &coef, const Mesh &mesh, std::span<const double> w,
                        HardyCase hardy_case) {
  if (w.size() != mesh.size()) throw std::invalid_argument("hardy_ratio: nodal vector size mismatch");
  double scale = 0.0;
  for (double v : w) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * std::max(scale, 1.0);
  if (hardy_case == HardyCase::CaseA && std::abs(w.front()) > tol)
    throw std::invalid_argument("hardy_ratio: case A needs w(0) = 0");
  if (hardy_case != HardyCase::CaseA && std::abs(w.back()) > tol)
    throw std::invalid_argument("hardy_ratio: " + to_string(hardy_case) + " needs w(1) = 0");

  HardyReport rep;
  rep.hardy_case = hardy_case;
  const std::size_t n = mesh.size();
  auto g = [&](std::size_t i) {
    const double x = mesh.node(i);
    return coef(x) / (x * x) * w[i] * w[i];
  };
  // first cell
  const double x1 = mesh.node(1);
  if (std::abs(w.front()) <= tol) {
    rep.lhs += 0.5 * x1 * g(1);
  } else {
    const double kappa = x1 * coef.derivative(x1) / coef(x1);
    if (kappa <= 1.0) {
      rep.lhs = std::numeric_limits<double>::infinity();
      rep.violation = true;
    } else {
      const double wbar = 0.5 * (w[0] + w[1]);
      rep.lhs += wbar * wbar * coef(x1) / (x1 * (kappa - 1.0));
    }
  }
  for (std::size_t i = 1; i + 1 < n; ++i) rep.lhs += 0.5 * mesh.cell_length(i) * (g(i) + g(i + 1));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = mesh.cell_length(i);
    const double slope = (w[i + 1] - w[i]) / h;
    rep.rhs += 0.5 * (coef(mesh.node(i)) + coef(mesh.node(i + 1))) * h * slope * slope;
  }
  if (rep.rhs > 0.0) {
    rep.ratio = rep.lhs / rep.rhs;
  } else if (rep.lhs > 0.0) {
    rep.violation = true;
    rep.ratio = std::numeric_limits<double>::infinity();
  }
  return rep;
}

}  // namespace carleman
