#ifndef CARLEMAN_FUNCTIONALS_HPP
#define CARLEMAN_FUNCTIONALS_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carleman/coefficients.hpp"
#include "carleman/mesh.hpp"
#include "carleman/pde_solver.hpp"
#include "carleman/weights.hpp"

namespace carleman {

enum class NormKind { L2, H1a, H2a };

/// Discrete norms of L2, H1_a and H2_a. Trapezoid weights at nodes; the seminorm
/// |sqrt(a) u_x|^2 uses a at the faces and cell difference quotients.
class WeightedNorms {
public:
  WeightedNorms(const Mesh &mesh, const DegeneracyCoefficient &coef);

  double l2_sq(std::span<const double> u) const;
  double seminorm_sq(std::span<const double> u) const;  // |sqrt(a) u_x|^2
  double flux_sq(std::span<const double> u) const;      // |(a u_x)_x|^2 over interior nodes
  double norm_sq(NormKind kind, std::span<const double> u) const;
  double norm(NormKind kind, std::span<const double> u) const;

  const Mesh &mesh() const { return mesh_; }
  const std::vector<double> &face_a() const { return face_a_; }

private:
  Mesh mesh_;
  std::vector<double> face_a_;
};

double weighted_norm(const WeightedNorms &norms, NormKind kind, std::span<const double> u);

enum class Integrand { VSq, AVxSq, SourceSq };
enum class Region { Q, QOmega, QOmegaPrime, LeftOfAlphaPrime, RightOfBetaPrime };

std::string to_string(Region r);

/// Membership of a point x in a region. omega' is open; the two side regions are
/// closed, so left + omega' + right partitions [0, 1].
bool in_region(Region r, double x, const Interval &omega, const Interval &omega_prime);

/// e^{2 s phi} sigma^k - shift, tabulated at the nodes and faces of a space-time grid.
struct WeightTable {
  SpaceTimeField nodes;
  SpaceTimeField faces;
  double log_shift = 0.0;
};

WeightTable weight_table(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s,
                         double k, double log_shift = 0.0);

/// Tensor trapezoid of weight * integrand over a region. Nodal integrands use the
/// trapezoid node weights; a v_x^2 uses a at faces and the cell length.
double weighted_integral(const WeightTable &table, const Mesh &mesh, double T, const SpaceTimeField &field,
                         Integrand integrand, const std::vector<double> &face_a, const std::vector<bool> &node_mask,
                         const std::vector<bool> &face_mask);

/// Integrals of the weight against the bilinear interpolation basis of every
/// space-time cell (t_m, t_{m+1}) x (x_i, x_{i+1}), clipped in x to [x_lo, x_hi].
/// With them, weight * (interpolated field)^2 integrates exactly up to the
/// quadrature tolerance, however sharply e^{2 s phi} peaks between grid points.
struct WeightMoments {
  std::size_t steps = 0;
  std::size_t cells = 0;
  // row-major over (m, i); products of the corner functions (1-tau)(1-xi),
  // (1-tau)xi, tau(1-xi), tau xi in the order 00 01 02 03 11 12 13 22 23 33
  std::vector<std::array<double, 10>> values;
  // a(x) times (1-tau)^2, tau(1-tau), tau^2
  std::vector<std::array<double, 3>> gradient;
  double log_shift = 0.0;
  std::size_t regions = 0;
  bool converged = true;
};

struct MomentOptions {
  double x_lo = 0.0;
  double x_hi = 1.0;
  bool values = true;
  bool gradient = false;
  double rtol = 1e-8;
  std::size_t max_regions = 4'000'000;
};

/// Globally adaptive tensor Gauss quadrature of the weight moments. Cells near
/// the weight's peak (t*, argmax psi) are pre-split at the scale of the peak
/// width so the adaptive error estimate sees it.
WeightMoments weight_moments(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s,
                             double k, double log_shift, const MomentOptions &options = {});

/// int int weight * g with g = v^2 (bilinear v) or a v_x^2 (v_x constant per cell in x).
double moment_integral(const WeightMoments &mom, const Mesh &mesh, const SpaceTimeField &field, Integrand integrand);

/// Closed x-interval covered by a region.
Interval region_interval(Region r, const Interval &omega, const Interval &omega_prime);

enum class WeightQuadrature { Trapezoid, Product };

struct IntegralOptions {
  Interval omega{0.3, 0.7};
  const SpaceTimeField *source = nullptr;  // field integrated by SourceSq
  double log_shift = 0.0;                  // result is scaled by e^{-log_shift}
  WeightQuadrature quadrature = WeightQuadrature::Trapezoid;
};

/// int int_region e^{2 s phi} sigma^k g over (0,T) x region, with g one of v^2,
/// a v_x^2 (from the trajectory) or F^2 (from options.source).
double spacetime_weighted_integral(const Trajectory &traj, const CarlemanWeights &w, double s, double k,
                                   Integrand integrand, Region region, const IntegralOptions &options = {});

enum class HardyCase { CaseA, CaseB, AuxiliaryP, AuxiliaryB };

std::string to_string(HardyCase c);

struct HardyReport {
  double lhs = 0.0;  // int a/x^2 w^2
  double rhs = 0.0;  // int a w'^2
  double ratio = 0.0;
  HardyCase hardy_case = HardyCase::CaseA;
  bool violation = false;  // rhs = 0 with lhs > 0, or lhs not integrable
};

nlohmann::json to_json(const HardyReport &r);

/// Hardy quotient of w for the given (possibly auxiliary) coefficient. Case A and
/// the auxiliary cases need w(0) = 0 or w(1) = 0 as documented; violations of the
/// boundary constraint throw std::invalid_argument. At x = 0 the integrand uses its
/// limit 0 when w(0) = 0, otherwise the first cell is integrated in closed form
/// against the local power x^kappa of a.
HardyReport hardy_ratio(const DegeneracyCoefficient &coef, const Mesh &mesh, std::span<const double> w,
                        HardyCase hardy_case);

}  // namespace carleman

#endif
