#ifndef CARLEMAN_CARLEMAN_HPP
#define CARLEMAN_CARLEMAN_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carleman/functionals.hpp"
#include "carleman/pde_solver.hpp"
#include "carleman/weights.hpp"

namespace carleman {

struct CarlemanParams {
  double s = 1.0;
  double lambda = 1.0;
};

/// Both sides of the weighted estimate for one adjoint solution. All four terms
/// carry the common factor e^{-log_scale}, which cancels in the ratios.
struct CarlemanReport {
  double lhs_grad = 0.0;    // (s lambda) int e^{2 s phi} sigma a v_x^2
  double lhs_zero = 0.0;    // (s lambda)^{5/3} int e^{2 s phi} sigma^{5/3} v^2
  double rhs_source = 0.0;  // int e^{2 s phi} F^2
  double rhs_local = 0.0;   // (s lambda)^3 int_{Q_omega} e^{2 s phi} sigma^3 v^2
  double ratio = 0.0;
  double lhs_zero_beta2 = 0.0;  // (s lambda)^2 int e^{2 s phi} sigma^2 v^2
  double ratio_beta2 = 0.0;
  double log_scale = 0.0;
  CarlemanParams params;
  std::size_t sample_id = 0;
  bool degenerate = false;
};

nlohmann::json to_json(const CarlemanReport &r);

inline constexpr double kDegenerateDenominator = 1e-300;

/// 2 s max phi, the shift that keeps the weighted integrals in range.
double carleman_log_shift(const CarlemanWeights &w, double s);

/// Evaluates the report for an already computed adjoint trajectory and source.
CarlemanReport carleman_terms(const Trajectory &v, const SpaceTimeField &F, const CarlemanWeights &w,
                              const CarlemanParams &params, const Interval &omega);

/// Solves the adjoint problem with data (v_T, F) and evaluates both sides.
/// The weights must carry params.lambda and spec.T.
CarlemanReport carleman_sides(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F,
                              const CarlemanWeights &w, const CarlemanParams &params, std::size_t sample_id = 0);

/// s0 = 2 max(1, T^2) e^{2 lambda |psi|_inf}.
double default_s0(const PsiFunction &psi, double T, double lambda);
inline constexpr double kDefaultLambda0 = 2.0;

struct SweepPoint {
  double s = 1.0;
  double lambda = 1.0;
  bool stable = true;
};

/// s = s0(lambda) 2^j for j = 0..doublings, for each lambda.
std::vector<SweepPoint> default_sweep_points(const PsiFunction &psi, double T, const std::vector<double> &lambdas,
                                             int doublings = 4, double lambda0 = kDefaultLambda0);

struct SweepConfig {
  std::size_t n_samples = 20;
  std::vector<SweepPoint> points;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  bool with_source = true;
};

struct SweepSummary {
  double s = 0.0;
  double lambda = 0.0;
  bool stable = true;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  double max_ratio_beta2 = 0.0;
  std::size_t count = 0;
  std::size_t excluded = 0;
};

struct SweepResult {
  std::vector<CarlemanReport> reports;  // ordered by (sample, point)
  std::vector<SweepSummary> summary;    // one row per point, in point order
  double empirical_C = 0.0;             // max ratio over stable points
  double empirical_C_beta2 = 0.0;
  std::size_t excluded_count = 0;
  bool all_finite = true;
};

/// Samples v_T (and F when with_source) from the seeded sine-series scheme, solves
/// each adjoint once and evaluates every sweep point. Results do not depend on jobs.
SweepResult carleman_sweep(const ProblemSpec &spec, std::shared_ptr<const PsiFunction> psi, const SweepConfig &cfg);

/// w = e^{s phi} v on the trajectory grid with discrete L+ w and L- w.
struct WTransform {
  SpaceTimeField w;
  SpaceTimeField lplus;
  SpaceTimeField lminus;
  Mesh mesh;
  std::vector<double> times;
};

WTransform transform_to_w(const Trajectory &v, const CarlemanWeights &weights, const CarlemanParams &params,
                          BoundaryCondition bc);

/// v = e^{-s phi} w wherever e^{s phi} is above the underflow clamp; 0 elsewhere.
SpaceTimeField transform_from_w(const WTransform &wt, const CarlemanWeights &weights, const CarlemanParams &params);

/// Smooth space-time test function with w, w_t, w_x, w_xx.
struct ManufacturedField {
  std::string label;
  BoundaryCondition bc = BoundaryCondition::DirichletZero;
  double T = 1.0;
  std::function<std::array<double, 4>(double t, double x)> eval;
};

/// w(t,x) = g(t) f(x) with g = [t (T - t) / (T^2/4)]^8. The eighth power keeps every
/// term of the identity integrable against theta_time^3 at t = 0, T.
/// profile returns (f, f', f'').
ManufacturedField manufactured_product(std::string label, BoundaryCondition bc, double T,
                                       std::function<std::array<double, 3>(double)> profile);

/// The standard profiles: sin(pi x), x(1-x), sin(2 pi x) for Dirichlet at 0 and
/// cos(pi x / 2), 1 - x^2, (1-x)^2 (1+2x) for zero flux.
std::vector<ManufacturedField> manufactured_suite(BoundaryCondition bc, double T);

enum class QuadratureRule { Midpoint, Gauss3 };

struct Lemma32Result {
  double inner_product = 0.0;     // (L+ w, L- w) in L2(Q)
  std::array<double, 7> terms{};  // the seven terms of the expansion, boundary term last
  double expansion = 0.0;
  double residual = 0.0;          // |difference| / (sum |terms| + 1)
};

Lemma32Result lemma32_identity(const ManufacturedField &w, const CarlemanWeights &weights,
                               const CarlemanParams &params, std::size_t N, std::size_t M,
                               QuadratureRule rule = QuadratureRule::Gauss3, double grading = 2.0);

double lemma32_identity_residual(const ManufacturedField &w, const CarlemanWeights &weights,
                                 const CarlemanParams &params, std::size_t N, std::size_t M);

/// Discrete -s int_0^T [a^2 phi_x w_x^2] from x=0 to x=1 with one-sided w_x: the
/// right end uses the last cell, the left end the first face x_{1/2}.
double lemma33_boundary_sign(const WTransform &wt, const CarlemanWeights &weights, const CarlemanParams &params);
/// The x = 1 and x = 0 contributions separately; each is >= 0 in exact arithmetic.
std::array<double, 2> lemma33_boundary_parts(const WTransform &wt, const CarlemanWeights &weights,
                                             const CarlemanParams &params);

struct ObservabilityReport {
  double constant = 0.0;  // max ratio over non-excluded samples
  std::vector<double> ratios;
  std::size_t excluded = 0;
};

/// |v(0)|^2 / int int_{Q_omega} v^2 for one adjoint solution with F = 0; NaN when
/// the denominator vanishes.
double observability_sample_ratio(const ProblemSpec &spec, std::span<const double> vT);

ObservabilityReport observability_ratio(const ProblemSpec &spec, std::size_t n_samples, std::uint64_t seed);

}  // namespace carleman

#endif
