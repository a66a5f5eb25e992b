#ifndef CARLEMAN_WEIGHTS_HPP
#define CARLEMAN_WEIGHTS_HPP

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carleman/coefficients.hpp"

namespace carleman {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains_open(double x) const { return x > lo && x < hi; }
};

/// Strictly contained sub-interval used for omega': trims a quarter of the width on each side.
Interval default_omega_prime(const Interval &omega);

enum class BridgeKind {
  QuinticHermite,  // degree-5 Hermite interpolant of value, slope and curvature
  TaylorBlend      // second-order Taylor expansions of both branches blended by a C2 smoothstep
};

/// Polynomial in a local variable tau, evaluated with its first three derivatives.
struct LocalPolynomial {
  std::vector<double> coeffs;  // ascending powers of tau
  std::array<double, 4> eval(double tau) const;
};

enum class PsiPiece { Left, Bridge, Right };

/// Pointwise data of psi and of the combinations the Carleman identities need.
/// With q = a psi', every quantity below stays bounded at x = 0 under K < 2; the
/// values at x = 0 are the limits.
struct PsiLocal {
  double x = 0.0;
  double a = 0.0;
  double psi = 0.0;
  double dpsi = 0.0;       // psi'
  double q = 0.0;          // a psi'
  double dq = 0.0;         // (a psi')'
  double ddq = 0.0;        // (a psi')''
  double q2_over_a = 0.0;  // a psi'^2
  double q_dq2a = 0.0;     // a psi' (a psi'^2)'
  double a_dq2a = 0.0;     // a (a psi'^2)'
  double q4_over_a2 = 0.0; // a^2 psi'^4
  double q_da = 0.0;       // a psi' a'
  PsiPiece piece = PsiPiece::Left;
};

/// Space profile psi of the Carleman weight: antiderivative of y/a(y) from 0 on
/// [0, alpha'], minus the antiderivative from beta' on [beta', 1], and a C2
/// polynomial bridge across (alpha', beta').
class PsiFunction {
public:
  PsiFunction(DegeneracyCoefficient coef, double alpha_prime, double beta_prime, int quad_points = 256,
              BridgeKind bridge = BridgeKind::QuinticHermite);

  double value(double x) const;
  PsiLocal local(double x) const;
  PsiPiece piece(double x) const;

  /// Branch formulas (value, psi', psi'') evaluated at x even outside their interval
  /// of definition; used to check the C2 stitching.
  std::array<double, 3> left_branch(double x) const;
  std::array<double, 3> right_branch(double x) const;
  /// Bridge polynomial value and first three x-derivatives.
  std::array<double, 4> bridge(double x) const;

  double alpha_prime() const { return alpha_prime_; }
  double beta_prime() const { return beta_prime_; }
  double sup_norm() const { return sup_; }
  /// Location and value of the maximum of psi (inside the bridge).
  double argmax() const { return argmax_; }
  double max_value() const { return max_value_; }
  /// psi(x) - max psi without cancellation near the maximum.
  double drop_from_max(double x) const;
  BridgeKind bridge_kind() const { return bridge_kind_; }
  const DegeneracyCoefficient &coefficient() const { return coef_; }

private:
  double left_integral(double x) const;
  double right_integral(double x) const;

  DegeneracyCoefficient coef_;
  double alpha_prime_;
  double beta_prime_;
  BridgeKind bridge_kind_;
  std::vector<double> left_knots_, left_cum_;
  std::vector<double> right_knots_, right_cum_;
  LocalPolynomial bridge_;
  double sup_ = 0.0;
  double argmax_ = 0.0;
  double max_value_ = 0.0;
  std::vector<double> peak_taylor_;  // bridge in powers of (x - argmax) / (beta' - alpha')
};

PsiFunction build_psi(const DegeneracyCoefficient &coef, double alpha_prime, double beta_prime,
                      int quad_points = 256, BridgeKind bridge = BridgeKind::QuinticHermite);

/// theta_time(t) = 1 / [t (T - t)]^4. Throws std::domain_error at t in {0, T}.
double eval_theta_time(double t, double T);

struct TimeWeight {
  double theta = 0.0;
  double dtheta = 0.0;
  double ddtheta = 0.0;
  double log_theta = 0.0;
};

TimeWeight time_weight(double t, double T);

/// The weight family (theta_time, eta, sigma, phi) for fixed lambda and T.
class CarlemanWeights {
public:
  CarlemanWeights(std::shared_ptr<const PsiFunction> psi, double lambda, double T);

  const PsiFunction &psi() const { return *psi_; }
  std::shared_ptr<const PsiFunction> psi_ptr() const { return psi_; }
  double lambda() const { return lambda_; }
  double T() const { return T_; }

  double eta_from_psi(double psi) const;
  double eta(double x) const { return eta_from_psi(psi_->value(x)); }
  double sigma(double t, double x) const;
  double phi(double t, double x) const;
  /// phi given a precomputed psi value; -infinity at t in {0, T}.
  double phi_from_psi(double t, double psi) const;

  /// 2 s phi + k ln sigma for a precomputed psi value (-infinity at t in {0, T}).
  double log_weight(double t, double psi, double s, double k) const;

  /// Largest value of phi(t, .) over [0,1] at fixed t, attained where psi is largest.
  double phi_max(double t) const;

  nlohmann::json to_json() const;

private:
  std::shared_ptr<const PsiFunction> psi_;
  double lambda_;
  double T_;
  double exp_three_ = 0.0;  // e^{3 lambda |psi|_inf}
  double psi_max_ = 0.0;
};

inline constexpr double kUnderflowExponent = -700.0;

/// e^{2 s phi} sigma^k computed as exp(2 s phi + k ln sigma - log_shift). Exactly 0
/// at t in {0, T} or when the exponent drops below -700.
double eval_weight(const CarlemanWeights &w, double t, double x, double s, double k, double log_shift = 0.0);

/// Same as eval_weight with psi(x) supplied by the caller.
double eval_weight_psi(const CarlemanWeights &w, double t, double psi, double s, double k,
                       double log_shift = 0.0);

/// Builds weights from {lambda, T, alpha_prime, beta_prime, coefficient}.
CarlemanWeights weights_from_json(const nlohmann::json &j);

}  // namespace carleman

#endif
