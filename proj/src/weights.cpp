#include "carleman/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

namespace carleman {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> poly_mul(const std::vector<double> &a, const std::vector<double> &b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<double> poly_add(std::vector<double> a, const std::vector<double> &b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

// Coefficients in tau in [0,1] for value/slope/curvature data already scaled by the
// interval length (d = L psi', c = L^2 psi'').
LocalPolynomial quintic_hermite(double p0, double d0, double c0, double p1, double d1, double c1) {
  LocalPolynomial poly;
  poly.coeffs = {p0,
                 d0,
                 0.5 * c0,
                 -10.0 * p0 - 6.0 * d0 - 1.5 * c0 + 10.0 * p1 - 4.0 * d1 + 0.5 * c1,
                 15.0 * p0 + 8.0 * d0 + 1.5 * c0 - 15.0 * p1 + 7.0 * d1 - c1,
                 -6.0 * p0 - 3.0 * d0 - 0.5 * c0 + 6.0 * p1 - 3.0 * d1 + 0.5 * c1};
  return poly;
}

LocalPolynomial taylor_blend(double p0, double d0, double c0, double p1, double d1, double c1) {
  // T_L(tau) = p0 + d0 tau + c0/2 tau^2, T_R(tau) = p1 + d1 (tau-1) + c1/2 (tau-1)^2
  const std::vector<double> tl = {p0, d0, 0.5 * c0};
  const std::vector<double> tr = {p1 - d1 + 0.5 * c1, d1 - c1, 0.5 * c1};
  const std::vector<double> smooth = {0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
  LocalPolynomial poly;
  poly.coeffs = poly_add(tl, poly_mul(smooth, poly_add(tr, tl, -1.0)));
  return poly;
}

}  // namespace

Interval default_omega_prime(const Interval &omega) {
  const double w = omega.hi - omega.lo;
  return {omega.lo + 0.25 * w, omega.hi - 0.25 * w};
}

std::array<double, 4> LocalPolynomial::eval(double tau) const {
  std::array<double, 4> r{0.0, 0.0, 0.0, 0.0};
  for (std::size_t j = coeffs.size(); j-- > 0;) {
    r[3] = r[3] * tau + r[2];
    r[2] = r[2] * tau + r[1];
    r[1] = r[1] * tau + r[0];
    r[0] = r[0] * tau + coeffs[j];
  }
  // r[2], r[3] hold p''/2 and p'''/6
  r[2] *= 2.0;
  r[3] *= 6.0;
  return r;
}

PsiFunction::PsiFunction(DegeneracyCoefficient coef, double alpha_prime, double beta_prime, int quad_points,
                         BridgeKind bridge)
    : coef_(std::move(coef)), alpha_prime_(alpha_prime), beta_prime_(beta_prime), bridge_kind_(bridge) {
  if (!(alpha_prime > 0.0 && alpha_prime < beta_prime && beta_prime < 1.0))
    throw std::invalid_argument("build_psi: need 0 < alpha' < beta' < 1");
  if (quad_points < 8) throw std::invalid_argument("build_psi: quad_points must be >= 8");

  // points so close to 0 that a(y) underflows carry no mass when K < 2
  auto integrand = [this](double y) {
    const double a = coef_(y);
    return a > 0.0 ? y / a : 0.0;
  };
  const auto n = static_cast<std::size_t>(quad_points);

  left_knots_.resize(n + 1);
  left_cum_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k <= n; ++k) {
    const double r = double(k) / double(n);
    left_knots_[k] = alpha_prime_ * r * r;
  }
  left_knots_[n] = alpha_prime_;
  try {
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    double err = 0.0;
    const double first = ts.integrate(integrand, 0.0, left_knots_[1], 1e-13, &err);
    if (!std::isfinite(first) || err > 1e-8 * std::max(1.0, std::abs(first)))
      throw std::runtime_error("tanh-sinh error estimate too large");
    left_cum_[1] = first;
  } catch (const std::exception &) {
    throw std::runtime_error("build_psi: integrand not integrable (y/a(y) near 0)");
  }
  for (std::size_t k = 2; k <= n; ++k) {
    left_cum_[k] = left_cum_[k - 1] + boost::math::quadrature::gauss<double, 30>::integrate(integrand, left_knots_[k - 1], left_knots_[k]);
  }

  right_knots_.resize(n + 1);
  right_cum_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k <= n; ++k) right_knots_[k] = beta_prime_ + (1.0 - beta_prime_) * double(k) / double(n);
  right_knots_[n] = 1.0;
  for (std::size_t k = 1; k <= n; ++k) {
    right_cum_[k] = right_cum_[k - 1] + boost::math::quadrature::gauss<double, 30>::integrate(integrand, right_knots_[k - 1], right_knots_[k]);
  }
  for (double c : left_cum_)
    if (!std::isfinite(c)) throw std::runtime_error("build_psi: integrand not integrable");
  for (double c : right_cum_)
    if (!std::isfinite(c)) throw std::runtime_error("build_psi: integrand not integrable");

  const double len = beta_prime_ - alpha_prime_;
  const auto l = left_branch(alpha_prime_);
  const auto r = right_branch(beta_prime_);
  const double d0 = len * l[1], c0 = len * len * l[2];
  const double d1 = len * r[1], c1 = len * len * r[2];
  bridge_ = bridge == BridgeKind::QuinticHermite ? quintic_hermite(l[0], d0, c0, r[0], d1, c1)
                                                 : taylor_blend(l[0], d0, c0, r[0], d1, c1);

  const double branch_mag = std::max(std::abs(l[0]), std::abs(right_branch(1.0)[0]));
  double bridge_mag = 0.0;
  double sup = std::max({std::abs(l[0]), std::abs(r[0]), std::abs(right_branch(1.0)[0])});
  constexpr int kDense = 10000;
  int best = 0;
  double best_v = -kInf;
  for (int i = 0; i <= kDense; ++i) {
    const double x = double(i) / kDense;
    const double v = value(x);
    sup = std::max(sup, std::abs(v));
    if (v > best_v) best_v = v, best = i;
    if (piece(x) == PsiPiece::Bridge) bridge_mag = std::max(bridge_mag, std::abs(v));
  }
  if (bridge_mag > 10.0 * branch_mag) throw std::runtime_error("build_psi: bridge overshoot");
  sup_ = sup;
  const double lo = double(std::max(best - 1, 0)) / kDense, hi = double(std::min(best + 1, kDense)) / kDense;
  const auto [xm, neg] =
      boost::math::tools::brent_find_minima([this](double x) { return -value(x); }, lo, hi, 50);
  argmax_ = -neg >= best_v ? xm : double(best) / kDense;
  max_value_ = value(argmax_);
  sup_ = std::max(sup_, std::abs(max_value_));
  if (piece(argmax_) == PsiPiece::Bridge) {
    // bridge re-expanded about the maximum: c_j = sum_n p_n C(n, j) tau*^(n-j)
    const double ts = (argmax_ - alpha_prime_) / len;
    const auto &p = bridge_.coeffs;
    peak_taylor_.assign(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      double binom = 1.0;
      for (std::size_t n = j; n < p.size(); ++n) {
        peak_taylor_[j] += p[n] * binom * std::pow(ts, double(n - j));
        binom = binom * double(n + 1) / double(n + 1 - j);
      }
    }
  }
}

double PsiFunction::left_integral(double x) const {
  if (x <= 0.0) return 0.0;
  // points so close to 0 that a(y) underflows carry no mass when K < 2
  auto integrand = [this](double y) {
    const double a = coef_(y);
    return a > 0.0 ? y / a : 0.0;
  };
  if (x <= left_knots_[1]) {
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate(integrand, 0.0, x, 1e-13);
  }
  auto it = std::upper_bound(left_knots_.begin(), left_knots_.end(), x);
  const auto k = static_cast<std::size_t>(std::distance(left_knots_.begin(), it)) - 1;
  const double x0 = left_knots_[k];
  if (x == x0) return left_cum_[k];
  return left_cum_[k] + boost::math::quadrature::gauss<double, 30>::integrate(integrand, x0, x);
}

double PsiFunction::right_integral(double x) const {
  // points so close to 0 that a(y) underflows carry no mass when K < 2
  auto integrand = [this](double y) {
    const double a = coef_(y);
    return a > 0.0 ? y / a : 0.0;
  };
  if (x <= beta_prime_) {
    if (x == beta_prime_) return 0.0;
    return -boost::math::quadrature::gauss<double, 30>::integrate(integrand, x, beta_prime_);
  }
  auto it = std::upper_bound(right_knots_.begin(), right_knots_.end(), x);
  const auto k = static_cast<std::size_t>(std::distance(right_knots_.begin(), it)) - 1;
  const double x0 = right_knots_[k];
  if (x == x0) return right_cum_[k];
  return right_cum_[k] + boost::math::quadrature::gauss<double, 30>::integrate(integrand, x0, x);
}

std::array<double, 3> PsiFunction::left_branch(double x) const {
  const double a = coef_(x);
  const double a1 = x > 0.0 ? coef_.derivative(x) : 0.0;
  const double d1 = x > 0.0 ? x / a : 0.0;
  const double d2 = x > 0.0 ? (a - x * a1) / (a * a) : 0.0;
  return {left_integral(x), d1, d2};
}

std::array<double, 3> PsiFunction::right_branch(double x) const {
  const double a = coef_(x);
  const double a1 = coef_.derivative(x);
  return {-right_integral(x), -x / a, -(a - x * a1) / (a * a)};
}

std::array<double, 4> PsiFunction::bridge(double x) const {
  const double len = beta_prime_ - alpha_prime_;
  auto r = bridge_.eval((x - alpha_prime_) / len);
  r[1] /= len;
  r[2] /= len * len;
  r[3] /= len * len * len;
  return r;
}

double PsiFunction::drop_from_max(double x) const {
  if (peak_taylor_.empty() || piece(x) != PsiPiece::Bridge) return value(x) - max_value_;
  const double u = (x - argmax_) / (beta_prime_ - alpha_prime_);
  double r = 0.0;
  for (std::size_t j = peak_taylor_.size(); j-- > 1;) r = (r + peak_taylor_[j]) * u;
  return r;
}

PsiPiece PsiFunction::piece(double x) const {
  if (x <= alpha_prime_) return PsiPiece::Left;
  if (x >= beta_prime_) return PsiPiece::Right;
  return PsiPiece::Bridge;
}

double PsiFunction::value(double x) const {
  switch (piece(x)) {
    case PsiPiece::Left: return left_integral(x);
    case PsiPiece::Right: return -right_integral(x);
    case PsiPiece::Bridge: return bridge(x)[0];
  }
  return 0.0;
}

PsiLocal PsiFunction::local(double x) const {
  PsiLocal p;
  p.x = x;
  p.piece = piece(x);
  p.a = coef_(x);
  if (p.piece == PsiPiece::Bridge) {
    const auto b = bridge(x);
    const double a1 = coef_.derivative(x), a2 = coef_.second_derivative(x);
    p.psi = b[0];
    p.dpsi = b[1];
    p.q = p.a * b[1];
    p.dq = a1 * b[1] + p.a * b[2];
    p.ddq = a2 * b[1] + 2.0 * a1 * b[2] + p.a * b[3];
    p.q2_over_a = p.a * b[1] * b[1];
    const double dq2a = a1 * b[1] * b[1] + 2.0 * p.a * b[1] * b[2];
    p.q_dq2a = p.q * dq2a;
    p.a_dq2a = p.a * dq2a;
    p.q4_over_a2 = p.q2_over_a * p.q2_over_a;
    p.q_da = p.q * a1;
    return p;
  }
  const double sign = p.piece == PsiPiece::Left ? 1.0 : -1.0;
  p.psi = value(x);
  p.dq = sign;
  p.ddq = 0.0;
  if (x == 0.0) {
    // limits under x a' <= K a with K < 2
    const double tiny = 1e-300;
    p.dpsi = tiny / coef_(tiny);
    return p;
  }
  const double a1 = coef_.derivative(x);
  const double ratio = x * a1 / p.a;
  p.dpsi = sign * x / p.a;
  p.q = sign * x;
  p.q2_over_a = x * x / p.a;
  p.q_dq2a = sign * p.q2_over_a * (2.0 - ratio);
  p.a_dq2a = x * (2.0 - ratio);
  p.q4_over_a2 = p.q2_over_a * p.q2_over_a;
  p.q_da = sign * x * a1;
  return p;
}

PsiFunction build_psi(const DegeneracyCoefficient &coef, double alpha_prime, double beta_prime, int quad_points,
                      BridgeKind bridge) {
  const auto rep = classify(coef);
  if (rep.regime == Regime::Violation) {
    if (rep.k_est >= 2.0) throw std::runtime_error("build_psi: integrand not integrable (K >= 2)");
    throw std::invalid_argument("build_psi: coefficient is neither WDC nor SDC (" + coef.label() + ")");
  }
  return PsiFunction(coef, alpha_prime, beta_prime, quad_points, bridge);
}

TimeWeight time_weight(double t, double T) {
  const double g = t * (T - t);
  if (!(g > 0.0)) throw std::domain_error("theta_time: singular endpoint");
  TimeWeight w;
  const double g2 = g * g;
  const double g4 = g2 * g2;
  const double dg = T - 2.0 * t;
  w.theta = 1.0 / g4;
  w.log_theta = -4.0 * std::log(g);
  w.dtheta = -4.0 * dg / (g4 * g);
  w.ddtheta = 20.0 * dg * dg / (g4 * g2) + 8.0 / (g4 * g);
  return w;
}

double eval_theta_time(double t, double T) { return time_weight(t, T).theta; }

CarlemanWeights::CarlemanWeights(std::shared_ptr<const PsiFunction> psi, double lambda, double T)
    : psi_(std::move(psi)), lambda_(lambda), T_(T) {
  if (!psi_) throw std::invalid_argument("CarlemanWeights: null psi");
  if (!(lambda > 0.0)) throw std::invalid_argument("CarlemanWeights: lambda must be > 0");
  if (!(T > 0.0)) throw std::invalid_argument("CarlemanWeights: T must be > 0");
  exp_three_ = std::exp(3.0 * lambda_ * psi_->sup_norm());
  psi_max_ = psi_->max_value();
}

double CarlemanWeights::eta_from_psi(double psi) const { return std::exp(lambda_ * (psi_->sup_norm() + psi)); }

double CarlemanWeights::sigma(double t, double x) const { return eval_theta_time(t, T_) * eta(x); }

double CarlemanWeights::phi_from_psi(double t, double psi) const {
  if (!(t > 0.0 && t < T_)) return -kInf;
  return time_weight(t, T_).theta * (eta_from_psi(psi) - exp_three_);
}

double CarlemanWeights::phi(double t, double x) const { return phi_from_psi(t, psi_->value(x)); }

double CarlemanWeights::phi_max(double t) const { return phi_from_psi(t, psi_max_); }

double CarlemanWeights::log_weight(double t, double psi, double s, double k) const {
  if (!(t > 0.0 && t < T_)) return -kInf;
  const auto tw = time_weight(t, T_);
  const double lam_psi = lambda_ * (psi_->sup_norm() + psi);
  const double phi = tw.theta * (std::exp(lam_psi) - exp_three_);
  double e = 2.0 * s * phi;
  if (k != 0.0) e += k * (tw.log_theta + lam_psi);
  return e;
}

nlohmann::json CarlemanWeights::to_json() const {
  return {{"lambda", lambda_},
          {"T", T_},
          {"alpha_prime", psi_->alpha_prime()},
          {"beta_prime", psi_->beta_prime()},
          {"coefficient", psi_->coefficient().descriptor()}};
}

double eval_weight_psi(const CarlemanWeights &w, double t, double psi, double s, double k, double log_shift) {
  const double e = w.log_weight(t, psi, s, k) - log_shift;
  if (!(e >= kUnderflowExponent)) return 0.0;
  return std::exp(e);
}

double eval_weight(const CarlemanWeights &w, double t, double x, double s, double k, double log_shift) {
  if (!(t > 0.0 && t < w.T())) return 0.0;
  return eval_weight_psi(w, t, w.psi().value(x), s, k, log_shift);
}

CarlemanWeights weights_from_json(const nlohmann::json &j) {
  for (const char *key : {"lambda", "T", "alpha_prime", "beta_prime"})
    if (!j.contains(key) || !j.at(key).is_number())
      throw std::invalid_argument(std::string("weights.") + key + ": required number");
  if (!j.contains("coefficient")) throw std::invalid_argument("weights.coefficient: required");
  auto coef = coefficient_from_json(j.at("coefficient"));
  auto psi = std::make_shared<const PsiFunction>(
      build_psi(coef, j.at("alpha_prime").get<double>(), j.at("beta_prime").get<double>()));
  return CarlemanWeights(psi, j.at("lambda").get<double>(), j.at("T").get<double>());
}

}  // namespace carleman
