#ifndef CARLEMAN_COEFFICIENTS_HPP
#define CARLEMAN_COEFFICIENTS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace carleman {

/// Degenerate diffusion coefficient a(x) on [0,1] with a(0) = 0.
///
/// Holds the value, first and second derivative as callables together with the
/// JSON descriptor it was built from. Instances are immutable and cheap to copy.
class DegeneracyCoefficient {
public:
  using Fn = std::function<double(double)>;

  DegeneracyCoefficient(std::string label, Fn value, Fn derivative, Fn second_derivative,
                        nlohmann::json descriptor = nlohmann::json::object());

  double operator()(double x) const { return value_(x); }
  double derivative(double x) const { return derivative_(x); }
  double second_derivative(double x) const { return second_(x); }

  const std::string &label() const { return label_; }
  const nlohmann::json &descriptor() const { return descriptor_; }

private:
  std::string label_;
  Fn value_;
  Fn derivative_;
  Fn second_;
  nlohmann::json descriptor_;
};

enum class Regime { WDC, SDC, Violation };

std::string to_string(Regime r);

struct HypothesisReport {
  double k_est = 0.0;           // sup of x a'(x) / a(x) over the grid
  Regime k_band = Regime::Violation;  // regime implied by K alone
  Regime regime = Regime::Violation;
  std::optional<double> theta_hyp;
  double neighborhood_radius = 0.0;
  int grid_size = 0;
  bool boundary_case = false;   // K == 1 within tolerance
  bool positive = true;         // a > 0 on the sampled grid
  bool nondecreasing = true;
  std::vector<std::string> notes;
};

nlohmann::json to_json(const HypothesisReport &r);

inline constexpr double kUnitBandTolerance = 1e-9;
inline constexpr double kBoundaryTheta = 0.99;
inline constexpr double kClassifyGridMin = 1e-8;

/// a(x) = x^gamma, gamma in (0,2).
DegeneracyCoefficient make_power_coefficient(double gamma);

enum class ExampleKind { PowerCos, PowerMinusX, PowerPlusX };

struct ExampleParams {
  double exponent = 0.5;   // gamma for PowerCos, theta for the other two
  double alpha = 0.0;      // PowerCos only; cosine frequency is atan(alpha)
};

/// Example coefficients x^g cos(atan(alpha) x), x^t - x and x^t + x.
DegeneracyCoefficient make_example_coefficient(ExampleKind kind, const ExampleParams &params);

/// Tabulated coefficient through (x, a) pairs, monotone cubic (PCHIP) interpolation.
/// Requires x[0] == 0, a[0] == 0, strictly increasing x ending at 1.
DegeneracyCoefficient make_table_coefficient(std::vector<double> x, std::vector<double> a);

/// Builds a coefficient from {"kind": ..., "params": {...}} or
/// {"kind": "table", "x": [...], "a": [...]}. Throws std::invalid_argument.
DegeneracyCoefficient coefficient_from_json(const nlohmann::json &j);

/// Auxiliary functions used with a(x) in the K = 1 branch of the estimate:
/// p(x) = (a(x) x^4)^{1/3} and b(x) = sqrt(a(x)) x.
DegeneracyCoefficient make_auxiliary_p(const DegeneracyCoefficient &a);
DegeneracyCoefficient make_auxiliary_b(const DegeneracyCoefficient &a);

/// Grid certification of the structural hypothesis on a (growth bound K and,
/// for strong degeneracy, the lower bound theta a <= x a' near zero).
HypothesisReport classify(const DegeneracyCoefficient &coef, int grid_size = 2048,
                          double zero_neighborhood = 0.1);

struct MonotoneCheck {
  bool ok = true;
  std::optional<double> violating_x;
  bool x2_over_a_bounded = true;
};

/// x -> x^r / a(x) nondecreasing on a test grid, and x^2/a(x) <= 1/a(1).
MonotoneCheck monotone_ratio_check(const DegeneracyCoefficient &coef, double r,
                                   int grid_size = 2048, double tol = 1e-12);

/// a(x)/x^theta nonincreasing (decreasing = true) or nondecreasing on (0, radius].
MonotoneCheck power_quotient_check(const DegeneracyCoefficient &coef, double theta,
                                   bool nonincreasing, double radius = 1.0,
                                   int grid_size = 2048, double tol = 1e-12);

/// Log-spaced points in [lo, 1] (lo > 0), both endpoints included.
std::vector<double> log_grid(double lo, int n);

}  // namespace carleman

#endif
