#include "carleman/coefficients.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>


namespace carleman {

DegeneracyCoefficient::DegeneracyCoefficient(std::string label, Fn value, Fn derivative,
                                             Fn second_derivative, nlohmann::json descriptor)
    : label_(std::move(label)),
      value_(std::move(value)),
      derivative_(std::move(derivative)),
      second_(std::move(second_derivative)),
      descriptor_(std::move(descriptor)) {}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::WDC: return "WDC";
    case Regime::SDC: return "SDC";
    case Regime::Violation: return "Violation";
  }
  return "Violation";
}

nlohmann::json to_json(const HypothesisReport &r) {
  nlohmann::json j;
  j["K_est"] = r.k_est;
  j["k_band"] = to_string(r.k_band);
  j["regime"] = to_string(r.regime);
  j["theta_hyp"] = r.theta_hyp ? nlohmann::json(*r.theta_hyp) : nlohmann::json(nullptr);
  j["neighborhood_radius"] = r.neighborhood_radius;
  j["grid_size"] = r.grid_size;
  j["boundary_case"] = r.boundary_case;
  j["positive"] = r.positive;
  j["nondecreasing"] = r.nondecreasing;
  j["notes"] = r.notes;
  return j;
}

std::vector<double> log_grid(double lo, int n) {
  if (!(lo > 0.0) || n < 2) throw std::invalid_argument("log_grid: need lo > 0 and n >= 2");
  std::vector<double> g(static_cast<std::size_t>(n));
  const double l0 = std::log(lo);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(l0 * (1.0 - double(i) / (n - 1)));
  g.back() = 1.0;
  return g;
}

DegeneracyCoefficient make_power_coefficient(double gamma) {
  if (!(gamma > 0.0 && gamma < 2.0)) {
    std::ostringstream os;
    os << "power coefficient: gamma = " << gamma << " outside (0,2)";
    throw std::invalid_argument(os.str());
  }
  std::ostringstream label;
  label << "x^" << gamma;
  return DegeneracyCoefficient(
      label.str(), [gamma](double x) { return std::pow(x, gamma); },
      [gamma](double x) { return gamma * std::pow(x, gamma - 1.0); },
      [gamma](double x) { return gamma * (gamma - 1.0) * std::pow(x, gamma - 2.0); },
      {{"kind", "power"}, {"params", {{"gamma", gamma}}}});
}

DegeneracyCoefficient make_example_coefficient(ExampleKind kind, const ExampleParams &p) {
  const double g = p.exponent;
  std::ostringstream label;
  switch (kind) {
    case ExampleKind::PowerCos: {
      if (!((g > 0.0 && g < 1.0) || (g > 1.0 && g < 2.0)))
        throw std::invalid_argument("power_cos: gamma must lie in (0,1) U (1,2)");
      if (!(p.alpha >= 0.0)) throw std::invalid_argument("power_cos: alpha must be >= 0");
      const double b = std::atan(p.alpha);
      label << "x^" << g << "*cos(" << b << "x)";
      return DegeneracyCoefficient(
          label.str(), [g, b](double x) { return std::pow(x, g) * std::cos(b * x); },
          [g, b](double x) {
            return g * std::pow(x, g - 1.0) * std::cos(b * x) - b * std::pow(x, g) * std::sin(b * x);
          },
          [g, b](double x) {
            return g * (g - 1.0) * std::pow(x, g - 2.0) * std::cos(b * x) -
                   2.0 * g * b * std::pow(x, g - 1.0) * std::sin(b * x) -
                   b * b * std::pow(x, g) * std::cos(b * x);
          },
          {{"kind", "power_cos"}, {"params", {{"gamma", g}, {"alpha", p.alpha}}}});
    }
    case ExampleKind::PowerMinusX: {
      if (!(g > 0.0 && g < 1.0)) throw std::invalid_argument("power_minus_x: theta must lie in (0,1)");
      label << "x^" << g << "-x";
      return DegeneracyCoefficient(
          label.str(), [g](double x) { return std::pow(x, g) - x; },
          [g](double x) { return g * std::pow(x, g - 1.0) - 1.0; },
          [g](double x) { return g * (g - 1.0) * std::pow(x, g - 2.0); },
          {{"kind", "power_minus_x"}, {"params", {{"theta", g}}}});
    }
    case ExampleKind::PowerPlusX: {
      if (!(g > 1.0 && g < 2.0)) throw std::invalid_argument("power_plus_x: theta must lie in (1,2)");
      label << "x^" << g << "+x";
      return DegeneracyCoefficient(
          label.str(), [g](double x) { return std::pow(x, g) + x; },
          [g](double x) { return g * std::pow(x, g - 1.0) + 1.0; },
          [g](double x) { return g * (g - 1.0) * std::pow(x, g - 2.0); },
          {{"kind", "power_plus_x"}, {"params", {{"theta", g}}}});
    }
  }
  throw std::invalid_argument("unknown example kind");
}

namespace {

// Piecewise cubic Hermite interpolant with Fritsch-Carlson monotone slopes.
class MonotoneCubic {
public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    d_.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double w1 = 2.0 * h[i] + h[i - 1], w2 = h[i] + 2.0 * h[i - 1];
      d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
    d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  /// value, first and second derivative
  std::array<double, 3> eval(double t) const {
    t = std::clamp(t, x_.front(), x_.back());
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(std::distance(x_.begin(), it)) - 1;
    if (i + 1 >= x_.size()) i = x_.size() - 2;
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double y0 = y_[i], y1 = y_[i + 1], m0 = d_[i] * h, m1 = d_[i + 1] * h;
    const double c2 = 3.0 * (y1 - y0) - 2.0 * m0 - m1;
    const double c3 = 2.0 * (y0 - y1) + m0 + m1;
    return {y0 + s * (m0 + s * (c2 + s * c3)), (m0 + s * (2.0 * c2 + 3.0 * s * c3)) / h,
            (2.0 * c2 + 6.0 * s * c3) / (h * h)};
  }

private:
  static double end_slope(double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return d;
  }

  std::vector<double> x_, y_, d_;
};

}  // namespace

DegeneracyCoefficient make_table_coefficient(std::vector<double> x, std::vector<double> a) {
  if (x.size() != a.size() || x.size() < 4)
    throw std::invalid_argument("table coefficient: need matching x/a arrays with >= 4 entries");
  if (x.front() != 0.0 || a.front() != 0.0)
    throw std::invalid_argument("table coefficient: must start at (0, 0)");
  if (std::abs(x.back() - 1.0) > 1e-14) throw std::invalid_argument("table coefficient: x must end at 1");
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("table coefficient: x must be strictly increasing");
    if (!(a[i] > 0.0)) throw std::invalid_argument("table coefficient: a must be positive on (0,1]");
    if (a[i] < a[i - 1]) throw std::invalid_argument("table coefficient: a must be nondecreasing");
  }
  nlohmann::json desc = {{"kind", "table"}, {"x", x}, {"a", a}};
  auto interp = std::make_shared<const MonotoneCubic>(std::move(x), std::move(a));
  auto value = [interp](double t) { return interp->eval(t)[0]; };
  auto deriv = [interp](double t) { return interp->eval(t)[1]; };
  auto second = [interp](double t) { return interp->eval(t)[2]; };
  return DegeneracyCoefficient("table", value, deriv, second, std::move(desc));
}

namespace {

double require_number(const nlohmann::json &params, const char *key) {
  if (!params.contains(key) || !params.at(key).is_number())
    throw std::invalid_argument(std::string("coefficient.params.") + key + ": required number");
  return params.at(key).get<double>();
}

}  // namespace

DegeneracyCoefficient coefficient_from_json(const nlohmann::json &j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw std::invalid_argument("coefficient.kind: required string");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "table") {
    if (!j.contains("x") || !j.contains("a") || !j.at("x").is_array() || !j.at("a").is_array())
      throw std::invalid_argument("coefficient: table requires arrays x and a");
    return make_table_coefficient(j.at("x").get<std::vector<double>>(), j.at("a").get<std::vector<double>>());
  }
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  if (kind == "power") return make_power_coefficient(require_number(params, "gamma"));
  if (kind == "power_cos") {
    ExampleParams p;
    p.exponent = require_number(params, "gamma");
    p.alpha = params.contains("alpha") ? require_number(params, "alpha") : 0.0;
    return make_example_coefficient(ExampleKind::PowerCos, p);
  }
  if (kind == "power_minus_x" || kind == "power_plus_x") {
    ExampleParams p;
    p.exponent = require_number(params, "theta");
    return make_example_coefficient(kind == "power_minus_x" ? ExampleKind::PowerMinusX : ExampleKind::PowerPlusX, p);
  }
  throw std::invalid_argument("coefficient.kind: unknown kind '" + kind + "'");
}

DegeneracyCoefficient make_auxiliary_p(const DegeneracyCoefficient &a) {
  // p = (a x^4)^{1/3};  p'/p = (a'/a + 4/x)/3
  auto value = [a](double x) { return std::cbrt(a(x) * std::pow(x, 4)); };
  auto deriv = [a](double x) {
    if (x == 0.0) return 0.0;
    const double p = std::cbrt(a(x) * std::pow(x, 4));
    return p * (a.derivative(x) / a(x) + 4.0 / x) / 3.0;
  };
  auto second = [a](double x) {
    if (x == 0.0) return 0.0;
    const double ax = a(x), d1 = a.derivative(x), d2 = a.second_derivative(x);
    const double p = std::cbrt(ax * std::pow(x, 4));
    const double g = (d1 / ax + 4.0 / x) / 3.0;
    const double gp = (d2 / ax - d1 * d1 / (ax * ax) - 4.0 / (x * x)) / 3.0;
    return p * (g * g + gp);
  };
  nlohmann::json desc = {{"kind", "aux_p"}, {"base", a.descriptor()}};
  return DegeneracyCoefficient("aux_p(" + a.label() + ")", value, deriv, second, std::move(desc));
}

DegeneracyCoefficient make_auxiliary_b(const DegeneracyCoefficient &a) {
  auto value = [a](double x) { return std::sqrt(a(x)) * x; };
  auto deriv = [a](double x) {
    if (x == 0.0) return 0.0;
    const double ax = a(x);
    return std::sqrt(ax) + x * a.derivative(x) / (2.0 * std::sqrt(ax));
  };
  auto second = [a](double x) {
    if (x == 0.0) return 0.0;
    const double ax = a(x), d1 = a.derivative(x), d2 = a.second_derivative(x);
    const double r = std::sqrt(ax);
    return d1 / r + x * (d2 / (2.0 * r) - d1 * d1 / (4.0 * ax * r));
  };
  nlohmann::json desc = {{"kind", "aux_b"}, {"base", a.descriptor()}};
  return DegeneracyCoefficient("aux_b(" + a.label() + ")", value, deriv, second, std::move(desc));
}

HypothesisReport classify(const DegeneracyCoefficient &coef, int grid_size, double zero_neighborhood) {
  if (grid_size < 64) throw std::invalid_argument("classify: grid_size must be >= 64");
  if (!(zero_neighborhood > 0.0 && zero_neighborhood <= 0.5))
    throw std::invalid_argument("classify: zero_neighborhood must lie in (0, 0.5]");

  HypothesisReport rep;
  rep.grid_size = grid_size;
  rep.neighborhood_radius = zero_neighborhood;

  if (std::abs(coef(0.0)) > 1e-14) {
    rep.positive = false;
    rep.notes.push_back("a(0) != 0");
  }

  const auto grid = log_grid(kClassifyGridMin, grid_size);
  std::vector<double> ratio(grid.size());
  bool finite = true;
  double prev_a = 0.0;
  double kmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const double ax = coef(x);
    if (!(ax > 0.0) || !std::isfinite(ax)) {
      if (rep.positive) {
        std::ostringstream os;
        os << "a(x) <= 0 at x = " << x;
        rep.notes.push_back(os.str());
      }
      rep.positive = false;
      ratio[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (ax < prev_a - 1e-12 * std::max(1.0, prev_a)) rep.nondecreasing = false;
    prev_a = ax;
    ratio[i] = x * coef.derivative(x) / ax;
    if (!std::isfinite(ratio[i])) {
      finite = false;
      continue;
    }
    kmax = std::max(kmax, ratio[i]);
  }
  if (!finite) rep.notes.push_back("non-finite x a'/a on grid");
  if (!rep.nondecreasing) rep.notes.push_back("a decreases on the grid");
  rep.k_est = kmax;

  const bool unit = std::abs(kmax - 1.0) <= kUnitBandTolerance;
  if (kmax >= 0.0 && kmax < 1.0 - kUnitBandTolerance) rep.k_band = Regime::WDC;
  else if (unit || (kmax > 1.0 && kmax < 2.0)) rep.k_band = Regime::SDC;
  else rep.k_band = Regime::Violation;

  if (!rep.positive || !finite || rep.k_band == Regime::Violation) {
    rep.regime = Regime::Violation;
    return rep;
  }
  if (rep.k_band == Regime::WDC) {
    rep.regime = Regime::WDC;
    return rep;
  }

  // Strong degeneracy: need theta with theta a <= x a' near zero.
  auto min_ratio_below = [&](double radius) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size() && grid[i] <= radius; ++i) m = std::min(m, ratio[i]);
    return m;
  };
  if (unit) {
    rep.boundary_case = true;
    const double m = min_ratio_below(zero_neighborhood);
    if (!(m > 0.0)) {
      rep.notes.push_back("x a'/a not bounded below by a positive theta near zero");
      rep.regime = Regime::Violation;
      return rep;
    }
    rep.theta_hyp = std::min(kBoundaryTheta, m);
    rep.regime = Regime::SDC;
    return rep;
  }
  for (double radius = zero_neighborhood; radius >= 1e-6; radius *= 0.5) {
    const double m = min_ratio_below(radius);
    if (m > 1.0) {
      rep.theta_hyp = std::min(m, kmax);
      rep.neighborhood_radius = radius;
      rep.regime = Regime::SDC;
      return rep;
    }
  }
  rep.notes.push_back("no theta in (1, K] with theta a <= x a' near zero");
  rep.regime = Regime::Violation;
  return rep;
}

MonotoneCheck monotone_ratio_check(const DegeneracyCoefficient &coef, double r, int grid_size, double tol) {
  MonotoneCheck out;
  const auto grid = log_grid(kClassifyGridMin, grid_size);
  const double bound = 1.0 / coef(1.0);
  double prev = -std::numeric_limits<double>::infinity();
  for (double x : grid) {
    const double ax = coef(x);
    const double f = std::pow(x, r) / ax;
    if (out.ok && f < prev - tol * std::max(1.0, std::abs(prev))) {
      out.ok = false;
      out.violating_x = x;
    }
    prev = f;
    if (x * x / ax > bound + tol * std::max(1.0, bound)) {
      out.x2_over_a_bounded = false;
      if (out.ok) {
        out.ok = false;
        out.violating_x = x;
      }
    }
  }
  return out;
}

MonotoneCheck power_quotient_check(const DegeneracyCoefficient &coef, double theta, bool nonincreasing,
                                   double radius, int grid_size, double tol) {
  MonotoneCheck out;
  const auto grid = log_grid(kClassifyGridMin, grid_size);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (double x : grid) {
    if (x > radius) break;
    const double f = coef(x) / std::pow(x, theta);
    if (!std::isnan(prev)) {
      const double slack = tol * std::max(1.0, std::abs(prev));
      const bool bad = nonincreasing ? (f > prev + slack) : (f < prev - slack);
      if (bad) {
        out.ok = false;
        out.violating_x = x;
        break;
      }
    }
    prev = f;
  }
  return out;
}

}  // namespace carleman
