#include <doctest.h>

#include <cmath>

#include "carleman/coefficients.hpp"

using namespace carleman;
using nlohmann::json;

TEST_CASE("power coefficient values and regime") {
  const auto a = make_power_coefficient(0.125);
  CHECK(a(0.0) == 0.0);
  CHECK(a(1.0) == doctest::Approx(1.0));
  CHECK(a(0.5) == doctest::Approx(std::pow(0.5, 0.125)).epsilon(1e-15));
  const auto rep = classify(a);
  CHECK(rep.regime == Regime::WDC);
  CHECK(rep.k_est == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("regime bands") {
  CHECK(classify(make_power_coefficient(0.5)).regime == Regime::WDC);
  CHECK(classify(make_power_coefficient(0.5)).k_est == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(classify(make_power_coefficient(1.5)).regime == Regime::SDC);

  const auto unit = classify(make_power_coefficient(1.0));
  CHECK(unit.boundary_case);
  CHECK(unit.regime == Regime::SDC);
  REQUIRE(unit.theta_hyp.has_value());
  CHECK(*unit.theta_hyp == doctest::Approx(kBoundaryTheta));
}

TEST_CASE("a(1) = 0 is a hypothesis violation") {
  const auto a = coefficient_from_json(json{{"kind", "power_minus_x"}, {"params", {{"theta", 0.5}}}});
  CHECK(classify(a).regime == Regime::Violation);
}

TEST_CASE("json descriptors round trip") {
  for (const json &j : {json{{"kind", "power"}, {"params", {{"gamma", 0.7}}}},
                        json{{"kind", "power_cos"}, {"params", {{"gamma", 0.5}, {"alpha", 1.0}}}},
                        json{{"kind", "power_plus_x"}, {"params", {{"theta", 1.5}}}}}) {
    const auto a = coefficient_from_json(j);
    const auto b = coefficient_from_json(a.descriptor());
    for (double x : {0.1, 0.4, 0.9}) CHECK(a(x) == b(x));
  }
  CHECK_THROWS_AS(coefficient_from_json(json{{"kind", "nope"}}), std::invalid_argument);
  CHECK_THROWS_AS(coefficient_from_json(json{{"kind", "power"}, {"params", {{"gamma", 2.5}}}}),
                  std::invalid_argument);
}

TEST_CASE("table coefficient reproduces its nodes and stays monotone") {
  std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0}, a;
  for (double xi : x) a.push_back(std::sqrt(xi));
  const auto c = make_table_coefficient(x, a);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(c(x[i]) == doctest::Approx(a[i]).epsilon(1e-14));
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = c(i / 1000.0);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}

TEST_CASE("auxiliary functions") {
  const auto a = make_power_coefficient(1.0);
  const auto p = make_auxiliary_p(a);
  const auto b = make_auxiliary_b(a);
  for (double x : {0.2, 0.7}) {
    CHECK(p(x) == doctest::Approx(std::cbrt(x * std::pow(x, 4))).epsilon(1e-13));
    CHECK(b(x) == doctest::Approx(std::sqrt(x) * x).epsilon(1e-13));
  }
}
