#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <memory>

#include "carleman/sampling.hpp"
#include "carleman/weights.hpp"

using namespace carleman;

TEST_CASE("theta_time oracle values") {
  CHECK(eval_theta_time(0.5, 1.0) == doctest::Approx(256.0).epsilon(1e-15));
  CHECK(eval_theta_time(0.25, 1.0) == doctest::Approx(std::pow(1.0 / (0.25 * 0.75), 4)).epsilon(1e-15));
  CHECK(eval_theta_time(1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(eval_theta_time(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(eval_theta_time(1.0, 1.0), std::domain_error);
}

TEST_CASE("psi branches match closed forms for a power") {
  const double g = 0.5, ap = 0.4, bp = 0.6;
  const auto psi = build_psi(make_power_coefficient(g), ap, bp);
  for (double x : {0.05, 0.2, 0.39}) CHECK(psi.value(x) == doctest::Approx(std::pow(x, 2 - g) / (2 - g)).epsilon(1e-10));
  for (double x : {0.61, 0.8, 1.0})
    CHECK(psi.value(x) == doctest::Approx(-(std::pow(x, 2 - g) - std::pow(bp, 2 - g)) / (2 - g)).epsilon(1e-10));
  CHECK(psi.value(0.0) == 0.0);
}

TEST_CASE("psi is C2 across the bridge ends") {
  const CounterRng rng(11);
  for (int k = 0; k < 100; ++k) {
    const double g = 0.1 + 1.8 * rng.uniform(k, kStreamPoints, 0);
    if (std::abs(g - 1.0) < 1e-3) continue;
    const double ap = 0.2 + 0.3 * rng.uniform(k, kStreamPoints, 1);
    const double bp = ap + 0.05 + 0.3 * rng.uniform(k, kStreamPoints, 2);
    const auto psi = build_psi(make_power_coefficient(g), ap, bp);
    const auto l = psi.left_branch(ap);
    const auto bl = psi.bridge(ap);
    const auto r = psi.right_branch(bp);
    const auto br = psi.bridge(bp);
    for (int d = 0; d < 3; ++d) {
      CHECK(std::abs(l[d] - bl[d]) < 1e-6 * (1 + std::abs(l[2])));
      CHECK(std::abs(r[d] - br[d]) < 1e-6 * (1 + std::abs(r[2])));
    }
  }
}

TEST_CASE("psi maximum and drop") {
  const auto psi = build_psi(make_power_coefficient(1.5), 0.4, 0.6);
  const double xm = psi.argmax();
  CHECK(xm > 0.4);
  CHECK(xm < 0.6);
  for (int i = 0; i <= 200; ++i) CHECK(psi.value(i / 200.0) <= psi.max_value() + 1e-14);
  for (double x : {0.41, 0.5, 0.59, 0.8}) CHECK(psi.drop_from_max(x) == doctest::Approx(psi.value(x) - psi.max_value()).epsilon(1e-9));
  CHECK(psi.drop_from_max(xm) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("phi is negative and the weight vanishes at the time ends") {
  const auto psi = std::make_shared<const PsiFunction>(build_psi(make_power_coefficient(0.5), 0.4, 0.6));
  const CarlemanWeights w(psi, 2.0, 1.0);
  const CounterRng rng(3);
  for (std::size_t k = 0; k < 10000; ++k) {
    const double t = rng.uniform(k, kStreamPoints, 0), x = rng.uniform(k, kStreamPoints, 1);
    CHECK_MESSAGE(w.phi(t, x) < 0.0, "t=" << t << " x=" << x);
  }
  for (double x : {0.0, 0.3, 1.0}) {
    CHECK(eval_weight(w, 0.0, x, 1.0, 3.0) == 0.0);
    CHECK(eval_weight(w, 1.0, x, 1.0, 3.0) == 0.0);
  }
}

TEST_CASE("eval_weight against 50-digit arithmetic") {
  using mp = boost::multiprecision::cpp_dec_float_50;
  const auto psi = std::make_shared<const PsiFunction>(build_psi(make_power_coefficient(1.5), 0.4, 0.6));
  const double lambda = 2.0, T = 1.0;
  const CarlemanWeights w(psi, lambda, T);
  const mp S = psi->sup_norm();
  for (double t : {0.3, 0.5, 0.7})
    for (double x : {0.05, 0.45, 0.9})
      for (double s : {0.01, 0.1})
        for (double k : {0.0, 1.0, 3.0}) {
          const mp theta = 1 / boost::multiprecision::pow(mp(t) * (mp(T) - mp(t)), 4);
          const mp eta = exp(mp(lambda) * (S + mp(psi->value(x))));
          const mp phi = theta * (eta - exp(3 * mp(lambda) * S));
          const mp ref = exp(2 * mp(s) * phi) * boost::multiprecision::pow(theta * eta, mp(k));
          const double got = eval_weight(w, t, x, s, k);
          CHECK_MESSAGE(std::abs(got - ref.convert_to<double>()) <= 1e-11 * ref.convert_to<double>(),
                        "t=" << t << " x=" << x << " s=" << s << " k=" << k);
        }
}

TEST_CASE("weights serialize") {
  const nlohmann::json j = {{"lambda", 2.0}, {"T", 1.5}, {"alpha_prime", 0.4}, {"beta_prime", 0.6},
                            {"coefficient", {{"kind", "power"}, {"params", {{"gamma", 0.5}}}}}};
  const auto w = weights_from_json(j);
  CHECK(w.lambda() == 2.0);
  CHECK(w.T() == 1.5);
  const auto back = weights_from_json(w.to_json());
  CHECK(back.phi(0.7, 0.3) == w.phi(0.7, 0.3));
}
