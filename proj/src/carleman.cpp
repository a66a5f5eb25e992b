#include "carleman/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "carleman/parallel.hpp"
#include "carleman/sampling.hpp"

namespace carleman {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct PointTables {
  WeightMoments k1, k53, k2, k0, k3;
  double shift = 0.0;
};

PointTables build_tables(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s,
                         const Interval &omega) {
  const double shift = carleman_log_shift(w, s);
  MomentOptions grad;
  grad.values = false;
  grad.gradient = true;
  MomentOptions local;
  local.x_lo = omega.lo;
  local.x_hi = omega.hi;
  return {weight_moments(mesh, times, w, s, 1.0, shift, grad),
          weight_moments(mesh, times, w, s, 5.0 / 3.0, shift),
          weight_moments(mesh, times, w, s, 2.0, shift),
          weight_moments(mesh, times, w, s, 0.0, shift),
          weight_moments(mesh, times, w, s, 3.0, shift, local),
          shift};
}

CarlemanReport evaluate(const PointTables &tab, const Trajectory &v, const SpaceTimeField &F,
                        const CarlemanParams &p) {
  const auto &mesh = v.mesh;
  const double sl = p.s * p.lambda;
  CarlemanReport r;
  r.params = p;
  r.log_scale = tab.shift;
  r.lhs_grad = sl * moment_integral(tab.k1, mesh, v.values, Integrand::AVxSq);
  r.lhs_zero = std::pow(sl, 5.0 / 3.0) * moment_integral(tab.k53, mesh, v.values, Integrand::VSq);
  r.lhs_zero_beta2 = sl * sl * moment_integral(tab.k2, mesh, v.values, Integrand::VSq);
  r.rhs_source = F.empty() ? 0.0 : moment_integral(tab.k0, mesh, F, Integrand::SourceSq);
  r.rhs_local = sl * sl * sl * moment_integral(tab.k3, mesh, v.values, Integrand::VSq);
  const double den = r.rhs_source + r.rhs_local;
  if (!(den >= kDegenerateDenominator)) {
    r.degenerate = true;
    r.ratio = r.ratio_beta2 = kNaN;
  } else {
    r.ratio = (r.lhs_grad + r.lhs_zero) / den;
    r.ratio_beta2 = (r.lhs_grad + r.lhs_zero_beta2) / den;
  }
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

nlohmann::json to_json(const CarlemanReport &r) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  return {{"sample", r.sample_id},         {"s", r.params.s},
          {"lambda", r.params.lambda},     {"lhs_grad", r.lhs_grad},
          {"lhs_zero", r.lhs_zero},        {"rhs_source", r.rhs_source},
          {"rhs_local", r.rhs_local},      {"ratio", num(r.ratio)},
          {"lhs_zero_beta2", r.lhs_zero_beta2}, {"ratio_beta2", num(r.ratio_beta2)},
          {"log_scale", r.log_scale},      {"degenerate", r.degenerate}};
}

double carleman_log_shift(const CarlemanWeights &w, double s) { return 2.0 * s * w.phi_max(0.5 * w.T()); }

CarlemanReport carleman_terms(const Trajectory &v, const SpaceTimeField &F, const CarlemanWeights &w,
                              const CarlemanParams &params, const Interval &omega) {
  if (std::abs(w.lambda() - params.lambda) > 1e-14 * params.lambda)
    throw std::invalid_argument("carleman_terms: weights built for a different lambda");
  return evaluate(build_tables(v.mesh, v.times, w, params.s, omega), v, F, params);
}

CarlemanReport carleman_sides(const ProblemSpec &spec, std::span<const double> vT, const SpaceTimeField &F,
                              const CarlemanWeights &w, const CarlemanParams &params, std::size_t sample_id) {
  if (std::abs(w.T() - spec.T) > 1e-12 * spec.T)
    throw std::invalid_argument("carleman_sides: weights built for a different T");
  const auto v = solve_adjoint(spec, vT, F);
  auto r = carleman_terms(v, F, w, params, spec.omega);
  r.sample_id = sample_id;
  return r;
}

double default_s0(const PsiFunction &psi, double T, double lambda) {
  return 2.0 * std::max(1.0, T * T) * std::exp(2.0 * lambda * psi.sup_norm());
}

std::vector<SweepPoint> default_sweep_points(const PsiFunction &psi, double T, const std::vector<double> &lambdas,
                                             int doublings, double lambda0) {
  std::vector<SweepPoint> pts;
  for (double lam : lambdas) {
    const double s0 = default_s0(psi, T, lam);
    for (int j = 0; j <= doublings; ++j) pts.push_back({s0 * std::ldexp(1.0, j), lam, lam >= lambda0});
  }
  return pts;
}

SweepResult carleman_sweep(const ProblemSpec &spec, std::shared_ptr<const PsiFunction> psi, const SweepConfig &cfg) {
  if (cfg.n_samples < 1) throw std::invalid_argument("carleman_sweep: n_samples must be >= 1");
  if (cfg.points.empty()) throw std::invalid_argument("carleman_sweep: empty (s, lambda) grid");
  const CounterRng rng(cfg.seed);
  const std::size_t S = cfg.n_samples, P = cfg.points.size();

  std::vector<std::optional<Trajectory>> trajs(S);
  std::vector<SpaceTimeField> sources(S);
  parallel_for(S, cfg.jobs, [&](std::size_t k) {
    const auto vT = sample_sine_nodes(spec.mesh, rng, k, kStreamTerminal);
    sources[k] = cfg.with_source ? sample_source(spec, rng, k)
                                 : SpaceTimeField(spec.time_steps + 1, spec.mesh.size());
    trajs[k] = solve_adjoint(spec, vT, sources[k]);
  });

  SweepResult out;
  out.reports.resize(S * P);
  parallel_for(P, cfg.jobs, [&](std::size_t p) {
    const auto &pt = cfg.points[p];
    const CarlemanWeights w(psi, pt.lambda, spec.T);
    const auto tables = build_tables(spec.mesh, trajs.front()->times, w, pt.s, spec.omega);
    for (std::size_t k = 0; k < S; ++k) {
      auto r = evaluate(tables, *trajs[k], sources[k], {pt.s, pt.lambda});
      r.sample_id = k;
      out.reports[k * P + p] = r;
    }
  });

  for (std::size_t p = 0; p < P; ++p) {
    SweepSummary row;
    row.s = cfg.points[p].s;
    row.lambda = cfg.points[p].lambda;
    row.stable = cfg.points[p].stable;
    std::vector<double> ratios;
    for (std::size_t k = 0; k < S; ++k) {
      const auto &r = out.reports[k * P + p];
      if (r.degenerate) {
        ++row.excluded;
        continue;
      }
      if (!std::isfinite(r.ratio) || !std::isfinite(r.ratio_beta2)) out.all_finite = false;
      ratios.push_back(r.ratio);
      row.max_ratio = std::max(row.max_ratio, r.ratio);
      row.max_ratio_beta2 = std::max(row.max_ratio_beta2, r.ratio_beta2);
    }
    row.count = ratios.size();
    row.median_ratio = median(ratios);
    out.excluded_count += row.excluded;
    if (row.stable) {
      out.empirical_C = std::max(out.empirical_C, row.max_ratio);
      out.empirical_C_beta2 = std::max(out.empirical_C_beta2, row.max_ratio_beta2);
    }
    out.summary.push_back(row);
  }
  return out;
}

WTransform transform_to_w(const Trajectory &v, const CarlemanWeights &weights, const CarlemanParams &params,
                          BoundaryCondition bc) {
  const auto &mesh = v.mesh;
  const std::size_t L = v.values.levels(), n = mesh.size();
  const double s = params.s, lam = weights.lambda(), T = weights.T();
  const double big_e = std::exp(3.0 * lam * weights.psi().sup_norm());
  WTransform out{SpaceTimeField(L, n), SpaceTimeField(L, n), SpaceTimeField(L, n), mesh, v.times};

  std::vector<PsiLocal> loc(n);
  for (std::size_t i = 0; i < n; ++i) loc[i] = weights.psi().local(mesh.node(i));
  for (std::size_t m = 0; m < L; ++m)
    for (std::size_t i = 0; i < n; ++i) {
      const double e = s * weights.phi_from_psi(v.times[m], loc[i].psi);
      out.w(m, i) = e >= kUnderflowExponent ? std::exp(e) * v.values(m, i) : 0.0;
    }

  const auto op = assemble_diffusion(weights.psi().coefficient(), mesh, bc);
  std::vector<double> aw(n), wx(n);
  for (std::size_t m = 1; m + 1 < L; ++m) {
    const double t = v.times[m];
    const auto tw = time_weight(t, T);
    const auto w = out.w.row(m);
    op.apply(w, aw);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == n ? i : i + 1;
      wx[i] = (w[hi] - w[lo]) / (mesh.node(hi) - mesh.node(lo));
    }
    for (std::size_t i = op.first; i <= op.last; ++i) {
      const auto &p = loc[i];
      const double eta = weights.eta_from_psi(p.psi);
      const double phi_t = tw.dtheta * (eta - big_e);
      const double c = lam * tw.theta * eta;  // a phi_x = c q
      const double wt = (out.w(m + 1, i) - out.w(m - 1, i)) / (v.times[m + 1] - v.times[m - 1]);
      out.lplus(m, i) = -s * phi_t * w[i] + s * s * c * c * p.q2_over_a * w[i] - aw[i];
      out.lminus(m, i) = wt - s * c * (lam * p.q2_over_a + p.dq) * w[i] - 2.0 * s * c * p.q * wx[i];
    }
  }
  return out;
}

SpaceTimeField transform_from_w(const WTransform &wt, const CarlemanWeights &weights, const CarlemanParams &params) {
  SpaceTimeField v(wt.w.levels(), wt.w.nodes());
  std::vector<double> psi(wt.mesh.size());
  for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = weights.psi().value(wt.mesh.node(i));
  for (std::size_t m = 0; m < v.levels(); ++m)
    for (std::size_t i = 0; i < v.nodes(); ++i) {
      const double e = params.s * weights.phi_from_psi(wt.times[m], psi[i]);
      if (e >= kUnderflowExponent) v(m, i) = std::exp(-e) * wt.w(m, i);
    }
  return v;
}

ManufacturedField manufactured_product(std::string label, BoundaryCondition bc, double T,
                                       std::function<std::array<double, 3>(double)> profile) {
  ManufacturedField f;
  f.label = std::move(label);
  f.bc = bc;
  f.T = T;
  f.eval = [T, profile = std::move(profile)](double t, double x) -> std::array<double, 4> {
    const double scale = 4.0 / (T * T);
    const double g1 = scale * t * (T - t);
    const double g = std::pow(g1, 8);
    const double dg = 8.0 * std::pow(g1, 7) * scale * (T - 2.0 * t);
    const auto p = profile(x);
    return {g * p[0], dg * p[0], g * p[1], g * p[2]};
  };
  return f;
}

std::vector<ManufacturedField> manufactured_suite(BoundaryCondition bc, double T) {
  using std::numbers::pi;
  std::vector<ManufacturedField> out;
  if (bc == BoundaryCondition::DirichletZero) {
    out.push_back(manufactured_product("sin(pi x)", bc, T, [](double x) -> std::array<double, 3> {
      return {std::sin(pi * x), pi * std::cos(pi * x), -pi * pi * std::sin(pi * x)};
    }));
    out.push_back(manufactured_product("x(1-x)", bc, T, [](double x) -> std::array<double, 3> {
      return {x * (1.0 - x), 1.0 - 2.0 * x, -2.0};
    }));
    out.push_back(manufactured_product("sin(2 pi x)", bc, T, [](double x) -> std::array<double, 3> {
      return {std::sin(2 * pi * x), 2 * pi * std::cos(2 * pi * x), -4 * pi * pi * std::sin(2 * pi * x)};
    }));
  } else {
    out.push_back(manufactured_product("cos(pi x / 2)", bc, T, [](double x) -> std::array<double, 3> {
      const double k = 0.5 * pi;
      return {std::cos(k * x), -k * std::sin(k * x), -k * k * std::cos(k * x)};
    }));
    out.push_back(manufactured_product("1-x^2", bc, T, [](double x) -> std::array<double, 3> {
      return {1.0 - x * x, -2.0 * x, -2.0};
    }));
    out.push_back(manufactured_product("(1-x)^2(1+2x)", bc, T, [](double x) -> std::array<double, 3> {
      return {(1.0 - x) * (1.0 - x) * (1.0 + 2.0 * x), 6.0 * x * (x - 1.0), 12.0 * x - 6.0};
    }));
  }
  return out;
}

namespace {

struct Rule {
  std::vector<double> nodes;    // on [0,1]
  std::vector<double> weights;  // sum to 1
};

Rule make_rule(QuadratureRule rule) {
  if (rule == QuadratureRule::Midpoint) return {{0.5}, {1.0}};
  const double g = std::sqrt(0.6);
  return {{0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
}

void check_preconditions(const ManufacturedField &w, double T) {
  constexpr double kTol = 1e-12;
  for (int j = 0; j <= 8; ++j) {
    const double x = j / 8.0, t = T * j / 8.0;
    if (std::abs(w.eval(0.0, x)[0]) > kTol || std::abs(w.eval(T, x)[0]) > kTol)
      throw std::invalid_argument("lemma32: w must vanish at t = 0 and t = T");
    if (std::abs(w.eval(t, 1.0)[0]) > kTol) throw std::invalid_argument("lemma32: w must vanish at x = 1");
    if (w.bc == BoundaryCondition::DirichletZero && std::abs(w.eval(t, 0.0)[0]) > kTol)
      throw std::invalid_argument("lemma32: Dirichlet regime needs w(t,0) = 0");
    if (!std::isfinite(w.eval(t, 0.0)[2])) throw std::invalid_argument("lemma32: w_x must stay bounded at x = 0");
  }
}

}  // namespace

Lemma32Result lemma32_identity(const ManufacturedField &wf, const CarlemanWeights &weights,
                               const CarlemanParams &params, std::size_t N, std::size_t M, QuadratureRule rule,
                               double grading) {
  const double T = weights.T();
  if (std::abs(wf.T - T) > 1e-12 * T) throw std::invalid_argument("lemma32: field and weights disagree on T");
  if (std::abs(weights.lambda() - params.lambda) > 1e-14 * params.lambda)
    throw std::invalid_argument("lemma32: weights built for a different lambda");
  check_preconditions(wf, T);
  const double s = params.s, lam = params.lambda;
  const double big_e = std::exp(3.0 * lam * weights.psi().sup_norm());
  const auto &coef = weights.psi().coefficient();
  const auto q = make_rule(rule);
  const auto mesh = build_mesh(N, grading);

  struct XPoint {
    double x, wgt, eta, da;
    PsiLocal p;
  };
  // psi''' jumps at alpha' and beta', so both are made cell boundaries
  std::vector<double> breaks = mesh.nodes();
  breaks.push_back(weights.psi().alpha_prime());
  breaks.push_back(weights.psi().beta_prime());
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<XPoint> xs;
  for (std::size_t c = 0; c + 1 < breaks.size(); ++c)
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      const double h = breaks[c + 1] - breaks[c];
      const double x = breaks[c] + q.nodes[k] * h;
      const auto p = weights.psi().local(x);
      xs.push_back({x, q.weights[k] * h, weights.eta_from_psi(p.psi), coef.derivative(x), p});
    }
  const auto right = weights.psi().local(1.0);
  const double eta1 = weights.eta_from_psi(right.psi);

  Lemma32Result res;
  const double dt = T / double(M);
  for (std::size_t j = 0; j < M; ++j)
    for (std::size_t kt = 0; kt < q.nodes.size(); ++kt) {
      const double t = (double(j) + q.nodes[kt]) * dt;
      const double tw_q = q.weights[kt] * dt;
      const auto tw = time_weight(t, T);
      const double th = tw.theta;
      for (const auto &pt : xs) {
        const auto &p = pt.p;
        const auto f = wf.eval(t, pt.x);  // w, w_t, w_x, w_xx
        const double eta = pt.eta;
        const double c = lam * th * eta;  // a phi_x = c q
        const double phi_t = tw.dtheta * (eta - big_e);
        const double phi_tt = tw.ddtheta * (eta - big_e);
        const double div = lam * p.q2_over_a + p.dq;  // (a phi_x)_x = c div
        const double lplus = -s * phi_t * f[0] + s * s * c * c * p.q2_over_a * f[0] + pt.da * f[2] + p.a * f[3];
        const double lminus = f[1] - s * c * div * f[0] - 2.0 * s * c * p.q * f[2];
        const double wq = tw_q * pt.wgt;
        res.inner_product += wq * lplus * lminus;
        const double w2 = f[0] * f[0], wx2 = f[2] * f[2];
        res.terms[0] += wq * 0.5 * s * phi_tt * w2;
        res.terms[1] += wq * (-2.0 * s * s * lam * lam * th * tw.dtheta * eta * eta * p.q2_over_a * w2);
        res.terms[2] += wq * s * s * s * c * c * c * (2.0 * lam * p.q4_over_a2 + p.q_dq2a) * w2;
        res.terms[3] += wq * s * c * (lam * p.q * div + lam * p.a_dq2a + p.a * p.ddq) * f[0] * f[2];
        res.terms[4] += wq * 2.0 * s * c * div * p.a * wx2;
        res.terms[5] += wq * (-s * c * p.q_da * wx2);
      }
      // boundary term; the x = 0 end vanishes since a q -> 0 there
      const double wx1 = wf.eval(t, 1.0)[2];
      res.terms[6] += tw_q * (-s * lam * th * eta1 * right.a * right.q * wx1 * wx1);
    }
  double mag = 0.0;
  for (double v : res.terms) {
    res.expansion += v;
    mag += std::abs(v);
  }
  res.residual = std::abs(res.inner_product - res.expansion) / (mag + 1.0);
  return res;
}

double lemma32_identity_residual(const ManufacturedField &w, const CarlemanWeights &weights,
                                 const CarlemanParams &params, std::size_t N, std::size_t M) {
  return lemma32_identity(w, weights, params, N, M).residual;
}

std::array<double, 2> lemma33_boundary_parts(const WTransform &wt, const CarlemanWeights &weights,
                                             const CarlemanParams &params) {
  const auto &mesh = wt.mesh;
  const std::size_t n = mesh.size(), M = wt.w.levels() - 1;
  const double T = weights.T(), lam = weights.lambda(), s = params.s;
  const auto tau = time_weights(T, M);
  const auto right = weights.psi().local(1.0);
  const auto left = weights.psi().local(mesh.face(0));
  const double eta1 = weights.eta_from_psi(right.psi), eta0 = weights.eta_from_psi(left.psi);
  std::array<double, 2> parts{0.0, 0.0};
  for (std::size_t m = 1; m < M; ++m) {
    const double th = time_weight(wt.times[m], T).theta;
    const double wx1 = (wt.w(m, n - 1) - wt.w(m, n - 2)) / mesh.cell_length(n - 2);
    const double wx0 = (wt.w(m, 1) - wt.w(m, 0)) / mesh.cell_length(0);
    parts[0] -= tau[m] * s * lam * th * eta1 * right.a * right.q * wx1 * wx1;
    parts[1] += tau[m] * s * lam * th * eta0 * left.a * left.q * wx0 * wx0;
  }
  return parts;
}

double lemma33_boundary_sign(const WTransform &wt, const CarlemanWeights &weights, const CarlemanParams &params) {
  const auto p = lemma33_boundary_parts(wt, weights, params);
  return p[0] + p[1];
}

double observability_sample_ratio(const ProblemSpec &spec, std::span<const double> vT) {
  const auto v = solve_adjoint(spec, vT);
  const auto v0 = v.values.row(0);
  const double num = inner(spec.mesh, v0, v0);
  const double den = spacetime_inner(spec.mesh, spec.T, v.values, v.values, omega_mask(spec.mesh, spec.omega));
  if (!(den >= kDegenerateDenominator)) return kNaN;
  return num / den;
}

ObservabilityReport observability_ratio(const ProblemSpec &spec, std::size_t n_samples, std::uint64_t seed) {
  const CounterRng rng(seed);
  ObservabilityReport rep;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double r = observability_sample_ratio(spec, sample_sine_nodes(spec.mesh, rng, k, kStreamTerminal));
    if (std::isnan(r)) {
      ++rep.excluded;
      continue;
    }
    rep.ratios.push_back(r);
    rep.constant = std::max(rep.constant, r);
  }
  return rep;
}

}  // namespace carleman
