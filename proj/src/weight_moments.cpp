#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "carleman/functionals.hpp"

namespace carleman {

namespace {

using Vec = std::array<double, 13>;  // 10 value moments, 3 gradient moments

constexpr std::array<double, 3> kGaussX{0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
constexpr std::array<double, 3> kGaussW{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

struct Rect {
  double t0, t1, x0, x1;
  std::uint32_t m, i;
};

// Points of a 3-point rule on [lo, hi] followed by those on each half.
std::array<double, 9> nine_points(double lo, double hi) {
  std::array<double, 9> p{};
  const double mid = 0.5 * (lo + hi);
  for (int j = 0; j < 3; ++j) {
    p[j] = lo + (hi - lo) * kGaussX[j];
    p[3 + j] = lo + (mid - lo) * kGaussX[j];
    p[6 + j] = mid + (hi - mid) * kGaussX[j];
  }
  return p;
}

struct ColumnData {
  std::array<double, 9> x, drop, a;  // drop = psi - max psi
};
struct RowData {
  std::array<double, 9> t, rel, log_theta;  // rel = theta / theta(T/2) - 1
};

// The exponent 2 s phi + k ln sigma - shift is evaluated relative to its value at
// (T/2, argmax psi): at large s both are ~1e15 and a direct difference is noise.
class Integrator {
public:
  Integrator(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s, double k,
             double log_shift)
      : mesh_(mesh), times_(times), w_(w), s_(s), k_(k) {
    lam_ = w.lambda();
    sup_ = w.psi().sup_norm();
    const double T = w.T();
    const auto tw = time_weight(0.5 * T, T);
    theta_star_ = tw.theta;
    log_theta_star_ = tw.log_theta;
    half_sq_ = 0.25 * T * T;
    eta_star_ = w.eta_from_psi(w.psi().max_value());
    gap_ = eta_star_ - std::exp(3.0 * lam_ * sup_);
    base_ = 2.0 * s * w.phi_max(0.5 * T) - log_shift;
  }

  ColumnData column(double x0, double x1) const {
    ColumnData c;
    c.x = nine_points(x0, x1);
    for (int j = 0; j < 9; ++j) {
      c.drop[j] = w_.psi().drop_from_max(c.x[j]);
      c.a[j] = w_.psi().coefficient()(c.x[j]);
    }
    return c;
  }

  RowData row(double t0, double t1) const {
    RowData r;
    r.t = nine_points(t0, t1);
    for (int j = 0; j < 9; ++j) {
      const double d = r.t[j] - 0.5 * w_.T();
      const double l = -4.0 * std::log1p(-d * d / half_sq_);
      r.rel[j] = std::expm1(l);
      r.log_theta[j] = log_theta_star_ + l;
    }
    return r;
  }

  double exponent(double rel, double log_theta, double drop) const {
    const double theta = theta_star_ * (1.0 + rel);
    double e = 2.0 * s_ * (theta * eta_star_ * std::expm1(lam_ * drop) + theta_star_ * rel * gap_) + base_;
    if (k_ != 0.0) e += k_ * (log_theta + lam_ * (sup_ + w_.psi().max_value() + drop));
    return e;
  }

  // Coarse (3x3 on the rectangle) and fine (3x3 on each quarter) moment estimates.
  std::pair<Vec, Vec> eval(const Rect &r, const ColumnData &col, const RowData &row) const {
    const double tm = times_[r.m], dt = times_[r.m + 1] - times_[r.m];
    const double xi0 = mesh_.node(r.i), h = mesh_.cell_length(r.i);
    Vec coarse{}, fine{};
    double wt[9], wx[9];
    for (int j = 0; j < 3; ++j) {
      wt[j] = kGaussW[j] * (r.t1 - r.t0);
      wt[3 + j] = wt[6 + j] = 0.5 * wt[j];
      wx[j] = kGaussW[j] * (r.x1 - r.x0);
      wx[3 + j] = wx[6 + j] = 0.5 * wx[j];
    }
    for (int p = 0; p < 9; ++p) {
      const double tau = (row.t[p] - tm) / dt;
      for (int q = 0; q < 9; ++q) {
        // coarse uses parent x parent points, fine uses half x half points
        const bool is_coarse = p < 3 && q < 3;
        const bool is_fine = p >= 3 && q >= 3;
        if (!is_coarse && !is_fine) continue;
        const double e = exponent(row.rel[p], row.log_theta[p], col.drop[q]);
        if (!(e >= kUnderflowExponent)) continue;
        const double W = std::exp(e) * wt[p] * wx[q];
        const double xi = (col.x[q] - xi0) / h;
        const double b[4] = {(1 - tau) * (1 - xi), (1 - tau) * xi, tau * (1 - xi), tau * xi};
        Vec &acc = is_coarse ? coarse : fine;
        int n = 0;
        for (int a = 0; a < 4; ++a)
          for (int c = a; c < 4; ++c) acc[n++] += W * b[a] * b[c];
        const double wa = W * col.a[q];
        acc[10] += wa * (1 - tau) * (1 - tau);
        acc[11] += wa * tau * (1 - tau);
        acc[12] += wa * tau * tau;
      }
    }
    return {coarse, fine};
  }

  std::pair<Vec, Vec> eval(const Rect &r) const { return eval(r, column(r.x0, r.x1), row(r.t0, r.t1)); }

private:
  const Mesh &mesh_;
  const std::vector<double> &times_;
  const CarlemanWeights &w_;
  double s_, k_;
  double lam_ = 0.0, sup_ = 0.0, theta_star_ = 0.0, log_theta_star_ = 0.0, half_sq_ = 0.0;
  double eta_star_ = 0.0, gap_ = 0.0, base_ = 0.0;
};

struct Piece {
  double err;
  Rect rect;
  Vec val;
  bool operator<(const Piece &o) const { return err < o.err; }
};

double scalar_error(const Vec &coarse, const Vec &fine) {
  // sum of the value moments is int W; gradient moments sum to int W a
  double dw = 0.0, dwa = 0.0;
  for (int j = 0; j < 10; ++j) dw += (j == 0 || j == 4 || j == 7 || j == 9 ? 1.0 : 2.0) * (fine[j] - coarse[j]);
  dwa = (fine[10] - coarse[10]) + 2.0 * (fine[11] - coarse[11]) + (fine[12] - coarse[12]);
  return std::abs(dw) + std::abs(dwa);
}

double scalar_value(const Vec &v) {
  double w = 0.0;
  for (int j = 0; j < 10; ++j) w += (j == 0 || j == 4 || j == 7 || j == 9 ? 1.0 : 2.0) * v[j];
  return std::abs(w) + std::abs(v[10] + 2.0 * v[11] + v[12]);
}

struct Peak {
  double t, x, width_t, width_x;
};

// Peaks of log weight: x at argmax psi for every t; t where theta balances
// 2 s (eta* - E) theta + k ln theta, or T/2.
std::vector<Peak> weight_peaks(const CarlemanWeights &w, double s, double k) {
  const double T = w.T(), lam = w.lambda(), S = w.psi().sup_norm();
  const double E = std::exp(3.0 * lam * S);
  const double xs = w.psi().argmax();
  const double eta = std::exp(lam * (S + w.psi().max_value()));
  const double theta_min = std::pow(0.25 * T * T, -4.0);
  std::vector<double> ts{0.5 * T};
  if (k > 0.0) {
    const double theta_opt = k / (2.0 * s * (E - eta));
    if (theta_opt > theta_min) {
      const double d = std::sqrt(std::max(0.25 * T * T - std::pow(theta_opt, -0.25), 0.0));
      ts = {0.5 * T - d, 0.5 * T + d};
    }
  }
  const double hx = 1e-4;
  const double d2psi = (w.psi().drop_from_max(xs + hx) + w.psi().drop_from_max(xs - hx)) / (hx * hx);
  std::vector<Peak> out;
  for (double t : ts) {
    if (!(t > 0.0 && t < T)) continue;
    const auto tw = time_weight(t, T);
    const double d2t = 2.0 * s * (eta - E) * tw.ddtheta +
                       k * (tw.ddtheta / tw.theta - (tw.dtheta / tw.theta) * (tw.dtheta / tw.theta));
    const double d2x = (2.0 * s * tw.theta * eta * lam + k * lam) * d2psi;
    out.push_back({t, xs, d2t < 0.0 ? 1.0 / std::sqrt(-d2t) : T, d2x < 0.0 ? 1.0 / std::sqrt(-d2x) : 1.0});
  }
  return out;
}

constexpr int kPeakSpan = 20;  // half-width of the pre-split box in units of width/2

std::vector<double> breaks(double lo, double hi, const std::vector<Peak> &peaks, bool in_time) {
  std::vector<double> b{lo, hi};
  for (const auto &pk : peaks) {
    const double c = in_time ? pk.t : pk.x;
    const double step = 0.5 * (in_time ? pk.width_t : pk.width_x);
    if (!(step < hi - lo)) continue;
    for (int j = -kPeakSpan; j <= kPeakSpan; ++j) {
      const double p = c + j * step;
      if (p > lo && p < hi) b.push_back(p);
    }
  }
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

}  // namespace

Interval region_interval(Region r, const Interval &omega, const Interval &omega_prime) {
  switch (r) {
    case Region::Q: return {0.0, 1.0};
    case Region::QOmega: return omega;
    case Region::QOmegaPrime: return omega_prime;
    case Region::LeftOfAlphaPrime: return {0.0, omega_prime.lo};
    case Region::RightOfBetaPrime: return {omega_prime.hi, 1.0};
  }
  return {0.0, 1.0};
}

WeightMoments weight_moments(const Mesh &mesh, const std::vector<double> &times, const CarlemanWeights &w, double s,
                             double k, double log_shift, const MomentOptions &options) {
  if (times.size() < 2) throw std::invalid_argument("weight_moments: need at least one time step");
  if (std::abs(times.back() - w.T()) > 1e-12 * w.T())
    throw std::invalid_argument("weight_moments: time grid and weights disagree on T");
  const std::size_t M = times.size() - 1, N = mesh.cells();
  WeightMoments out;
  out.steps = M;
  out.cells = N;
  out.log_shift = log_shift;
  std::vector<Vec> acc(M * N, Vec{});

  const Integrator integ(mesh, times, w, s, k, log_shift);
  const auto peaks = weight_peaks(w, s, k);

  std::vector<ColumnData> cols(N);
  std::vector<std::pair<double, double>> clip(N);
  for (std::size_t i = 0; i < N; ++i) {
    clip[i] = {std::max(mesh.node(i), options.x_lo), std::min(mesh.node(i + 1), options.x_hi)};
    if (clip[i].first < clip[i].second) cols[i] = integ.column(clip[i].first, clip[i].second);
  }

  std::vector<Piece> heap;
  heap.reserve(M * N);
  double total_err = 0.0;
  auto push = [&](const Rect &r, const std::pair<Vec, Vec> &cf) {
    Vec &a = acc[std::size_t(r.m) * N + r.i];
    for (int j = 0; j < 13; ++j) a[j] += cf.second[j];
    const double e = scalar_error(cf.first, cf.second);
    total_err += e;
    heap.push_back({e, r, cf.second});
  };

  for (std::size_t m = 0; m < M; ++m) {
    const auto rd = integ.row(times[m], times[m + 1]);
    const auto tb = breaks(times[m], times[m + 1], peaks, true);
    for (std::size_t i = 0; i < N; ++i) {
      const auto [x0, x1] = clip[i];
      if (!(x0 < x1)) continue;
      const auto xb = breaks(x0, x1, peaks, false);
      if (tb.size() == 2 && xb.size() == 2) {
        const Rect r{times[m], times[m + 1], x0, x1, std::uint32_t(m), std::uint32_t(i)};
        push(r, integ.eval(r, cols[i], rd));
        continue;
      }
      for (std::size_t a = 0; a + 1 < tb.size(); ++a)
        for (std::size_t b = 0; b + 1 < xb.size(); ++b) {
          const Rect r{tb[a], tb[a + 1], xb[b], xb[b + 1], std::uint32_t(m), std::uint32_t(i)};
          push(r, integ.eval(r));
        }
    }
  }
  std::make_heap(heap.begin(), heap.end());

  auto total_value = [&]() {
    double v = 0.0;
    for (const auto &a : acc) v += scalar_value(a);
    return v;
  };
  double total = total_value();
  std::size_t since_resum = 0;
  while (!heap.empty() && total_err > options.rtol * total) {
    if (heap.size() >= options.max_regions) {
      out.converged = false;
      break;
    }
    std::pop_heap(heap.begin(), heap.end());
    const Piece reg = heap.back();
    heap.pop_back();
    total_err -= reg.err;
    Vec &a = acc[std::size_t(reg.rect.m) * N + reg.rect.i];
    for (int j = 0; j < 13; ++j) a[j] -= reg.val[j];
    const double tm = 0.5 * (reg.rect.t0 + reg.rect.t1), xm = 0.5 * (reg.rect.x0 + reg.rect.x1);
    const Rect kids[4] = {{reg.rect.t0, tm, reg.rect.x0, xm, reg.rect.m, reg.rect.i},
                          {reg.rect.t0, tm, xm, reg.rect.x1, reg.rect.m, reg.rect.i},
                          {tm, reg.rect.t1, reg.rect.x0, xm, reg.rect.m, reg.rect.i},
                          {tm, reg.rect.t1, xm, reg.rect.x1, reg.rect.m, reg.rect.i}};
    for (const auto &kid : kids) {
      push(kid, integ.eval(kid));
      std::push_heap(heap.begin(), heap.end());
    }
    if (++since_resum == 4096) {
      since_resum = 0;
      total = total_value();
      total_err = 0.0;
      for (const auto &r : heap) total_err += r.err;
    }
  }
  out.regions = heap.size();

  if (options.values) out.values.resize(M * N);
  if (options.gradient) out.gradient.resize(M * N);
  for (std::size_t c = 0; c < M * N; ++c) {
    if (options.values) std::copy_n(acc[c].begin(), 10, out.values[c].begin());
    if (options.gradient) std::copy_n(acc[c].begin() + 10, 3, out.gradient[c].begin());
  }
  return out;
}

double moment_integral(const WeightMoments &mom, const Mesh &mesh, const SpaceTimeField &field, Integrand integrand) {
  if (field.levels() != mom.steps + 1 || field.nodes() != mom.cells + 1)
    throw std::invalid_argument("moment_integral: field shape does not match the moments");
  const std::size_t N = mom.cells;
  double total = 0.0;
  if (integrand == Integrand::AVxSq) {
    if (mom.gradient.empty()) throw std::invalid_argument("moment_integral: gradient moments not computed");
    for (std::size_t m = 0; m < mom.steps; ++m)
      for (std::size_t i = 0; i < N; ++i) {
        const auto &g = mom.gradient[m * N + i];
        const double h = mesh.cell_length(i);
        const double d0 = (field(m, i + 1) - field(m, i)) / h, d1 = (field(m + 1, i + 1) - field(m + 1, i)) / h;
        total += g[0] * d0 * d0 + 2.0 * g[1] * d0 * d1 + g[2] * d1 * d1;
      }
    return total;
  }
  if (mom.values.empty()) throw std::invalid_argument("moment_integral: value moments not computed");
  for (std::size_t m = 0; m < mom.steps; ++m)
    for (std::size_t i = 0; i < N; ++i) {
      const auto &mv = mom.values[m * N + i];
      const double v[4] = {field(m, i), field(m, i + 1), field(m + 1, i), field(m + 1, i + 1)};
      int n = 0;
      for (int a = 0; a < 4; ++a)
        for (int c = a; c < 4; ++c) total += (a == c ? 1.0 : 2.0) * mv[n++] * v[a] * v[c];
    }
  return total;
}

}  // namespace carleman
