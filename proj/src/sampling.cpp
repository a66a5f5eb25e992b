#include "carleman/sampling.hpp"

#include <cmath>
#include <numbers>

namespace carleman {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const {
  return splitmix64(seed_ ^ splitmix64(sample ^ splitmix64(stream ^ splitmix64(index))));
}

double CounterRng::uniform(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const {
  return (double(bits(sample, stream, index) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const {
  const double u1 = uniform(sample, stream, 2 * index);
  const double u2 = uniform(sample, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> sine_coefficients(const CounterRng &rng, std::uint64_t sample, std::uint64_t stream, int modes) {
  std::vector<double> c(modes);
  for (int n = 1; n <= modes; ++n) c[n - 1] = rng.normal(sample, stream, std::uint64_t(n)) / double(n);
  return c;
}

std::vector<double> sine_series(const Mesh &mesh, const std::vector<double> &coeffs) {
  std::vector<double> out(mesh.size(), 0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double x = mesh.node(i);
    double s = 0.0;
    for (std::size_t n = 0; n < coeffs.size(); ++n) s += coeffs[n] * std::sin(double(n + 1) * std::numbers::pi * x);
    out[i] = s;
  }
  out.front() = out.back() = 0.0;
  return out;
}

std::vector<double> sample_sine_nodes(const Mesh &mesh, const CounterRng &rng, std::uint64_t sample,
                                      std::uint64_t stream, int modes) {
  return sine_series(mesh, sine_coefficients(rng, sample, stream, modes));
}

SpaceTimeField sample_source(const ProblemSpec &spec, const CounterRng &rng, std::uint64_t sample, int modes) {
  const auto c = sine_series(spec.mesh, sine_coefficients(rng, sample, kStreamSource, modes));
  const auto d = sine_series(spec.mesh, sine_coefficients(rng, sample, kStreamSourceSlope, modes));
  const auto t = time_grid(spec.T, spec.time_steps);
  SpaceTimeField F(t.size(), spec.mesh.size());
  for (std::size_t m = 0; m < t.size(); ++m) {
    const double r = 2.0 * t[m] / spec.T - 1.0;
    for (std::size_t i = 0; i < spec.mesh.size(); ++i) F(m, i) = c[i] + d[i] * r;
  }
  return F;
}

std::vector<double> sample_quarter_wave(const Mesh &mesh, const CounterRng &rng, std::uint64_t sample,
                                        QuarterWave kind, int modes) {
  std::vector<double> c(modes);
  for (int n = 1; n <= modes; ++n) c[n - 1] = rng.normal(sample, kStreamHardy, std::uint64_t(n)) / double(n * n);
  std::vector<double> out(mesh.size(), 0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double x = mesh.node(i);
    double s = 0.0;
    for (int n = 1; n <= modes; ++n) {
      const double k = (double(n) - 0.5) * std::numbers::pi;
      s += c[n - 1] * (kind == QuarterWave::VanishAtZero ? std::sin(k * x) : std::cos(k * x));
    }
    out[i] = s;
  }
  if (kind == QuarterWave::VanishAtZero) out.front() = 0.0;
  else out.back() = 0.0;
  return out;
}

}  // namespace carleman
