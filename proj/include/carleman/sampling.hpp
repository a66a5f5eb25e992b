#ifndef CARLEMAN_SAMPLING_HPP
#define CARLEMAN_SAMPLING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "carleman/mesh.hpp"
#include "carleman/pde_solver.hpp"

namespace carleman {

/// Counter-based generator: every draw is a pure function of
/// (seed, sample, stream, index), so results do not depend on evaluation order.
///
/// bits = mix(seed ^ mix(sample ^ mix(stream ^ mix(index)))) where mix is the
/// SplitMix64 finalizer applied after adding the golden-ratio increment.
/// uniform = (bits >> 11 + 0.5) * 2^-53, normal = Box-Muller cosine branch on the
/// uniforms at indices 2k and 2k+1.
class CounterRng {
public:
  static constexpr const char *kName = "splitmix64-counter/box-muller";

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t bits(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const;
  double uniform(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const;
  double normal(std::uint64_t sample, std::uint64_t stream, std::uint64_t index) const;

private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent streams used by the experiments.
enum Stream : std::uint64_t {
  kStreamTerminal = 1,
  kStreamSource = 2,
  kStreamSourceSlope = 3,
  kStreamHardy = 4,
  kStreamInitial = 5,
  kStreamControl = 6,
  kStreamDirection = 7,
  kStreamPoints = 8,
};

inline constexpr int kDefaultModes = 16;

/// c_n ~ N(0, 1/n^2) for n = 1..modes.
std::vector<double> sine_coefficients(const CounterRng &rng, std::uint64_t sample, std::uint64_t stream,
                                      int modes = kDefaultModes);

/// sum_n c_n sin(n pi x) at the mesh nodes.
std::vector<double> sine_series(const Mesh &mesh, const std::vector<double> &coeffs);

/// Terminal data v_T (or initial data) as a random sine series.
std::vector<double> sample_sine_nodes(const Mesh &mesh, const CounterRng &rng, std::uint64_t sample,
                                      std::uint64_t stream, int modes = kDefaultModes);

/// Source F(t, x) = sum_n [c_n + d_n (2t/T - 1)] sin(n pi x) on the spec's grid.
SpaceTimeField sample_source(const ProblemSpec &spec, const CounterRng &rng, std::uint64_t sample,
                             int modes = kDefaultModes);

enum class QuarterWave { VanishAtZero, VanishAtOne };

/// Hardy test functions: sum_n c_n sin((n - 1/2) pi x) (w(0) = 0) or
/// sum_n c_n cos((n - 1/2) pi x) (w(1) = 0), c_n ~ N(0,1)/n^2.
std::vector<double> sample_quarter_wave(const Mesh &mesh, const CounterRng &rng, std::uint64_t sample,
                                        QuarterWave kind, int modes = kDefaultModes);

}  // namespace carleman

#endif
