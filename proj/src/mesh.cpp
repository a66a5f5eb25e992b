#include "carleman/mesh.hpp"

#include <cmath>
#include <stdexcept>

namespace carleman {

Mesh::Mesh(std::vector<double> nodes, double grading_exponent)
    : nodes_(std::move(nodes)), grading_(grading_exponent) {
  if (nodes_.size() < 3) throw std::invalid_argument("Mesh: need at least two cells");
  if (nodes_.front() != 0.0 || nodes_.back() != 1.0) throw std::invalid_argument("Mesh: nodes must span [0,1]");
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    if (!(nodes_[i] > nodes_[i - 1])) throw std::invalid_argument("Mesh: nodes must be strictly increasing");
  faces_.resize(nodes_.size() - 1);
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) faces_[i] = 0.5 * (nodes_[i] + nodes_[i + 1]);
  weights_.assign(nodes_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    const double h = nodes_[i + 1] - nodes_[i];
    weights_[i] += 0.5 * h;
    weights_[i + 1] += 0.5 * h;
  }
}

Mesh build_mesh(std::size_t N, double grading_exponent) {
  if (N < 2) throw std::invalid_argument("build_mesh: N must be >= 2");
  if (!(grading_exponent >= 1.0 && grading_exponent <= 4.0))
    throw std::invalid_argument("build_mesh: grading exponent must lie in [1, 4]");
  std::vector<double> x(N + 1);
  for (std::size_t i = 0; i <= N; ++i) x[i] = std::pow(double(i) / double(N), grading_exponent);
  x.front() = 0.0;
  x.back() = 1.0;
  return Mesh(std::move(x), grading_exponent);
}

std::vector<double> time_grid(double T, std::size_t M) {
  std::vector<double> t(M + 1);
  for (std::size_t m = 0; m <= M; ++m) t[m] = T * double(m) / double(M);
  t.back() = T;
  return t;
}

std::vector<double> time_weights(double T, std::size_t M) {
  const double dt = T / double(M);
  std::vector<double> w(M + 1, dt);
  w.front() = w.back() = 0.5 * dt;
  return w;
}

}  // namespace carleman
