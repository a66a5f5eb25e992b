#ifndef CARLEMAN_MESH_HPP
#define CARLEMAN_MESH_HPP

#include <cstddef>
#include <vector>

namespace carleman {

/// Nodes 0 = x_0 < ... < x_N = 1 with cell faces at the midpoints.
class Mesh {
public:
  explicit Mesh(std::vector<double> nodes, double grading_exponent = 1.0);

  std::size_t cells() const { return nodes_.size() - 1; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double> &nodes() const { return nodes_; }
  const std::vector<double> &faces() const { return faces_; }
  double node(std::size_t i) const { return nodes_[i]; }
  double face(std::size_t i) const { return faces_[i]; }  // x_{i+1/2}
  double cell_length(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
  /// Trapezoid weight of node i (half the two adjacent cells).
  double node_weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double> &node_weights() const { return weights_; }
  double grading_exponent() const { return grading_; }

private:
  std::vector<double> nodes_;
  std::vector<double> faces_;
  std::vector<double> weights_;
  double grading_;
};

/// x_i = (i/N)^p, clustering nodes at the degenerate endpoint for p > 1.
Mesh build_mesh(std::size_t N, double grading_exponent = 2.0);

/// t_m = m T / M.
std::vector<double> time_grid(double T, std::size_t M);

/// Trapezoid weights of a uniform time grid.
std::vector<double> time_weights(double T, std::size_t M);

}  // namespace carleman

#endif
