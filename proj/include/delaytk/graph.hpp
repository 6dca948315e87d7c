// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace delaytk {

// Undirected simple edge, 0-indexed, always i < j.
struct Edge {
  int i;
  int j;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Connected undirected simple graph with nonsingular adjacency matrix.
// Immutable once built; every constructor path runs the same validation.
class Graph {
 public:
  static Graph cycle(int n);
  static Graph path(int n);
  // Pairs are 1-indexed, as in edge-list files.
  static Graph from_edge_list(int n, std::span<const std::pair<int, int>> pairs);
  // G(n, p) sampled until connected with nonsingular adjacency.
  static Graph random(int n, double p, std::uint64_t seed);

  int size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  Eigen::MatrixXi adjacency() const;
  Eigen::VectorXi degrees() const;
  std::vector<int> neighbors(int i) const;

 private:
  Graph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {}
  static Graph validated(int n, std::vector<Edge> edges);

  int n_;
  std::vector<Edge> edges_;
};

// Exact determinant of an integer matrix by fraction-free elimination.
// Returned as a decimal string since it can exceed 64 bits.
std::string exact_determinant(const Eigen::MatrixXi& a);
bool is_singular_exact(const Eigen::MatrixXi& a);
bool is_connected(int n, std::span<const Edge> edges);

Graph parse_edge_list(std::string_view text);
Graph load_edge_list(const std::string& path);
std::string format_edge_list(const Graph& g);

}  // namespace delaytk
