#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>

#include "amm/common.hpp"

namespace amm {

// Connected undirected graph over nodes 0..n-1 with no self-loops or
// duplicate edges. Neighbor lists are sorted and symmetric.
class Topology {
 public:
  Topology() = default;

  // Validates and canonicalizes: requires connectivity, rejects self-loops
  // and duplicates. Edges may be given in either orientation.
  static Topology from_edges(int n_nodes, std::vector<std::pair<int, int>> edges);

  static Topology path(int n);
  static Topology ring(int n);
  static Topology star(int n);  // node 0 is the hub
  static Topology complete(int n);

  // Random connected graph with exactly `n_edges` links: a random spanning
  // tree plus uniformly chosen extra edges. Deterministic in `seed`.
  static Topology random_connected(int n_nodes, int n_edges, std::uint64_t seed);

  // Edge-list file, one "i j" pair per line, 1-indexed.
  static Topology load(const std::string& path);
  void save(const std::string& path) const;

  int nodes() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adj_[i]; }
  int degree(int i) const { return static_cast<int>(adj_[i].size()); }
  bool is_edge(int i, int j) const;
  int max_degree() const;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;  // canonical (i<j), sorted
  std::vector<std::vector<int>> adj_;
};

// Symmetric weight matrices P and P~ tied to a topology. Both must have
// nonzeros only on edges and the diagonal, null space spanned by the all-one
// vector, and be positive semidefinite. Stored dense at N x N; engines apply
// them blockwise so no N*d x N*d lift is formed outside the reference engine.
struct WeightPair {
  Mat P;
  Mat Pt;
};

// Metropolis weights: off-diagonal -1/(max{deg_i, deg_j}+1) on edges, diagonal
// equal to minus the off-diagonal row sum; optional positive scaling.
WeightPair build_metropolis(const Topology& topo, double scale = 1.0);

// Graph Laplacian: off-diagonal -1 on edges, diagonal deg_i; optional scaling.
WeightPair build_laplacian(const Topology& topo, double scale = 1.0);

// Checks symmetry, neighbor sparsity, null space = span(1) (with second
// eigenvalue > tol), and positive semidefiniteness for both matrices; with
// `require_dominated`, additionally P - P~ >= -tol*I.
ValidationReport validate_weight_pair(const WeightPair& wp, const Topology& topo,
                                      bool require_dominated = false);

// Decentralized bound max_{i, j in N_i} |p_ij| * N; always >= lambda_max(P).
double lambda_max_upper_bound(const Mat& P, const Topology& topo);

double lambda_max(const Mat& symmetric);
double lambda_min(const Mat& symmetric);

// Kronecker product P (x) I_d, lifting an N x N node matrix to block size d.
Mat kron_identity(const Mat& P, int d);

// Second-smallest eigenvalue of a PSD matrix whose null space must be exactly
// span(1); errors if the zero eigenvalue has multiplicity > 1 (disconnected).
double smallest_nonzero_eigenvalue(const Mat& P, double zero_tol = 1e-9);

// CSV export/import for weight matrices (plain rows of comma-separated values).
void save_matrix_csv(const Mat& m, const std::string& path);
Mat load_matrix_csv(const std::string& path);

}  // namespace amm
