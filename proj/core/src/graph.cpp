#include "amm/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace amm {

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.ok ? "[pass] " : "[FAIL] ") << c.name;
    if (!c.detail.empty()) os << ": " << c.detail;
    os << "\n";
  }
  return os.str();
}

Vec stack(const std::vector<Vec>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vec out(total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += b.size();
  }
  return out;
}

std::vector<Vec> unstack(const Vec& v, int n_blocks, int d) {
  if (v.size() != static_cast<Eigen::Index>(n_blocks) * d)
    throw AmmError("unstack: size mismatch");
  std::vector<Vec> out(n_blocks);
  for (int i = 0; i < n_blocks; ++i) out[i] = v.segment(static_cast<Eigen::Index>(i) * d, d);
  return out;
}

Topology Topology::from_edges(int n_nodes, std::vector<std::pair<int, int>> edges) {
  if (n_nodes <= 0) throw AmmError("topology: node count must be positive");
  Topology t;
  t.n_ = n_nodes;
  for (auto& [a, b] : edges) {
    if (a == b) throw AmmError("topology: self-loop at node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= n_nodes || b >= n_nodes)
      throw AmmError("topology: edge endpoint out of range");
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw AmmError("topology: duplicate edge");
  t.edges_ = std::move(edges);
  t.adj_.assign(n_nodes, {});
  for (const auto& [a, b] : t.edges_) {
    t.adj_[a].push_back(b);
    t.adj_[b].push_back(a);
  }
  for (auto& nbrs : t.adj_) std::sort(nbrs.begin(), nbrs.end());

  // connectivity via traversal
  std::vector<char> seen(n_nodes, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : t.adj_[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  if (count != n_nodes) throw AmmError("topology: graph is not connected");
  return t;
}

Topology Topology::path(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return from_edges(n, std::move(e));
}

Topology Topology::ring(int n) {
  if (n < 3) throw AmmError("ring: need at least 3 nodes");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return from_edges(n, std::move(e));
}

Topology Topology::star(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back(0, i);
  return from_edges(n, std::move(e));
}

Topology Topology::complete(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return from_edges(n, std::move(e));
}

Topology Topology::random_connected(int n_nodes, int n_edges, std::uint64_t seed) {
  if (n_edges < n_nodes - 1)
    throw AmmError("random_connected: edge count below N-1, cannot be connected");
  const long max_edges = static_cast<long>(n_nodes) * (n_nodes - 1) / 2;
  if (n_edges > max_edges) throw AmmError("random_connected: edge count exceeds complete graph");

  std::mt19937_64 rng(seed);
  // random spanning tree: attach each new node to a uniformly chosen earlier one
  std::vector<int> order(n_nodes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<char>> have(n_nodes, std::vector<char>(n_nodes, 0));
  auto add = [&](int a, int b) {
    edges.emplace_back(a, b);
    have[a][b] = have[b][a] = 1;
  };
  for (int k = 1; k < n_nodes; ++k) {
    std::uniform_int_distribution<int> pick(0, k - 1);
    add(order[k], order[pick(rng)]);
  }
  std::uniform_int_distribution<int> node(0, n_nodes - 1);
  while (static_cast<int>(edges.size()) < n_edges) {
    int a = node(rng), b = node(rng);
    if (a == b || have[a][b]) continue;
    add(a, b);
  }
  return from_edges(n_nodes, std::move(edges));
}

Topology Topology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AmmError("topology: cannot open " + path);
  std::vector<std::pair<int, int>> edges;
  int max_node = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int a = 0, b = 0;
    if (!(ls >> a >> b))
      throw AmmError("topology: malformed line " + std::to_string(lineno) + " in " + path);
    if (a < 1 || b < 1)
      throw AmmError("topology: node indices are 1-based, line " + std::to_string(lineno));
    edges.emplace_back(a - 1, b - 1);
    max_node = std::max({max_node, a, b});
  }
  return from_edges(max_node, std::move(edges));
}

void Topology::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw AmmError("topology: cannot write " + path);
  for (const auto& [a, b] : edges_) out << (a + 1) << " " << (b + 1) << "\n";
}

bool Topology::is_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
}

int Topology::max_degree() const {
  int m = 0;
  for (int i = 0; i < n_; ++i) m = std::max(m, degree(i));
  return m;
}

}  // namespace amm
