#pragma once

#include <cstdint>
#include <memory>

#include "amm/graph.hpp"

namespace amm {

// Per-node smooth term f_i with value/gradient/Hessian oracles and a global
// gradient-Lipschitz constant M_i.
class SmoothLocal {
 public:
  enum class Kind { zero, quadratic, logistic };

  static SmoothLocal zero(int dim);
  // f(x) = 0.5*||B x - b||^2
  static SmoothLocal quadratic(Mat B, Vec b);
  // f(x) = sum_j log(1 + exp(-labels_j * features_j . x)), labels in {-1,+1}
  static SmoothLocal logistic(Mat features, Vec labels);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool is_zero() const { return kind_ == Kind::zero; }

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hessian(const Vec& x) const;
  double smoothness() const { return smoothness_; }  // M_i

  // data accessors (quadratic: B, b; logistic: features, labels)
  const Mat& data_matrix() const { return A_; }
  const Vec& data_vector() const { return y_; }

 private:
  SmoothLocal() = default;
  Kind kind_ = Kind::zero;
  int dim_ = 0;
  Mat A_;  // B or features
  Vec y_;  // b or labels
  double smoothness_ = 0;
};

// Per-node nonsmooth convex term h_i with an exact or iterative prox.
// Kinds: zero, weighted l1 norm, indicator of a Euclidean ball, and finite
// sums of those (prox of a sum evaluated by Dykstra splitting).
class NonsmoothLocal {
 public:
  enum class Kind { zero, l1, ball, sum };

  static NonsmoothLocal zero();
  static NonsmoothLocal l1(double weight);
  static NonsmoothLocal ball(Vec center, double radius);
  static NonsmoothLocal sum(std::vector<NonsmoothLocal> terms);

  Kind kind() const { return kind_; }
  bool is_zero() const;

  // may return +inf (outside an indicator's ball)
  double value(const Vec& x) const;

  // argmin_x h(x) + ||x - v||^2 / (2*step)
  Vec prox(const Vec& v, double step) const;

  // Euclidean distance from g to the subdifferential of h at x; +inf when the
  // subdifferential is empty (x outside a ball). |x_j| <= zero_tol counts as 0
  // for l1 kinks, and boundary detection for balls uses the same tolerance.
  double subgrad_dist(const Vec& x, const Vec& g, double zero_tol = 1e-9) const;

  // elementary accessors
  double l1_weight() const { return weight_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const std::vector<NonsmoothLocal>& terms() const { return terms_; }

  // Dykstra controls for sum-kind prox evaluation
  static constexpr double kSumProxTol = 1e-10;
  static constexpr int kSumProxMaxIter = 10000;

 private:
  NonsmoothLocal() = default;
  Kind kind_ = Kind::zero;
  double weight_ = 0;
  Vec center_;
  double radius_ = 0;
  std::vector<NonsmoothLocal> terms_;
};

// A connected network of local objectives sharing one decision dimension.
struct NetworkProblem {
  Topology topo;
  int d = 0;
  std::vector<SmoothLocal> f;
  std::vector<NonsmoothLocal> h;

  int nodes() const { return topo.nodes(); }
  bool f_all_zero() const;
  bool h_all_zero() const;
  double sum_smoothness() const;  // sum of M_i

  double smooth_value(const std::vector<Vec>& x) const;     // sum f_i(x_i)
  double nonsmooth_value(const std::vector<Vec>& x) const;  // sum h_i(x_i), may be +inf
  double value_at_common(const Vec& xc) const;              // all nodes at one point

  void validate() const;  // sizes and dimensions
};

// deterministic generators ---------------------------------------------------

// Least-squares network: f_i(x) = 0.5*||B_i x - b_i||^2 on the given topology,
// h_i = 0. rows >= dim makes every local term strongly convex.
NetworkProblem make_least_squares_network(std::uint64_t seed, const Topology& topo, int dim,
                                          int rows);

// Constrained l1-regularized least squares over a random connected graph:
// f_i = 0.5*||B_i x - b_i||^2 with rows x dim standard-normal data,
// h_i = (1/N)*||x||_1 + indicator of the ball {x : ||x - a_i|| <= ||a_i|| + 1},
// so 0 is interior to every ball.
NetworkProblem make_constrained_lasso_network(std::uint64_t seed, int n_nodes = 20, int dim = 5,
                                              int rows = 3, int n_edges = 26);

// Binary logistic regression network with standard-normal features and labels
// from a planted separator; h_i = 0.
NetworkProblem make_logistic_network(std::uint64_t seed, const Topology& topo, int dim,
                                     int samples_per_node);

// serialization --------------------------------------------------------------

void save_problem(const NetworkProblem& p, const std::string& path);
NetworkProblem load_problem(const std::string& path);

// centralized reference optimum ---------------------------------------------

struct ReferenceOptions {
  double change_tol = 1e-12;  // stop when successive iterates move less than this
  long max_iter = 1000000;
  Vec x0;  // optional warm start
};

struct ReferenceSolution {
  Vec x_star;
  double F_star = 0;
  long iterations = 0;
  bool converged = false;
  double final_change = 0;
  std::string warning;  // non-empty when the iteration cap was hit
};

// Long-run centralized proximal gradient on sum f_i + sum h_i with step
// 1/sum M_i (proximal point when all f_i are zero). The prox of the summed
// nonsmooth terms is evaluated by Dykstra splitting across nodes.
ReferenceSolution solve_reference_optimum(const NetworkProblem& p,
                                          const ReferenceOptions& opt = {});

}  // namespace amm
