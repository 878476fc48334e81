#pragma once

// Surrogate families for the primal update: per-node Bregman kernels, network
// conjugate generators, and quadratic curvature providers with spectral bounds.

#include <functional>
#include <optional>
#include <vector>

#include "amm/common.hpp"
#include "amm/graph.hpp"
#include "amm/objectives.hpp"

namespace amm {

// Per-node kernel psi_i defining the separable part of the primal surrogate.
// Kinds:
//   scaled_identity(eps):     psi(x) = (eps/2)|x|^2
//   proximal(r, eps):         psi(x) = r(x - anchor) + (eps/2)|x|^2
//   hessian_plus(f, eps):     psi(x) = (1/2) x' (f''(anchor) + eps I) x
//   data_quadratic(Q):        psi(x) = (1/2) x' Q x        (Q symmetric PD)
// proximal and hessian_plus kernels depend on the current iterate through the
// anchor argument; the others ignore it.
class BregmanKernel {
 public:
  enum class Kind { scaled_identity, proximal, hessian_plus, data_quadratic };

  static BregmanKernel scaled_identity(int dim, double eps);
  static BregmanKernel proximal(SmoothLocal r, double eps);
  static BregmanKernel hessian_plus(SmoothLocal f, double eps);
  static BregmanKernel data_quadratic(Mat q);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  // strong-convexity lower bound / gradient-Lipschitz upper bound
  double modulus() const;
  double smoothness() const;

  // true when psi(.) is quadratic once the anchor is fixed (every kind except
  // proximal with a non-quadratic smooth part)
  bool quadratic_at_anchor() const;
  // true when the curvature moves with the anchor (proximal or hessian_plus
  // over a non-quadratic smooth part)
  bool anchor_varying() const;

  double value(const Vec& x, const Vec& anchor) const;
  Vec grad(const Vec& x, const Vec& anchor) const;
  Mat hessian(const Vec& x, const Vec& anchor) const;
  // Hessian of the anchored quadratic form; requires quadratic_at_anchor()
  Mat quad_matrix(const Vec& anchor) const;

 private:
  BregmanKernel() = default;
  Kind kind_ = Kind::scaled_identity;
  int dim_ = 0;
  double eps_ = 0.0;
  std::optional<SmoothLocal> smooth_;  // r (proximal) or f (hessian_plus)
  Mat q_;                              // data_quadratic
};

// Validates a kernel family against the penalty weights: positive moduli, the
// sufficient curvature condition modulus_i >= rho * lambda_max(P) (or the
// decentralized N-scaled bound), and — for anchored-quadratic kernels — the
// exact eigenvalue condition blockdiag(psi'') - rho P (x) I >= -1e-9 at the
// given anchors (zero anchors by default).
ValidationReport validate_bregman(const std::vector<BregmanKernel>& kernels, const WeightPair& wp,
                                  double rho, bool decentralized_bound = false,
                                  const std::vector<Vec>* anchors = nullptr);

// Network map gamma whose gradient produces the primal update x = grad
// gamma(w). Kinds:
//   separable_smooth(g, eps):  gamma(x) = sum_i g_i(x_i) + (eps/2)|x|^2,
//                              so block i of grad gamma depends only on x_i
//   quadratic(G):              gamma(x) = (1/2) x' G x with G neighbor-sparse
class ConjugateGenerator {
 public:
  enum class Kind { separable_smooth, quadratic };

  static ConjugateGenerator separable_smooth(std::vector<SmoothLocal> g, double eps);
  static ConjugateGenerator quadratic(Mat g, const Topology& topo, int d);

  Kind kind() const { return kind_; }
  bool separable() const { return kind_ == Kind::separable_smooth; }
  int nodes() const { return n_; }
  int dim() const { return d_; }

  // strong-convexity interval [gamma_lo, gamma_hi] of gamma
  double gamma_lo() const;
  double gamma_hi() const;

  Vec grad(const Vec& w) const;  // full grad gamma, Nd
  // block i of grad gamma; fetch(j) returns w_j and is called only for
  // j in N_i u {i} (separable kind calls it for i alone)
  Vec grad_block(int i, const std::function<Vec(int)>& fetch) const;
  // solve grad gamma(w) = x for w (dense; Newton per block for the separable
  // kind, linear solve for the quadratic kind)
  Vec inverse_grad(const Vec& x) const;

  const Mat& matrix() const;  // quadratic kind only
  // {i} u N_i for the quadratic kind (the index set grad_block reads)
  const std::vector<int>& closed_neighborhood(int i) const;

 private:
  ConjugateGenerator() = default;
  Kind kind_ = Kind::quadratic;
  int n_ = 0, d_ = 0;
  double eps_ = 0.0;
  std::vector<SmoothLocal> g_;
  Mat mat_;
  std::vector<std::vector<int>> closed_neighborhoods_;
};

// Checks the generator against the penalty weights: a positive strong-convexity
// interval, the conjugate-penalty condition I/gamma_hi - rho * P (x) I >= -tol,
// and (quadratic kind) neighbor sparsity of G.
ValidationReport validate_conjugate(const ConjugateGenerator& gen, const WeightPair& wp,
                                    double rho);

// Curvature provider for fully quadratic surrogates: A(k, anchor) must emit a
// symmetric matrix within the recorded spectral bounds.
struct QuadraticSurrogate {
  std::function<Mat(int k, const Vec& anchor)> provider;
  Mat a_lower, a_upper;  // constant bounds with a_lower <= A^k <= a_upper

  static QuadraticSurrogate constant(const Mat& a);

  Mat a_mid() const { return 0.5 * (a_lower + a_upper); }
  double delta() const;  // spectral norm of a_upper - a_lower
};

// Lifts per-node kernels to the network-level quadratic surrogate
// A^k = blockdiag(psi_i'') - rho P (x) I, with spectral bounds taken from the
// kernel moduli (exact for constant kernels).
QuadraticSurrogate lift_bregman(const std::vector<BregmanKernel>& kernels, const WeightPair& wp,
                                double rho);

// Neighbor-sparse update matrices G^k for the quadratic-generator engine.
struct SqProvider {
  std::function<Mat(int k)> provider;  // Nd x Nd, symmetric, neighbor-sparse
  double gamma_lo = 0.0, gamma_hi = 0.0;

  static SqProvider constant(const Mat& g);
};

// Checks one emitted G: symmetry, neighbor sparsity, the spectral interval
// [gamma_lo, gamma_hi], and G^{-1} - rho * P (x) I >= -1e-9.
ValidationReport validate_sq_matrix(const Mat& g, const SqProvider& sq, const Topology& topo,
                                    int d, const WeightPair& wp, double rho);

}  // namespace amm
