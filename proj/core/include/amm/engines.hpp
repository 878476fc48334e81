#pragma once

// Iteration engines: a dense reference engine and a sequential-split variant
// operating on stacked network state, plus three distributed engines that run
// over the audited message board (per-node subproblems, constant update maps,
// and quadratic update maps).

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amm/common.hpp"
#include "amm/graph.hpp"
#include "amm/local_solver.hpp"
#include "amm/netsim.hpp"
#include "amm/objectives.hpp"
#include "amm/surrogates.hpp"

namespace amm {

// Common engine interface. start() runs initialization (including init
// traffic for distributed engines); each round() performs one synchronous
// iteration: primal phase, exchange, dual phase, exchange.
class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string name() const = 0;
  virtual int nodes() const = 0;
  virtual int dim() const = 0;
  // true when every neighbor-state read of a round goes through the audited
  // message board; the dense engines return false (oracle mode)
  virtual bool distributed() const = 0;
  // declared d-vectors sent per node per round (audited against the logs)
  virtual double declared_cost() const = 0;
  virtual void start() = 0;
  virtual void round() = 0;
  virtual long iteration() const = 0;
  virtual Vec x_stacked() const = 0;
  virtual Vec q_stacked() const = 0;
  virtual const NetSim* net() const { return nullptr; }
};

// Surrogate family for the dense engines.
//   bregman:          separable kernels, u = sum_i D_{psi_i}(x_i, anchor_i)
//                     combined with the penalty (solved jointly, dense)
//   quadratic:        u = (1/2)(x-anchor)' A^k (x-anchor) + <grad f(anchor), x>
//   conjugate:        u built from a generator gamma; primal step is the
//                     closed-form gradient map (smooth problems)
//   quadratic_plus_f: u = (1/2)|x-anchor|^2_C + f(x)
class DenseSurrogate {
 public:
  enum class Family { bregman, quadratic, conjugate, quadratic_plus_f };

  static DenseSurrogate bregman(std::vector<BregmanKernel> kernels);
  static DenseSurrogate quadratic(QuadraticSurrogate s);
  static DenseSurrogate conjugate(ConjugateGenerator gen);
  static DenseSurrogate quadratic_plus_f(Mat c);

  Family family() const { return family_; }
  const std::vector<BregmanKernel>& kernels() const { return kernels_; }
  const QuadraticSurrogate& quadratic_surrogate() const { return *quad_; }
  const ConjugateGenerator& generator() const { return *gen_; }
  const Mat& anchor_matrix() const { return c_; }

 private:
  DenseSurrogate() = default;
  Family family_ = Family::bregman;
  std::vector<BregmanKernel> kernels_;
  std::optional<QuadraticSurrogate> quad_;
  std::optional<ConjugateGenerator> gen_;
  Mat c_;
};

struct DenseEngineConfig {
  double rho = 1.0;
  InnerSolverConfig inner;
  bool track_v = false;  // maintain the square-root-form dual alongside q
  Vec x0, q0;            // empty -> zeros; blocks of q0 must sum to zero
};

// Shared dense primal minimizer:
//   minimize_x u^k(x; anchor) + (rho/2) x'Hx + <q, x> [+ h(x)]
// with H = P (x) I materialized once. Linear solves where the structure is
// quadratic and h is absent; otherwise accelerated proximal gradient.
class DensePrimalSolver {
 public:
  DensePrimalSolver(const NetworkProblem& prob, const WeightPair& wp, double rho,
                    DenseSurrogate surr, InnerSolverConfig inner);

  Vec solve(long k, const Vec& anchor, const Vec& q, bool with_h, double* residual) const;

  const Mat& H() const { return h_mat_; }
  const DenseSurrogate& surrogate() const { return surr_; }

 private:
  const NetworkProblem* prob_;
  double rho_;
  DenseSurrogate surr_;
  InnerSolverConfig inner_;
  Mat h_mat_;        // rho-free penalty lift P (x) I
  Mat f_quad_;       // blockdiag of constant local Hessians (all-quadratic f)
  Vec f_lin_;        // stacked grad f(0) for the same case
  bool f_is_quadratic_ = false;
};

// Dense engine iterating the stacked primal/dual recursion with the chosen
// surrogate family; the cross-checking oracle for the distributed engines and
// the host for centralized specializations. State capped at N*d <= 2000.
class ReferenceAmm final : public Engine {
 public:
  ReferenceAmm(NetworkProblem prob, WeightPair wp, DenseSurrogate surr,
               DenseEngineConfig cfg = {});

  std::string name() const override { return "reference"; }
  int nodes() const override { return prob_.nodes(); }
  int dim() const override { return prob_.d; }
  bool distributed() const override { return false; }
  double declared_cost() const override { return 0.0; }
  void start() override;
  void round() override;
  long iteration() const override { return k_; }
  Vec x_stacked() const override { return x_; }
  Vec q_stacked() const override { return q_; }

  const Vec& v() const;  // square-root-form dual; requires track_v
  double v_consistency() const;  // |Ht^{1/2} v - q|, 0 when tracking is off
  double last_residual() const { return last_residual_; }
  const Mat& H() const { return solver_.H(); }
  const Mat& Ht() const { return ht_mat_; }

 private:
  NetworkProblem prob_;
  WeightPair wp_;
  DenseEngineConfig cfg_;
  DensePrimalSolver solver_;
  Mat ht_mat_;       // Pt (x) I
  Mat ht_sqrt_;      // symmetric square root of ht_mat_
  Vec x_, q_, v_;
  long k_ = 0;
  double last_residual_ = 0.0;
  bool started_ = false;
};

// Sequential-split variant: the surrogate minimization runs without h, the
// nonsmooth part is applied as a separate prox at weight rho, and the dual
// update is driven by the pre-prox point. Requires zero initial multipliers.
class SplitEngine final : public Engine {
 public:
  SplitEngine(NetworkProblem prob, WeightPair wp, DenseSurrogate surr,
              DenseEngineConfig cfg = {});

  std::string name() const override { return "split"; }
  int nodes() const override { return prob_.nodes(); }
  int dim() const override { return prob_.d; }
  bool distributed() const override { return false; }
  double declared_cost() const override { return 0.0; }
  void start() override;
  void round() override;
  long iteration() const override { return k_; }
  Vec x_stacked() const override { return x_; }
  Vec q_stacked() const override { return q_; }

  const Vec& z() const { return z_; }  // latest pre-prox point
  double last_residual() const { return last_residual_; }

 private:
  NetworkProblem prob_;
  WeightPair wp_;
  DenseEngineConfig cfg_;
  DensePrimalSolver solver_;
  Mat ht_mat_;
  Vec x_, q_, z_;
  long k_ = 0;
  double last_residual_ = 0.0;
  bool started_ = false;
};

struct DistributedConfig {
  double rho = 1.0;
  InnerSolverConfig inner;      // per-node subproblems (kernel engine only)
  std::vector<Vec> x0, q0;      // empty -> zeros; q0 blocks must sum to zero
  std::vector<Vec> z_tilde;     // constant-update engine seed points
};

// Per-node kernel engine: each round every node solves its local subproblem
// from neighbor x-values, broadcasts the new x, and updates its multiplier.
// One payload class per round.
class DammEngine final : public Engine {
 public:
  DammEngine(NetworkProblem prob, WeightPair wp, std::vector<BregmanKernel> kernels,
             DistributedConfig cfg = {});

  std::string name() const override { return "damm"; }
  int nodes() const override { return prob_.nodes(); }
  int dim() const override { return prob_.d; }
  bool distributed() const override { return true; }
  double declared_cost() const override { return 1.0; }
  void start() override;
  void round() override;
  long iteration() const override { return k_; }
  Vec x_stacked() const override { return stack(x_); }
  Vec q_stacked() const override { return stack(q_); }
  const NetSim* net() const override { return &net_; }
  NetSim& network() { return net_; }

 private:
  NetworkProblem prob_;
  WeightPair wp_;
  std::vector<BregmanKernel> kernels_;
  DistributedConfig cfg_;
  NetSim net_;
  std::vector<Vec> x_, q_;
  long k_ = 0;
  bool started_ = false;
};

// Constant-update engine for smooth problems: the primal step is the gradient
// map of a fixed generator, evaluated from the combined w = y - grad f - q
// payloads. Two payload classes per round, one when the generator is
// separable (the w broadcasts disappear).
class DammScEngine final : public Engine {
 public:
  DammScEngine(NetworkProblem prob, WeightPair wp, ConjugateGenerator gen,
               DistributedConfig cfg = {});

  std::string name() const override { return "damm_sc"; }
  int nodes() const override { return prob_.nodes(); }
  int dim() const override { return prob_.d; }
  bool distributed() const override { return true; }
  double declared_cost() const override { return gen_.separable() ? 1.0 : 2.0; }
  void start() override;
  void round() override;
  long iteration() const override { return k_; }
  Vec x_stacked() const override { return stack(x_); }
  Vec q_stacked() const override { return stack(q_); }
  Vec y_stacked() const { return stack(y_); }
  const NetSim* net() const override { return &net_; }
  NetSim& network() { return net_; }

 private:
  Vec combined(int i) const;  // w_i = y_i - grad f_i(x_i) - q_i

  NetworkProblem prob_;
  WeightPair wp_;
  ConjugateGenerator gen_;
  DistributedConfig cfg_;
  NetSim net_;
  std::vector<Vec> x_, q_, y_, w_;
  long k_ = 0;
  bool started_ = false;
};

// Quadratic-update engine for smooth problems: each round applies a
// neighbor-sparse step matrix to the z payloads. Two payload classes.
class DammSqEngine final : public Engine {
 public:
  DammSqEngine(NetworkProblem prob, WeightPair wp, SqProvider sq, DistributedConfig cfg = {});

  std::string name() const override { return "damm_sq"; }
  int nodes() const override { return prob_.nodes(); }
  int dim() const override { return prob_.d; }
  bool distributed() const override { return true; }
  double declared_cost() const override { return 2.0; }
  void start() override;
  void round() override;
  long iteration() const override { return k_; }
  Vec x_stacked() const override { return stack(x_); }
  Vec q_stacked() const override { return stack(q_); }
  Vec z_stacked() const { return stack(z_); }
  const NetSim* net() const override { return &net_; }
  NetSim& network() { return net_; }

 private:
  NetworkProblem prob_;
  WeightPair wp_;
  SqProvider sq_;
  DistributedConfig cfg_;
  NetSim net_;
  std::vector<Vec> x_, q_, z_;
  long k_ = 0;
  bool started_ = false;
};

// stacked helpers shared by engines and analysis
Vec network_grad(const NetworkProblem& prob, const Vec& x);
Vec network_prox(const NetworkProblem& prob, const Vec& v, double step);
double network_nonsmooth_value(const NetworkProblem& prob, const Vec& x);

// symmetric PSD square root via eigendecomposition (negative dust clamped)
Mat symmetric_sqrt(const Mat& m);
// Moore-Penrose pseudoinverse of a symmetric PSD matrix, truncating
// eigenvalues at `cutoff`
Mat symmetric_pinv(const Mat& m, double cutoff = 1e-9);

}  // namespace amm
