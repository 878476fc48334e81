#pragma once

// Post-processing and instrumentation: per-round error metrics against a
// reference optimum, Lyapunov values in the G and G-tilde norms, sublinear
// error-bound curves for the two convergence regimes, empirical rate fitting,
// and the bisection certificate for the linear contraction margin delta_tilde.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "amm/common.hpp"
#include "amm/engines.hpp"
#include "amm/graph.hpp"
#include "amm/objectives.hpp"

namespace amm {

// ---------------------------------------------------------------------------
// reference optimum and dual reconstruction

// Optimal pair the metrics are measured against. x_star is stacked (every
// node's block equal to the common minimizer); F_star = f(x*) + h(x*).
// v_star is the square-root-form dual optimum; when empty, the Lyapunov
// columns are disabled and only objective/consensus errors are produced.
struct ReferencePoint {
  Vec x_star;
  double F_star = 0.0;
  Vec v_star;
};

// Canonical square-root-form dual for stacked multipliers q:
//   v = ((Pt (x) I)^{1/2})^dagger q,
// computed from the eigendecomposition of Pt with eigenvalues <= cutoff
// treated as the null space. Exact whenever the blocks of q sum to zero
// (the engines enforce this), since that set equals the range of the lift.
Vec dual_from_multipliers(const Mat& Pt, int d, const Vec& q, double cutoff = 1e-9);

// Centralized solve plus reference assembly. For smooth problems (all h_i
// zero) the dual optimum is exact: v* = -((Pt (x) I)^{1/2})^dagger grad f(x*).
// For composite problems v_star is left empty; pass converged multipliers
// through dual_from_multipliers to fill it.
ReferencePoint centralized_reference(const NetworkProblem& prob, const Mat& Pt,
                                     const ReferenceOptions& opt = {});

// ---------------------------------------------------------------------------
// per-round metrics

// One sampled row. The average columns track the running average
// xbar^k = (1/k) sum_{t=1..k} x^t; the k=0 row repeats the initial-iterate
// errors in the average columns. optimality_err = |obj_err| + cons_err.
// lyapunov_G = |x-x*|^2_A + |v-v*|^2 / rho (constant-curvature regime);
// lyapunov_c = |x-x*|^2_{A_a} + |v-v*|^2 / rho + rho |x|^2_{Ht} (restricted
// strong convexity regime). Both are nan until the matching curvature matrix
// is supplied and the reference carries a dual optimum.
struct TraceRow {
  long k = 0;
  double obj_err_iterate = 0.0;
  double obj_err_avg = 0.0;
  double cons_err_iterate = 0.0;
  double cons_err_avg = 0.0;
  double optimality_err_iterate = 0.0;
  double optimality_err_avg = 0.0;
  double lyapunov_G = 0.0;
  double lyapunov_c = 0.0;
  Vec x;  // optional snapshot (empty unless requested)
};

struct MetricsConfig {
  int stride = 1;          // emit a row every stride-th round (k=0 and the final round always)
  int snapshot_stride = 0; // keep x on emitted rows whose k divides this; 0 = never
};

// Error-bound curves of the form constant / k, evaluated at k >= 1. The
// objective lower bound is the negative branch. Produced by
// constant_curvature_bounds and strong_convexity_bounds below.
struct BoundCurves {
  double consensus_c = 0.0;
  double objective_upper_c = 0.0;
  double objective_lower_c = 0.0;  // magnitude; the bound itself is the negative
  double sigma_lower = 0.0;  // constant-curvature regime only
  double d0 = 0.0;           // strong-convexity regime only

  double consensus(long k) const { return consensus_c / static_cast<double>(k); }
  double objective_upper(long k) const { return objective_upper_c / static_cast<double>(k); }
  double objective_lower(long k) const { return -objective_lower_c / static_cast<double>(k); }
};

// Collects metrics from an engine run. observe() must be called once per
// round with consecutive k starting at 0 so the running average covers every
// iterate; rows are emitted at the configured stride. The expensive work
// (objective values, dual reconstruction) happens only on emitted rows.
class MetricsCollector {
 public:
  MetricsCollector(const NetworkProblem& prob, const Mat& Pt, double rho,
                   ReferencePoint ref, MetricsConfig cfg = {});

  // enable the lyapunov_G column: squared G-distance with G = diag(A, I/rho)
  void enable_lyapunov_G(const Mat& a);
  // enable the lyapunov_c column: squared Gt-distance plus rho |x|^2_{Ht}
  // with Gt = diag(A_a, I/rho)
  void enable_lyapunov_c(const Mat& a_avg);

  void observe(long k, const Vec& x, const Vec& q);
  // emit the most recent observation if the stride skipped it
  void finish();

  const std::vector<TraceRow>& rows() const { return rows_; }
  std::vector<TraceRow> take_rows() { return std::move(rows_); }
  const Vec& x_average() const { return xbar_; }
  const ReferencePoint& reference() const { return ref_; }
  double rho() const { return rho_; }

 private:
  TraceRow make_row(long k, const Vec& x, const Vec& q) const;

  const NetworkProblem* prob_;
  Mat pt_;
  Mat pinv_sqrt_pt_;  // ((Pt)^{1/2})^dagger at node level
  double rho_;
  ReferencePoint ref_;
  MetricsConfig cfg_;
  Mat a_, a_avg_;
  bool lyap_g_ = false, lyap_c_ = false;
  Vec xbar_;
  long last_k_ = -1;
  Vec last_x_, last_q_;
  bool last_emitted_ = false;
  std::vector<TraceRow> rows_;
};

// ---------------------------------------------------------------------------
// run harness

// Full record of one hosted run: identification, sampled metric rows, message
// accounting from the engine's board (zero for oracle-hosted engines), and
// the final state. aborted marks a run cut short by a solver failure; the
// rows collected before the failure are retained.
struct RunTrace {
  std::string algorithm;
  int nodes = 0, dim = 0;
  double rho = 0.0;
  long rounds = 0;  // rounds completed
  bool strict = false;
  bool oracle_mode = false;
  std::string note;
  bool aborted = false;
  std::string abort_reason;
  long messages = 0;       // non-initialization messages
  long init_messages = 0;
  double observed_cost = 0.0;  // d-vectors per node per round measured on the board; nan when oracle-hosted
  double declared_cost = 0.0;
  std::vector<TraceRow> rows;
  Vec x_final, q_final;

  // columns: k, obj_err_iterate, obj_err_avg, cons_err_iterate, cons_err_avg,
  // optimality_err_iterate, optimality_err_avg, lyapunov_G, lyapunov_c,
  // with 17 significant digits. Bound curves, when given, append
  // bound_consensus / bound_objective_upper / bound_objective_lower columns
  // (prefixed cc_ for the constant-curvature curves, sc_ for the
  // strong-convexity curves), evaluated at each row's k.
  void write_csv(std::ostream& out, const BoundCurves* constant_curvature = nullptr,
                 const BoundCurves* strong_convexity = nullptr) const;
  void write_csv(const std::string& path, const BoundCurves* constant_curvature = nullptr,
                 const BoundCurves* strong_convexity = nullptr) const;
};

struct RunOptions {
  long iters = 0;
  // strict requires every neighbor read to go through the audited board;
  // a centralized engine cannot satisfy that, so the run proceeds in oracle
  // mode and the trace is flagged and annotated instead
  bool strict = true;
  std::string label;           // trace.algorithm; empty = engine name
  double declared_cost = -1;   // override for the declared d-vectors per node per round; <0 = engine's
};

// Drives a fresh engine for opt.iters rounds, feeding every round through the
// collector. A solver failure inside a round aborts the run and returns the
// partial trace with the failure message.
RunTrace run_engine(Engine& eng, MetricsCollector& collector, const RunOptions& opt);

// d-vectors sent per node per round: the audited board measurement for
// distributed engines, the declared count for oracle-hosted runs.
double communication_cost(const RunTrace& trace);

// ---------------------------------------------------------------------------
// error-bound curves

// Regime: constant quadratic surrogate curvature A with A strictly dominating
// half the gradient-Lipschitz diagonal. m holds the per-node constants M_i,
// so the diagonal is diag(m) (x) I_d.
struct ConstantCurvatureInput {
  Vec x0, v0, x_star, v_star;
  Mat a;     // Nd x Nd constant curvature
  Vec m;     // per-node gradient-Lipschitz constants, size N
  int d = 1;
  double rho = 1.0;
};

// Smallest sigma with sigma * A >= diag(m) (x) I_d / 2 (generalized
// eigenvalue; requires A positive definite).
double sigma_lower_bound(const Mat& a, const Vec& m, int d);

// The three constant-over-k curves for the constant-curvature regime:
//   consensus:        (|v0-v*| + sqrt(rho) |z0-z*|_G) / (rho k)
//   objective upper:  (|v0|^2/rho + |x0-x*|^2_A + |z0-z*|^2_G/(1-sigma)) / (2k)
//   objective lower:  -|v*| (|v0-v*| + sqrt(rho) |z0-z*|_G) / (rho k)
// Throws when the regime fails (sigma_lower >= 1).
BoundCurves constant_curvature_bounds(const ConstantCurvatureInput& in);

// Regime: restricted strong convexity with surrogate curvature varying in
// [A_l, A_u], Delta = |A_u - A_l|, m_rho the restricted strong convexity
// modulus of f + (rho/4)|.|^2_{Ht}, and step/feasibility scalars eta, beta,
// sigma from the contraction conditions.
struct StrongConvexityInput {
  double d0 = 0.0;
  double eta = 0.5, beta = 1.0, sigma = 0.5;
  double delta = 0.0;
  double m_rho = 0.0;
  double rho = 1.0;
  Mat a_upper;
  Vec x0, v0, x_star, v_star;
};

// d0 = sqrt(rho |z0-z*|^2_{Gt} + rho^2 |x0|^2_{Ht}) with Gt = diag(A_a, I/rho).
double compute_d0(const Vec& x0, const Vec& v0, const Vec& x_star, const Vec& v_star,
                  const Mat& a_avg, double rho, const Mat& Pt, int d);

// The three constant-over-k curves for the restricted-strong-convexity regime:
//   consensus:        (d0 + |v0-v*|) / (rho k)
//   objective upper:  (d0^2/rho (Delta/(2(2 eta m_rho - beta Delta)) + (1-eta)/(1-sigma))
//                      + |x0-x*|^2_{A_u}/2 + |v0|^2/(2 rho)) / k
//   objective lower:  -|v*| (d0 + |v0-v*|) / (rho k)
BoundCurves strong_convexity_bounds(const StrongConvexityInput& in);

// ---------------------------------------------------------------------------
// linear-rate certificate

// Inputs of the contraction certificate. The feasibility conditions checked
// by validate() are
//   step:        A_a > (Delta^2/(8 eta m_rho) + Delta) I + LambdaM / (2(1-eta))
//   range:       beta Delta < 2 eta m_rho
//                sigma A_a >= (1/(4 beta) + 1) Delta I + LambdaM / (2(1-eta))
// with LambdaM = diag(m) (x) I_d. H and Ht are the dense penalty lifts
// (small instances only); lambda_bar is any upper bound on |H| (negative =
// use |H| itself).
struct CertificateInput {
  double rho = 1.0;
  Mat h, ht;
  Vec m;
  int d = 1;
  Mat a_avg, a_upper;
  double delta_surrogate = 0.0;  // Delta = |A_u - A_l|
  double m_rho = 0.0;
  double eta = 0.5;
  double beta = 1.0;
  double sigma = 0.5;
  double theta1 = 1.0, theta2 = 1.0;
  double lambda_bar = -1.0;

  ValidationReport validate() const;
};

struct CertificateResult {
  double delta_tilde = 0.0;   // largest feasible contraction margin, to 1e-8
  int binding = 0;            // 1..3: which matrix pins delta_tilde
  double binding_eig = 0.0;   // its smallest eigenvalue at delta_tilde
  std::array<double, 3> min_eigs{};        // all three smallest eigenvalues at delta_tilde
  std::array<double, 3> min_eigs_above{};  // the same at delta_tilde + 1e-6
  double lambda_ht = 0.0;     // smallest nonzero eigenvalue of Ht
  double theta1 = 1.0, theta2 = 1.0;  // the scalars the certificate was computed with
};

// The three feasibility matrices, affine and non-increasing in delta:
//   B1 = (2 eta m_rho - beta Delta) I - delta A_a
//        - delta (1+theta1)(1+theta2) LambdaM^2 / (rho lambda_Ht)
//   B2 = rho (1 - delta - eta) Ht - rho delta (1 + 1/theta1) H Ht^dagger H
//   B3 = (1-sigma) A_a - 2 delta (1+theta1)(1+1/theta2)
//        (A_u^2/(rho lambda_Ht) + rho lambda_bar H^{1/2} Ht^dagger H^{1/2})
Mat certificate_matrix(const CertificateInput& ci, int which, double delta);

// Bisection on delta in (0,1): feasible when every certificate matrix has
// smallest eigenvalue >= -1e-10. Returns the largest feasible delta to 1e-8
// with the binding matrix and its eigenvalue; throws on invalid inputs
// (naming the violated inequality) and when no positive delta is feasible.
CertificateResult compute_delta_tilde(const CertificateInput& ci);

// Optional grid search over the free scalars theta1, theta2, keeping the pair
// that maximizes delta_tilde.
CertificateResult maximize_delta_tilde(const CertificateInput& ci,
                                       const std::vector<double>& theta_grid);

// Structured text block describing the certificate (used by the CLI).
std::string certificate_report(const CertificateInput& ci, const CertificateResult& res);

// Exact restricted strong convexity modulus of f + (rho/4)|.|^2_{Ht} for
// quadratic f: the smallest eigenvalue of blockdiag(hess f_i(anchor)) +
// (rho/2) Pt (x) I. anchor_common is the d-vector every block is evaluated
// at (zeros when empty); exact when every f_i has a constant Hessian.
double quadratic_m_rho(const NetworkProblem& prob, double rho, const Mat& Pt,
                       const Vec& anchor_common = Vec());

// ---------------------------------------------------------------------------
// rate fitting and order estimates

// Least-squares fits of a positive error series over the window of rounds
// [k_begin, k_end]: slope of log y against log k (power law) and the
// per-round factor exp(slope of log y against k) (geometric), both with RMS
// log-space residuals. Entries at or below the 1e-14 numerical floor cut the
// window and set truncated.
struct RateFit {
  double power_slope = 0.0;
  double power_residual = 0.0;
  double geometric_factor = 0.0;
  double geometric_residual = 0.0;
  bool truncated = false;
  long k_begin = 0, k_end = 0;  // window actually used
  int points = 0;
};

RateFit fit_rate(const std::vector<long>& ks, const std::vector<double>& ys, long k_begin,
                 long k_end);

// Order estimate of the contraction margin from the graph and the condition
// number: min(sqrt(1 - lambda2)/kappa_f, 1 - lambda2), with lambda2 the
// second-largest average-matrix eigenvalue (constant factor one; an order
// estimate, not a bound).
double sparse_rate_estimate(double lambda2, double kappa_f);

// ---------------------------------------------------------------------------
// small shared helpers

// sqrt(x' (Pt (x) I) x), clamped at zero: the consensus error |Ht^{1/2} x|
// computed through the quadratic form (no matrix square root involved).
double consensus_error(const Mat& Pt, const Vec& x, int d);

// per-node gradient-Lipschitz constants M_i
Vec lipschitz_constants(const NetworkProblem& prob);

}  // namespace amm
