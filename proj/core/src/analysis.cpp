#include "amm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <utility>

namespace amm {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kPsdTol = 1e-10;     // feasibility slack on smallest eigenvalues
constexpr double kNullCutoff = 1e-9;  // eigenvalue truncation for pseudoinverses
constexpr double kFitFloor = 1e-14;   // numerical floor for rate fitting

// y = (W (x) I_d) x for an N x N node matrix W, applied blockwise
Vec block_apply(const Mat& w, const Vec& x, int d) {
  const int n = static_cast<int>(w.rows());
  Eigen::Map<const Mat> xm(x.data(), d, n);
  Mat ym = xm * w.transpose();
  return Eigen::Map<Vec>(ym.data(), static_cast<Eigen::Index>(n) * d);
}

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double quad_form(const Mat& m, const Vec& x) { return x.dot(m * x); }

// diag(m) (x) I_d as a plain vector of diagonal entries
Vec lift_diagonal(const Vec& m, int d) {
  const int n = static_cast<int>(m.size());
  Vec out(static_cast<Eigen::Index>(n) * d);
  for (int i = 0; i < n; ++i) out.segment(i * d, d).setConstant(m(i));
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw AmmError(message);
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

double sum_value(const NetworkProblem& prob, const Vec& x) {
  const auto blocks = unstack(x, prob.nodes(), prob.d);
  return prob.smooth_value(blocks) + prob.nonsmooth_value(blocks);
}

}  // namespace

// ---------------------------------------------------------------------------
// dual reconstruction and reference assembly

Vec dual_from_multipliers(const Mat& Pt, int d, const Vec& q, double cutoff) {
  const int n = static_cast<int>(Pt.rows());
  require(Pt.cols() == n, "dual reconstruction: Pt must be square");
  require(q.size() == static_cast<Eigen::Index>(n) * d,
          "dual reconstruction: multiplier vector must have size N*d");
  Eigen::SelfAdjointEigenSolver<Mat> es(Pt);
  Vec inv_sqrt = es.eigenvalues();
  for (int i = 0; i < n; ++i)
    inv_sqrt(i) = inv_sqrt(i) > cutoff ? 1.0 / std::sqrt(inv_sqrt(i)) : 0.0;
  Mat w = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return block_apply(w, q, d);
}

ReferencePoint centralized_reference(const NetworkProblem& prob, const Mat& Pt,
                                     const ReferenceOptions& opt) {
  prob.validate();
  require(Pt.rows() == prob.nodes() && Pt.cols() == prob.nodes(),
          "reference: Pt must be N x N");
  ReferenceSolution sol = solve_reference_optimum(prob, opt);
  if (!sol.converged)
    throw AmmError("reference: centralized solve did not converge (" + sol.warning + ")");
  ReferencePoint ref;
  ref.x_star = Vec(static_cast<Eigen::Index>(prob.nodes()) * prob.d);
  for (int i = 0; i < prob.nodes(); ++i) ref.x_star.segment(i * prob.d, prob.d) = sol.x_star;
  ref.F_star = sol.F_star;
  if (prob.h_all_zero()) {
    Vec g(ref.x_star.size());
    for (int i = 0; i < prob.nodes(); ++i)
      g.segment(i * prob.d, prob.d) = prob.f[i].grad(sol.x_star);
    ref.v_star = -dual_from_multipliers(Pt, prob.d, g);
  }
  return ref;
}

// ---------------------------------------------------------------------------
// metrics collection

MetricsCollector::MetricsCollector(const NetworkProblem& prob, const Mat& Pt, double rho,
                                   ReferencePoint ref, MetricsConfig cfg)
    : prob_(&prob), pt_(Pt), rho_(rho), ref_(std::move(ref)), cfg_(cfg) {
  prob.validate();
  const int n = prob.nodes();
  const Eigen::Index nd = static_cast<Eigen::Index>(n) * prob.d;
  require(pt_.rows() == n && pt_.cols() == n, "collector: Pt must be N x N");
  require(rho_ > 0, "collector: rho must be positive");
  require(cfg_.stride >= 1, "collector: metric stride must be at least 1");
  require(ref_.x_star.size() == nd, "collector: reference x* must have size N*d");
  require(ref_.v_star.size() == 0 || ref_.v_star.size() == nd,
          "collector: reference v* must be empty or size N*d");
  Eigen::SelfAdjointEigenSolver<Mat> es(pt_);
  Vec inv_sqrt = es.eigenvalues();
  for (int i = 0; i < n; ++i)
    inv_sqrt(i) = inv_sqrt(i) > kNullCutoff ? 1.0 / std::sqrt(inv_sqrt(i)) : 0.0;
  pinv_sqrt_pt_ = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  xbar_ = Vec::Zero(nd);
}

void MetricsCollector::enable_lyapunov_G(const Mat& a) {
  require(a.rows() == xbar_.size() && a.cols() == xbar_.size(),
          "collector: curvature matrix must be Nd x Nd");
  a_ = a;
  lyap_g_ = true;
}

void MetricsCollector::enable_lyapunov_c(const Mat& a_avg) {
  require(a_avg.rows() == xbar_.size() && a_avg.cols() == xbar_.size(),
          "collector: curvature matrix must be Nd x Nd");
  a_avg_ = a_avg;
  lyap_c_ = true;
}

TraceRow MetricsCollector::make_row(long k, const Vec& x, const Vec& q) const {
  TraceRow row;
  row.k = k;
  row.obj_err_iterate = sum_value(*prob_, x) - ref_.F_star;
  row.cons_err_iterate = consensus_error(pt_, x, prob_->d);
  if (k == 0) {
    row.obj_err_avg = row.obj_err_iterate;
    row.cons_err_avg = row.cons_err_iterate;
  } else {
    row.obj_err_avg = sum_value(*prob_, xbar_) - ref_.F_star;
    row.cons_err_avg = consensus_error(pt_, xbar_, prob_->d);
  }
  row.optimality_err_iterate = std::abs(row.obj_err_iterate) + row.cons_err_iterate;
  row.optimality_err_avg = std::abs(row.obj_err_avg) + row.cons_err_avg;
  row.lyapunov_G = kNan;
  row.lyapunov_c = kNan;
  if (ref_.v_star.size() > 0 && (lyap_g_ || lyap_c_)) {
    const Vec v = block_apply(pinv_sqrt_pt_, q, prob_->d);
    const Vec dx = x - ref_.x_star;
    const double dual_part = (v - ref_.v_star).squaredNorm() / rho_;
    if (lyap_g_) row.lyapunov_G = quad_form(a_, dx) + dual_part;
    if (lyap_c_) {
      const double hx = std::max(0.0, x.dot(block_apply(pt_, x, prob_->d)));
      row.lyapunov_c = quad_form(a_avg_, dx) + dual_part + rho_ * hx;
    }
  }
  if (cfg_.snapshot_stride > 0 && k % cfg_.snapshot_stride == 0) row.x = x;
  return row;
}

void MetricsCollector::observe(long k, const Vec& x, const Vec& q) {
  require(x.size() == xbar_.size() && q.size() == xbar_.size(),
          "collector: state vectors must have size N*d");
  require(k == last_k_ + 1,
          "collector: rounds must be observed consecutively starting at 0 (got k=" +
              std::to_string(k) + " after k=" + std::to_string(last_k_) + ")");
  if (k >= 1) xbar_ += (x - xbar_) / static_cast<double>(k);
  last_k_ = k;
  last_x_ = x;
  last_q_ = q;
  last_emitted_ = (k % cfg_.stride == 0);
  if (last_emitted_) rows_.push_back(make_row(k, x, q));
}

void MetricsCollector::finish() {
  if (last_k_ >= 0 && !last_emitted_) {
    rows_.push_back(make_row(last_k_, last_x_, last_q_));
    last_emitted_ = true;
  }
}

// ---------------------------------------------------------------------------
// run harness

RunTrace run_engine(Engine& eng, MetricsCollector& collector, const RunOptions& opt) {
  RunTrace trace;
  trace.algorithm = opt.label.empty() ? eng.name() : opt.label;
  trace.nodes = eng.nodes();
  trace.dim = eng.dim();
  trace.rho = collector.rho();
  trace.strict = opt.strict;
  trace.oracle_mode = !eng.distributed();
  if (opt.strict && trace.oracle_mode)
    trace.note = "oracle mode: engine '" + eng.name() +
                 "' is centralized, so the strict locality audit does not apply";
  eng.start();
  collector.observe(0, eng.x_stacked(), eng.q_stacked());
  long done = 0;
  for (long k = 1; k <= opt.iters; ++k) {
    try {
      eng.round();
    } catch (const AmmError& e) {
      trace.aborted = true;
      trace.abort_reason = e.what();
      break;
    }
    collector.observe(k, eng.x_stacked(), eng.q_stacked());
    done = k;
  }
  collector.finish();
  trace.rounds = done;
  trace.x_final = eng.x_stacked();
  trace.q_final = eng.q_stacked();
  trace.declared_cost = opt.declared_cost >= 0 ? opt.declared_cost : eng.declared_cost();
  if (const NetSim* net = eng.net()) {
    trace.messages = net->message_count(false);
    trace.init_messages = net->message_count(true) - trace.messages;
    trace.observed_cost = net->observed_cost();
  } else {
    trace.observed_cost = kNan;
  }
  trace.rows = collector.take_rows();
  return trace;
}

double communication_cost(const RunTrace& trace) {
  return trace.oracle_mode ? trace.declared_cost : trace.observed_cost;
}

// ---------------------------------------------------------------------------
// CSV export

namespace {

void write_bound_columns(std::ostream& out, const BoundCurves& b, long k) {
  if (k >= 1)
    out << ',' << b.consensus(k) << ',' << b.objective_upper(k) << ',' << b.objective_lower(k);
  else
    out << ",nan,nan,nan";
}

}  // namespace

void RunTrace::write_csv(std::ostream& out, const BoundCurves* constant_curvature,
                         const BoundCurves* strong_convexity) const {
  out << std::setprecision(17);
  out << "k,obj_err_iterate,obj_err_avg,cons_err_iterate,cons_err_avg,"
         "optimality_err_iterate,optimality_err_avg,lyapunov_G,lyapunov_c";
  if (constant_curvature)
    out << ",cc_bound_consensus,cc_bound_objective_upper,cc_bound_objective_lower";
  if (strong_convexity)
    out << ",sc_bound_consensus,sc_bound_objective_upper,sc_bound_objective_lower";
  out << '\n';
  for (const TraceRow& r : rows) {
    out << r.k << ',' << r.obj_err_iterate << ',' << r.obj_err_avg << ',' << r.cons_err_iterate
        << ',' << r.cons_err_avg << ',' << r.optimality_err_iterate << ','
        << r.optimality_err_avg << ',' << r.lyapunov_G << ',' << r.lyapunov_c;
    if (constant_curvature) write_bound_columns(out, *constant_curvature, r.k);
    if (strong_convexity) write_bound_columns(out, *strong_convexity, r.k);
    out << '\n';
  }
}

void RunTrace::write_csv(const std::string& path, const BoundCurves* constant_curvature,
                         const BoundCurves* strong_convexity) const {
  std::ofstream out(path);
  if (!out) throw AmmError("trace export: cannot open '" + path + "' for writing");
  write_csv(out, constant_curvature, strong_convexity);
}

// ---------------------------------------------------------------------------
// error-bound curves

double sigma_lower_bound(const Mat& a, const Vec& m, int d) {
  const Eigen::Index nd = static_cast<Eigen::Index>(m.size()) * d;
  require(a.rows() == nd && a.cols() == nd,
          "sigma bound: curvature matrix must be Nd x Nd for N = " + std::to_string(m.size()));
  require(min_eigenvalue(a) > 0, "sigma bound: curvature matrix must be positive definite");
  Mat half_lm = (0.5 * lift_diagonal(m, d)).asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(half_lm, a, Eigen::EigenvaluesOnly |
                                                                   Eigen::Ax_lBx);
  return es.eigenvalues().maxCoeff();
}

BoundCurves constant_curvature_bounds(const ConstantCurvatureInput& in) {
  const Eigen::Index nd = in.x0.size();
  require(nd > 0 && in.x_star.size() == nd && in.v0.size() == nd && in.v_star.size() == nd,
          "bound curves: x0, v0, x*, v* must all have size N*d");
  require(in.a.rows() == nd && in.a.cols() == nd, "bound curves: curvature matrix must be Nd x Nd");
  require(in.rho > 0, "bound curves: rho must be positive");
  const double sigma = sigma_lower_bound(in.a, in.m, in.d);
  if (sigma >= 1.0)
    throw AmmError(
        "bound curves: regime violated, sigma_lower = " + num(sigma) +
        " >= 1 (the curvature matrix must strictly dominate half the gradient-Lipschitz "
        "diagonal)");
  const Vec dx = in.x0 - in.x_star;
  const double dv = (in.v0 - in.v_star).norm();
  const double xa = quad_form(in.a, dx);
  const double zg = std::sqrt(std::max(0.0, xa + dv * dv / in.rho));
  BoundCurves b;
  b.consensus_c = (dv + std::sqrt(in.rho) * zg) / in.rho;
  b.objective_upper_c =
      0.5 * (in.v0.squaredNorm() / in.rho + xa + zg * zg / (1.0 - sigma));
  b.objective_lower_c = in.v_star.norm() * (dv + std::sqrt(in.rho) * zg) / in.rho;
  b.sigma_lower = sigma;
  b.d0 = kNan;
  return b;
}

double compute_d0(const Vec& x0, const Vec& v0, const Vec& x_star, const Vec& v_star,
                  const Mat& a_avg, double rho, const Mat& Pt, int d) {
  require(rho > 0, "d0: rho must be positive");
  const Vec dx = x0 - x_star;
  const double zg_sq =
      std::max(0.0, quad_form(a_avg, dx) + (v0 - v_star).squaredNorm() / rho);
  const double hx = std::max(0.0, x0.dot(block_apply(Pt, x0, d)));
  return std::sqrt(rho * zg_sq + rho * rho * hx);
}

BoundCurves strong_convexity_bounds(const StrongConvexityInput& in) {
  const Eigen::Index nd = in.x0.size();
  require(nd > 0 && in.x_star.size() == nd && in.v0.size() == nd && in.v_star.size() == nd,
          "bound curves: x0, v0, x*, v* must all have size N*d");
  require(in.a_upper.rows() == nd && in.a_upper.cols() == nd,
          "bound curves: upper curvature matrix must be Nd x Nd");
  require(in.rho > 0, "bound curves: rho must be positive");
  require(in.eta > 0 && in.eta < 1, "bound curves: eta must lie in (0,1)");
  require(in.sigma > 0 && in.sigma < 1, "bound curves: sigma must lie in (0,1)");
  require(in.beta > 0, "bound curves: beta must be positive");
  require(in.m_rho > 0, "bound curves: m_rho must be positive");
  require(in.delta >= 0, "bound curves: Delta must be nonnegative");
  require(in.d0 >= 0, "bound curves: d0 must be nonnegative");
  if (in.beta * in.delta >= 2.0 * in.eta * in.m_rho)
    throw AmmError("bound curves: feasibility violated, beta*Delta = " +
                   num(in.beta * in.delta) + " must be below 2*eta*m_rho = " +
                   num(2.0 * in.eta * in.m_rho));
  const double dv = (in.v0 - in.v_star).norm();
  BoundCurves b;
  b.consensus_c = (in.d0 + dv) / in.rho;
  const double gap = in.delta / (2.0 * (2.0 * in.eta * in.m_rho - in.beta * in.delta)) +
                     (1.0 - in.eta) / (1.0 - in.sigma);
  b.objective_upper_c = in.d0 * in.d0 / in.rho * gap +
                        0.5 * quad_form(in.a_upper, in.x0 - in.x_star) +
                        in.v0.squaredNorm() / (2.0 * in.rho);
  b.objective_lower_c = in.v_star.norm() * (in.d0 + dv) / in.rho;
  b.sigma_lower = kNan;
  b.d0 = in.d0;
  return b;
}

// ---------------------------------------------------------------------------
// linear-rate certificate

ValidationReport CertificateInput::validate() const {
  ValidationReport report;
  const Eigen::Index nd = static_cast<Eigen::Index>(m.size()) * d;
  const bool sized = nd > 0 && h.rows() == nd && h.cols() == nd && ht.rows() == nd &&
                     ht.cols() == nd && a_avg.rows() == nd && a_avg.cols() == nd &&
                     a_upper.rows() == nd && a_upper.cols() == nd;
  report.add("matrices sized Nd x Nd", sized,
             sized ? "" : "expected side " + std::to_string(nd));
  report.add("rho positive", rho > 0, "rho = " + num(rho));
  report.add("eta in (0,1)", eta > 0 && eta < 1, "eta = " + num(eta));
  report.add("sigma in (0,1)", sigma > 0 && sigma < 1, "sigma = " + num(sigma));
  report.add("beta positive", beta > 0, "beta = " + num(beta));
  report.add("theta1, theta2 positive", theta1 > 0 && theta2 > 0,
             "theta1 = " + num(theta1) + ", theta2 = " + num(theta2));
  report.add("m_rho positive", m_rho > 0, "m_rho = " + num(m_rho));
  report.add("Delta nonnegative", delta_surrogate >= 0, "Delta = " + num(delta_surrogate));
  if (!report.ok()) return report;

  const double scalar_lhs = beta * delta_surrogate;
  const double scalar_rhs = 2.0 * eta * m_rho;
  report.add("feasibility scalar condition beta*Delta < 2*eta*m_rho", scalar_lhs < scalar_rhs,
             num(scalar_lhs) + " vs " + num(scalar_rhs));

  const Mat lm = lift_diagonal(m, d).asDiagonal();
  const Mat identity = Mat::Identity(nd, nd);
  const double range_coeff = (1.0 / (4.0 * beta) + 1.0) * delta_surrogate;
  const double range_eig =
      min_eigenvalue(sigma * a_avg - range_coeff * identity - lm / (2.0 * (1.0 - eta)));
  report.add("feasibility matrix condition on sigma*A_a", range_eig >= -1e-9,
             "smallest eigenvalue " + num(range_eig));

  const double step_coeff =
      delta_surrogate * delta_surrogate / (8.0 * eta * m_rho) + delta_surrogate;
  const double step_eig =
      min_eigenvalue(a_avg - step_coeff * identity - lm / (2.0 * (1.0 - eta)));
  report.add("step condition on A_a", step_eig > 0, "smallest eigenvalue " + num(step_eig));
  return report;
}

namespace {

struct CertificateContext {
  double lambda_ht = 0.0;
  double lambda_bar = 0.0;
  Mat identity;
  Mat lm2;       // LambdaM^2, diagonal
  Mat hhdh;      // H Ht^dagger H
  Mat s3;        // A_u^2/(rho lambda_ht) + rho lambda_bar H^{1/2} Ht^dagger H^{1/2}
};

CertificateContext build_context(const CertificateInput& ci) {
  CertificateContext ctx;
  const Eigen::Index nd = ci.ht.rows();
  Eigen::SelfAdjointEigenSolver<Mat> es(ci.ht, Eigen::EigenvaluesOnly);
  double smallest = -1.0;
  for (Eigen::Index i = 0; i < nd; ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev > kNullCutoff && (smallest < 0 || ev < smallest)) smallest = ev;
  }
  require(smallest > 0, "certificate: Ht has no eigenvalue above the null-space cutoff");
  ctx.lambda_ht = smallest;
  ctx.lambda_bar = ci.lambda_bar >= 0 ? ci.lambda_bar : lambda_max(ci.h);
  ctx.identity = Mat::Identity(nd, nd);
  ctx.lm2 = Vec(lift_diagonal(ci.m, ci.d).array().square()).asDiagonal();
  const Mat htd = symmetric_pinv(ci.ht, kNullCutoff);
  Mat hhdh = ci.h * htd * ci.h;
  ctx.hhdh = 0.5 * (hhdh + hhdh.transpose());
  const Mat hsq = symmetric_sqrt(ci.h);
  Mat cross = hsq * htd * hsq;
  Mat au2 = ci.a_upper * ci.a_upper;
  ctx.s3 = 0.5 * (au2 + au2.transpose()) / (ci.rho * ctx.lambda_ht) +
           ci.rho * ctx.lambda_bar * 0.5 * (cross + cross.transpose());
  return ctx;
}

Mat context_matrix(const CertificateInput& ci, const CertificateContext& ctx, int which,
                   double delta) {
  switch (which) {
    case 1:
      return (2.0 * ci.eta * ci.m_rho - ci.beta * ci.delta_surrogate) * ctx.identity -
             delta * ci.a_avg -
             delta * (1.0 + ci.theta1) * (1.0 + ci.theta2) / (ci.rho * ctx.lambda_ht) * ctx.lm2;
    case 2:
      return ci.rho * (1.0 - delta - ci.eta) * ci.ht -
             ci.rho * delta * (1.0 + 1.0 / ci.theta1) * ctx.hhdh;
    case 3:
      return (1.0 - ci.sigma) * ci.a_avg -
             2.0 * delta * (1.0 + ci.theta1) * (1.0 + 1.0 / ci.theta2) * ctx.s3;
    default:
      throw AmmError("certificate: matrix index must be 1, 2, or 3");
  }
}

std::array<double, 3> context_eigs(const CertificateInput& ci, const CertificateContext& ctx,
                                   double delta) {
  return {min_eigenvalue(context_matrix(ci, ctx, 1, delta)),
          min_eigenvalue(context_matrix(ci, ctx, 2, delta)),
          min_eigenvalue(context_matrix(ci, ctx, 3, delta))};
}

bool feasible(const std::array<double, 3>& eigs) {
  return eigs[0] >= -kPsdTol && eigs[1] >= -kPsdTol && eigs[2] >= -kPsdTol;
}

}  // namespace

Mat certificate_matrix(const CertificateInput& ci, int which, double delta) {
  return context_matrix(ci, build_context(ci), which, delta);
}

CertificateResult compute_delta_tilde(const CertificateInput& ci) {
  const ValidationReport report = ci.validate();
  if (!report.ok()) {
    for (const CheckResult& c : report.checks)
      if (!c.ok)
        throw AmmError("certificate: input invalid, " + c.name +
                       (c.detail.empty() ? "" : " (" + c.detail + ")"));
  }
  const CertificateContext ctx = build_context(ci);
  {
    const auto eigs = context_eigs(ci, ctx, 1e-12);
    if (!feasible(eigs)) {
      int worst = 0;
      for (int i = 1; i < 3; ++i)
        if (eigs[i] < eigs[worst]) worst = i;
      throw AmmError("certificate: infeasible at delta near zero, matrix B" +
                     std::to_string(worst + 1) + " has smallest eigenvalue " + num(eigs[worst]));
    }
  }
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(context_eigs(ci, ctx, mid)))
      lo = mid;
    else
      hi = mid;
  }
  CertificateResult res;
  res.delta_tilde = lo;
  res.min_eigs = context_eigs(ci, ctx, lo);
  res.min_eigs_above = context_eigs(ci, ctx, lo + 1e-6);
  res.binding = 1;
  for (int i = 1; i < 3; ++i)
    if (res.min_eigs[i] < res.min_eigs[res.binding - 1]) res.binding = i + 1;
  res.binding_eig = res.min_eigs[res.binding - 1];
  res.lambda_ht = ctx.lambda_ht;
  res.theta1 = ci.theta1;
  res.theta2 = ci.theta2;
  return res;
}

CertificateResult maximize_delta_tilde(const CertificateInput& ci,
                                       const std::vector<double>& theta_grid) {
  require(!theta_grid.empty(), "certificate: theta grid must be nonempty");
  for (double t : theta_grid) require(t > 0, "certificate: theta grid values must be positive");
  CertificateResult best;
  bool have = false;
  for (double t1 : theta_grid) {
    for (double t2 : theta_grid) {
      CertificateInput trial = ci;
      trial.theta1 = t1;
      trial.theta2 = t2;
      const CertificateResult res = compute_delta_tilde(trial);
      if (!have || res.delta_tilde > best.delta_tilde) {
        best = res;
        have = true;
      }
    }
  }
  return best;
}

std::string certificate_report(const CertificateInput& ci, const CertificateResult& res) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "linear-rate certificate\n"
     << "  delta_tilde:        " << res.delta_tilde << "\n"
     << "  contraction factor: " << 1.0 - res.delta_tilde << "\n"
     << "  binding matrix:     B" << res.binding << " (smallest eigenvalue " << res.binding_eig
     << ")\n"
     << "  smallest eigenvalues at delta_tilde:         B1 = " << res.min_eigs[0]
     << ", B2 = " << res.min_eigs[1] << ", B3 = " << res.min_eigs[2] << "\n"
     << "  smallest eigenvalues at delta_tilde + 1e-6:  B1 = " << res.min_eigs_above[0]
     << ", B2 = " << res.min_eigs_above[1] << ", B3 = " << res.min_eigs_above[2] << "\n"
     << "  smallest nonzero eigenvalue of Ht: " << res.lambda_ht << "\n"
     << "  theta1 = " << res.theta1 << ", theta2 = " << res.theta2 << "\n"
     << "  inputs: rho = " << ci.rho << ", eta = " << ci.eta << ", beta = " << ci.beta
     << ", sigma = " << ci.sigma << ", Delta = " << ci.delta_surrogate
     << ", m_rho = " << ci.m_rho << "\n";
  return os.str();
}

double quadratic_m_rho(const NetworkProblem& prob, double rho, const Mat& Pt,
                       const Vec& anchor_common) {
  prob.validate();
  require(Pt.rows() == prob.nodes() && Pt.cols() == prob.nodes(), "m_rho: Pt must be N x N");
  require(rho > 0, "m_rho: rho must be positive");
  const Vec anchor = anchor_common.size() == 0 ? Vec(Vec::Zero(prob.d)) : anchor_common;
  require(anchor.size() == prob.d, "m_rho: anchor must have size d");
  Mat curvature = 0.5 * rho * kron_identity(Pt, prob.d);
  for (int i = 0; i < prob.nodes(); ++i)
    curvature.block(i * prob.d, i * prob.d, prob.d, prob.d) += prob.f[i].hessian(anchor);
  return min_eigenvalue(curvature);
}

// ---------------------------------------------------------------------------
// rate fitting and order estimates

RateFit fit_rate(const std::vector<long>& ks, const std::vector<double>& ys, long k_begin,
                 long k_end) {
  require(ks.size() == ys.size(), "rate fit: ks and ys must have the same length");
  require(k_begin >= 1 && k_end >= k_begin, "rate fit: window must satisfy 1 <= k_begin <= k_end");
  std::vector<std::pair<long, double>> window;
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (ks[i] >= k_begin && ks[i] <= k_end) window.push_back({ks[i], ys[i]});
  std::sort(window.begin(), window.end());
  RateFit fit;
  std::vector<std::pair<long, double>> used;
  for (const auto& [k, y] : window) {
    if (!(y >= kFitFloor)) {  // below the floor, nonpositive, or nan
      fit.truncated = true;
      break;
    }
    used.push_back({k, y});
  }
  require(used.size() >= 2, "rate fit: fewer than two usable points in the window [" +
                                std::to_string(k_begin) + ", " + std::to_string(k_end) + "]");
  fit.points = static_cast<int>(used.size());
  fit.k_begin = used.front().first;
  fit.k_end = used.back().first;

  const auto least_squares = [&used](bool log_abscissa) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [k, y] : used) {
      const double x = log_abscissa ? std::log(static_cast<double>(k)) : static_cast<double>(k);
      const double ly = std::log(y);
      sx += x;
      sy += ly;
      sxx += x * x;
      sxy += x * ly;
    }
    const double n = static_cast<double>(used.size());
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss = 0;
    for (const auto& [k, y] : used) {
      const double x = log_abscissa ? std::log(static_cast<double>(k)) : static_cast<double>(k);
      const double r = std::log(y) - slope * x - intercept;
      ss += r * r;
    }
    return std::pair<double, double>{slope, std::sqrt(ss / n)};
  };

  const auto [pslope, pres] = least_squares(true);
  fit.power_slope = pslope;
  fit.power_residual = pres;
  const auto [gslope, gres] = least_squares(false);
  fit.geometric_factor = std::exp(gslope);
  fit.geometric_residual = gres;
  return fit;
}

double sparse_rate_estimate(double lambda2, double kappa_f) {
  require(lambda2 >= 0 && lambda2 < 1, "rate estimate: lambda2 must lie in [0, 1)");
  require(kappa_f >= 1, "rate estimate: condition number must be at least 1");
  return std::min(std::sqrt(1.0 - lambda2) / kappa_f, 1.0 - lambda2);
}

// ---------------------------------------------------------------------------
// small shared helpers

double consensus_error(const Mat& Pt, const Vec& x, int d) {
  return std::sqrt(std::max(0.0, x.dot(block_apply(Pt, x, d))));
}

Vec lipschitz_constants(const NetworkProblem& prob) {
  Vec m(prob.nodes());
  for (int i = 0; i < prob.nodes(); ++i) m(i) = prob.f[i].smoothness();
  return m;
}

}  // namespace amm
