#include <cmath>

#include "amm/engines.hpp"

namespace amm {

// helpers ---------------------------------------------------------------------

Vec network_grad(const NetworkProblem& prob, const Vec& x) {
  const int d = prob.d;
  Vec g(x.size());
  for (int i = 0; i < prob.nodes(); ++i)
    g.segment(i * d, d) = prob.f[i].grad(x.segment(i * d, d));
  return g;
}

Vec network_prox(const NetworkProblem& prob, const Vec& v, double step) {
  const int d = prob.d;
  Vec p(v.size());
  for (int i = 0; i < prob.nodes(); ++i)
    p.segment(i * d, d) = prob.h[i].prox(v.segment(i * d, d), step);
  return p;
}

double network_nonsmooth_value(const NetworkProblem& prob, const Vec& x) {
  const int d = prob.d;
  double s = 0;
  for (int i = 0; i < prob.nodes(); ++i) s += prob.h[i].value(x.segment(i * d, d));
  return s;
}

Mat symmetric_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Mat symmetric_pinv(const Mat& m, double cutoff) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  Vec lam = es.eigenvalues();
  Vec inv = Vec::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > cutoff) inv(i) = 1.0 / lam(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

void check_weight_shape(const WeightPair& wp, int n) {
  if (wp.P.rows() != n || wp.P.cols() != n || wp.Pt.rows() != n || wp.Pt.cols() != n)
    throw AmmError("engine: weight matrices must be " + std::to_string(n) + " x " +
                   std::to_string(n));
}

Vec zeros_or(const Vec& given, Eigen::Index size, const char* what) {
  if (given.size() == 0) return Vec::Zero(size);
  if (given.size() != size)
    throw AmmError(std::string("engine: ") + what + " has size " +
                   std::to_string(given.size()) + ", expected " + std::to_string(size));
  return given;
}

void check_q_sum(const Vec& q, int n, int d) {
  Vec s = Vec::Zero(d);
  for (int i = 0; i < n; ++i) s += q.segment(i * d, d);
  if (s.norm() > 1e-9 * std::max(1.0, q.norm()))
    throw AmmError("engine: initial multipliers must sum to zero across nodes (|sum| = " +
                   std::to_string(s.norm()) + ")");
}

}  // namespace

// DenseSurrogate --------------------------------------------------------------

DenseSurrogate DenseSurrogate::bregman(std::vector<BregmanKernel> kernels) {
  if (kernels.empty()) throw AmmError("dense surrogate: empty kernel list");
  DenseSurrogate s;
  s.family_ = Family::bregman;
  s.kernels_ = std::move(kernels);
  return s;
}

DenseSurrogate DenseSurrogate::quadratic(QuadraticSurrogate q) {
  if (!q.provider) throw AmmError("dense surrogate: quadratic provider must be set");
  DenseSurrogate s;
  s.family_ = Family::quadratic;
  s.quad_ = std::move(q);
  return s;
}

DenseSurrogate DenseSurrogate::conjugate(ConjugateGenerator gen) {
  DenseSurrogate s;
  s.family_ = Family::conjugate;
  s.gen_ = std::move(gen);
  return s;
}

DenseSurrogate DenseSurrogate::quadratic_plus_f(Mat c) {
  if (c.rows() != c.cols() || (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw AmmError("dense surrogate: anchor matrix must be symmetric");
  DenseSurrogate s;
  s.family_ = Family::quadratic_plus_f;
  s.c_ = std::move(c);
  return s;
}

// DensePrimalSolver -----------------------------------------------------------

DensePrimalSolver::DensePrimalSolver(const NetworkProblem& prob, const WeightPair& wp,
                                     double rho, DenseSurrogate surr, InnerSolverConfig inner)
    : prob_(&prob), rho_(rho), surr_(std::move(surr)), inner_(std::move(inner)) {
  const int n = prob.nodes(), d = prob.d;
  check_weight_shape(wp, n);
  if (rho_ <= 0) throw AmmError("engine: rho must be positive");
  h_mat_ = kron_identity(wp.P, d);

  f_is_quadratic_ = true;
  for (const auto& fi : prob.f)
    f_is_quadratic_ = f_is_quadratic_ && fi.kind() != SmoothLocal::Kind::logistic;
  if (f_is_quadratic_) {
    f_quad_ = Mat::Zero(n * d, n * d);
    f_lin_ = Vec(n * d);
    const Vec zero = Vec::Zero(d);
    for (int i = 0; i < n; ++i) {
      f_quad_.block(i * d, i * d, d, d) = prob.f[i].hessian(zero);
      f_lin_.segment(i * d, d) = prob.f[i].grad(zero);
    }
  }

  switch (surr_.family()) {
    case DenseSurrogate::Family::bregman: {
      if (static_cast<int>(surr_.kernels().size()) != n)
        throw AmmError("dense surrogate: kernel count does not match the node count");
      for (const auto& k : surr_.kernels())
        if (k.dim() != d) throw AmmError("dense surrogate: kernel block size mismatch");
      break;
    }
    case DenseSurrogate::Family::quadratic: {
      const auto& q = surr_.quadratic_surrogate();
      if (q.a_lower.rows() != n * d || q.a_upper.rows() != n * d)
        throw AmmError("dense surrogate: spectral bounds must be " + std::to_string(n * d) +
                       " square");
      break;
    }
    case DenseSurrogate::Family::conjugate: {
      if (surr_.generator().nodes() != n || surr_.generator().dim() != d)
        throw AmmError("dense surrogate: generator shape does not match the problem");
      break;
    }
    case DenseSurrogate::Family::quadratic_plus_f: {
      if (surr_.anchor_matrix().rows() != n * d)
        throw AmmError("dense surrogate: anchor matrix must be " + std::to_string(n * d) +
                       " square");
      break;
    }
  }
}

Vec DensePrimalSolver::solve(long k, const Vec& anchor, const Vec& q, bool with_h,
                             double* residual) const {
  const NetworkProblem& prob = *prob_;
  const int n = prob.nodes(), d = prob.d;
  const bool use_h = with_h && !prob.h_all_zero();
  double res = 0.0;
  Vec xn;

  auto run_fista = [&](const CompositeProblem& pb) {
    auto sol = prox_gradient_minimize(pb, anchor, inner_);
    if (!sol.converged)
      throw AmmError("dense primal solve stalled at residual " + std::to_string(sol.residual));
    res = sol.residual;
    return sol.x;
  };
  auto prox_or_identity = [&](const Vec& v, double step) {
    return use_h ? network_prox(prob, v, step) : v;
  };
  auto nonsmooth_or_zero = [&](const Vec& v) {
    return use_h ? network_nonsmooth_value(prob, v) : 0.0;
  };

  switch (surr_.family()) {
    case DenseSurrogate::Family::bregman: {
      const auto& kernels = surr_.kernels();
      // the penalty terms of the Bregman distance cancel against rho/2 |x|^2_H,
      // leaving sum_i psi_i(x_i) plus a linear term
      Vec c = q + network_grad(prob, anchor) + rho_ * (h_mat_ * anchor);
      bool all_quadratic = true;
      for (int i = 0; i < n; ++i) {
        c.segment(i * d, d) -= kernels[i].grad(anchor.segment(i * d, d), anchor.segment(i * d, d));
        all_quadratic = all_quadratic && kernels[i].quadratic_at_anchor();
      }
      if (all_quadratic && !use_h) {
        Mat big = Mat::Zero(n * d, n * d);
        Vec rhs = -c;
        for (int i = 0; i < n; ++i) {
          const Vec ai = anchor.segment(i * d, d);
          big.block(i * d, i * d, d, d) = kernels[i].quad_matrix(ai);
          rhs.segment(i * d, d) -= kernels[i].grad(Vec::Zero(d), ai);
        }
        xn = big.ldlt().solve(rhs);
        res = (big * xn - rhs).norm();
      } else {
        CompositeProblem pb;
        pb.smooth_value = [&](const Vec& x) {
          double s = c.dot(x);
          for (int i = 0; i < n; ++i)
            s += kernels[i].value(x.segment(i * d, d), anchor.segment(i * d, d));
          return s;
        };
        pb.smooth_grad = [&](const Vec& x) {
          Vec g = c;
          for (int i = 0; i < n; ++i)
            g.segment(i * d, d) +=
                kernels[i].grad(x.segment(i * d, d), anchor.segment(i * d, d));
          return g;
        };
        double lip = 0;
        for (const auto& kr : kernels) lip = std::max(lip, kr.smoothness());
        pb.lipschitz = lip;
        pb.prox = prox_or_identity;
        pb.nonsmooth_value = nonsmooth_or_zero;
        xn = run_fista(pb);
      }
      break;
    }
    case DenseSurrogate::Family::quadratic: {
      const Mat a = surr_.quadratic_surrogate().provider(static_cast<int>(k), anchor);
      const Vec fg = network_grad(prob, anchor);
      const Mat lhs = a + rho_ * h_mat_;
      if (!use_h) {
        const Vec rhs = a * anchor - fg - q;
        xn = lhs.ldlt().solve(rhs);
        res = (lhs * xn - rhs).norm();
      } else {
        CompositeProblem pb;
        pb.smooth_value = [&](const Vec& x) {
          const Vec dx = x - anchor;
          return 0.5 * dx.dot(a * dx) + fg.dot(x) + 0.5 * rho_ * x.dot(h_mat_ * x) + q.dot(x);
        };
        pb.smooth_grad = [&](const Vec& x) { return Vec(a * (x - anchor) + fg + rho_ * (h_mat_ * x) + q); };
        pb.lipschitz = lambda_max(lhs);
        pb.prox = prox_or_identity;
        pb.nonsmooth_value = nonsmooth_or_zero;
        xn = run_fista(pb);
      }
      break;
    }
    case DenseSurrogate::Family::conjugate: {
      if (use_h)
        throw AmmError("conjugate surrogates support smooth problems only");
      const auto& gen = surr_.generator();
      const Vec w = gen.inverse_grad(anchor) - rho_ * (h_mat_ * anchor) -
                    network_grad(prob, anchor) - q;
      xn = gen.grad(w);
      res = 0.0;
      break;
    }
    case DenseSurrogate::Family::quadratic_plus_f: {
      const Mat& cmat = surr_.anchor_matrix();
      if (f_is_quadratic_ && !use_h) {
        const Mat lhs = cmat + f_quad_ + rho_ * h_mat_;
        const Vec rhs = cmat * anchor - f_lin_ - q;
        xn = lhs.ldlt().solve(rhs);
        res = (lhs * xn - rhs).norm();
      } else {
        CompositeProblem pb;
        pb.smooth_value = [&](const Vec& x) {
          const Vec dx = x - anchor;
          double s = 0.5 * dx.dot(cmat * dx) + 0.5 * rho_ * x.dot(h_mat_ * x) + q.dot(x);
          for (int i = 0; i < n; ++i) s += prob.f[i].value(x.segment(i * d, d));
          return s;
        };
        pb.smooth_grad = [&](const Vec& x) {
          return Vec(cmat * (x - anchor) + network_grad(prob, x) + rho_ * (h_mat_ * x) + q);
        };
        pb.lipschitz = lambda_max(Mat(cmat + rho_ * h_mat_)) + prob.sum_smoothness();
        pb.prox = prox_or_identity;
        pb.nonsmooth_value = nonsmooth_or_zero;
        xn = run_fista(pb);
      }
      break;
    }
  }
  if (residual) *residual = res;
  return xn;
}

// ReferenceAmm ----------------------------------------------------------------

ReferenceAmm::ReferenceAmm(NetworkProblem prob, WeightPair wp, DenseSurrogate surr,
                           DenseEngineConfig cfg)
    : prob_(std::move(prob)),
      wp_(std::move(wp)),
      cfg_(std::move(cfg)),
      solver_(prob_, wp_, cfg_.rho, std::move(surr), cfg_.inner) {
  prob_.validate();
  const long size = static_cast<long>(prob_.nodes()) * prob_.d;
  if (size > 2000)
    throw AmmError("dense engine: N*d = " + std::to_string(size) +
                   " exceeds the 2000 cap for materialized penalties");
  if (solver_.surrogate().family() == DenseSurrogate::Family::conjugate &&
      !prob_.h_all_zero())
    throw AmmError("dense engine: conjugate surrogates require all nonsmooth parts zero");
  ht_mat_ = kron_identity(wp_.Pt, prob_.d);
  ht_sqrt_ = symmetric_sqrt(ht_mat_);
}

void ReferenceAmm::start() {
  const Eigen::Index size = static_cast<Eigen::Index>(prob_.nodes()) * prob_.d;
  x_ = zeros_or(cfg_.x0, size, "x0");
  q_ = zeros_or(cfg_.q0, size, "q0");
  check_q_sum(q_, prob_.nodes(), prob_.d);
  if (cfg_.track_v) {
    v_ = symmetric_pinv(ht_sqrt_) * q_;
    if ((ht_sqrt_ * v_ - q_).norm() > 1e-8 * std::max(1.0, q_.norm()))
      throw AmmError(
          "dense engine: initial multipliers lie outside the range of the penalty square root");
  }
  k_ = 0;
  started_ = true;
}

void ReferenceAmm::round() {
  if (!started_) throw AmmError("engine: start() must run before round()");
  const Vec xn = solver_.solve(k_, x_, q_, /*with_h=*/true, &last_residual_);
  q_ += cfg_.rho * (ht_mat_ * xn);
  if (cfg_.track_v) v_ += cfg_.rho * (ht_sqrt_ * xn);
  x_ = xn;
  ++k_;
}

const Vec& ReferenceAmm::v() const {
  if (!cfg_.track_v) throw AmmError("dense engine: square-root dual tracking is off");
  return v_;
}

double ReferenceAmm::v_consistency() const {
  if (!cfg_.track_v) return 0.0;
  return (ht_sqrt_ * v_ - q_).norm();
}

// SplitEngine -----------------------------------------------------------------

SplitEngine::SplitEngine(NetworkProblem prob, WeightPair wp, DenseSurrogate surr,
                         DenseEngineConfig cfg)
    : prob_(std::move(prob)),
      wp_(std::move(wp)),
      cfg_(std::move(cfg)),
      solver_(prob_, wp_, cfg_.rho, std::move(surr), cfg_.inner) {
  prob_.validate();
  const long size = static_cast<long>(prob_.nodes()) * prob_.d;
  if (size > 2000)
    throw AmmError("dense engine: N*d = " + std::to_string(size) +
                   " exceeds the 2000 cap for materialized penalties");
  if (cfg_.q0.size() != 0 && cfg_.q0.norm() > 0)
    throw AmmError("split engine: requires zero initial multipliers");
  ht_mat_ = kron_identity(wp_.Pt, prob_.d);
}

void SplitEngine::start() {
  const Eigen::Index size = static_cast<Eigen::Index>(prob_.nodes()) * prob_.d;
  x_ = zeros_or(cfg_.x0, size, "x0");
  q_ = Vec::Zero(size);
  z_ = x_;
  k_ = 0;
  started_ = true;
}

void SplitEngine::round() {
  if (!started_) throw AmmError("engine: start() must run before round()");
  z_ = solver_.solve(k_, x_, q_, /*with_h=*/false, &last_residual_);
  x_ = network_prox(prob_, z_, 1.0 / cfg_.rho);
  q_ += cfg_.rho * (ht_mat_ * z_);
  ++k_;
}

}  // namespace amm
