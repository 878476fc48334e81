#include "amm/surrogates.hpp"

#include <cmath>
#include <string>

namespace amm {

namespace {

std::string block_name(int i, int j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

// largest |p_ij| off the diagonal times N — the locally computable bound on
// lambda_max for neighbor-sparse weight matrices
double decentralized_lambda_bound(const Mat& P) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(P(i, j)));
  return m * static_cast<double>(P.rows());
}

}  // namespace

// BregmanKernel ---------------------------------------------------------------

BregmanKernel BregmanKernel::scaled_identity(int dim, double eps) {
  BregmanKernel k;
  k.kind_ = Kind::scaled_identity;
  k.dim_ = dim;
  k.eps_ = eps;
  return k;
}

BregmanKernel BregmanKernel::proximal(SmoothLocal r, double eps) {
  BregmanKernel k;
  k.kind_ = Kind::proximal;
  k.dim_ = r.dim();
  k.eps_ = eps;
  k.smooth_ = std::move(r);
  return k;
}

BregmanKernel BregmanKernel::hessian_plus(SmoothLocal f, double eps) {
  BregmanKernel k;
  k.kind_ = Kind::hessian_plus;
  k.dim_ = f.dim();
  k.eps_ = eps;
  k.smooth_ = std::move(f);
  return k;
}

BregmanKernel BregmanKernel::data_quadratic(Mat q) {
  if (q.rows() != q.cols() || (q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw AmmError("data_quadratic kernel: matrix must be symmetric");
  BregmanKernel k;
  k.kind_ = Kind::data_quadratic;
  k.dim_ = static_cast<int>(q.rows());
  k.q_ = std::move(q);
  return k;
}

double BregmanKernel::modulus() const {
  switch (kind_) {
    case Kind::data_quadratic:
      return lambda_min(q_);
    default:
      return eps_;  // the smooth parts only add curvature
  }
}

double BregmanKernel::smoothness() const {
  switch (kind_) {
    case Kind::scaled_identity:
      return eps_;
    case Kind::proximal:
    case Kind::hessian_plus:
      return eps_ + smooth_->smoothness();
    case Kind::data_quadratic:
      return lambda_max(q_);
  }
  return eps_;
}

bool BregmanKernel::quadratic_at_anchor() const {
  if (kind_ != Kind::proximal) return true;
  return smooth_->kind() != SmoothLocal::Kind::logistic;
}

bool BregmanKernel::anchor_varying() const {
  if (kind_ != Kind::proximal && kind_ != Kind::hessian_plus) return false;
  return smooth_->kind() == SmoothLocal::Kind::logistic;
}

double BregmanKernel::value(const Vec& x, const Vec& anchor) const {
  switch (kind_) {
    case Kind::scaled_identity:
      return 0.5 * eps_ * x.squaredNorm();
    case Kind::proximal:
      return smooth_->value(x - anchor) + 0.5 * eps_ * x.squaredNorm();
    case Kind::hessian_plus:
      return 0.5 * x.dot(smooth_->hessian(anchor) * x) + 0.5 * eps_ * x.squaredNorm();
    case Kind::data_quadratic:
      return 0.5 * x.dot(q_ * x);
  }
  return 0.0;
}

Vec BregmanKernel::grad(const Vec& x, const Vec& anchor) const {
  switch (kind_) {
    case Kind::scaled_identity:
      return eps_ * x;
    case Kind::proximal:
      return smooth_->grad(x - anchor) + eps_ * x;
    case Kind::hessian_plus:
      return smooth_->hessian(anchor) * x + eps_ * x;
    case Kind::data_quadratic:
      return q_ * x;
  }
  return Vec::Zero(dim_);
}

Mat BregmanKernel::hessian(const Vec& x, const Vec& anchor) const {
  switch (kind_) {
    case Kind::scaled_identity:
      return eps_ * Mat::Identity(dim_, dim_);
    case Kind::proximal:
      return smooth_->hessian(x - anchor) + eps_ * Mat::Identity(dim_, dim_);
    case Kind::hessian_plus:
      return smooth_->hessian(anchor) + eps_ * Mat::Identity(dim_, dim_);
    case Kind::data_quadratic:
      return q_;
  }
  return Mat::Zero(dim_, dim_);
}

Mat BregmanKernel::quad_matrix(const Vec& anchor) const {
  if (!quadratic_at_anchor())
    throw AmmError("quad_matrix: kernel is not quadratic once anchored");
  return hessian(anchor, anchor);
}

ValidationReport validate_bregman(const std::vector<BregmanKernel>& kernels, const WeightPair& wp,
                                  double rho, bool decentralized_bound,
                                  const std::vector<Vec>* anchors) {
  ValidationReport rep;
  const int n = static_cast<int>(wp.P.rows());
  if (static_cast<int>(kernels.size()) != n) {
    rep.add("kernel count", false,
             "expected " + std::to_string(n) + " kernels, got " + std::to_string(kernels.size()));
    return rep;
  }
  const int d = kernels.front().dim();
  bool dims_ok = true;
  for (const auto& k : kernels) dims_ok = dims_ok && k.dim() == d;
  rep.add("kernel dimensions", dims_ok, dims_ok ? "" : "kernels disagree on the block size");
  if (!dims_ok) return rep;

  double min_modulus = std::numeric_limits<double>::infinity();
  for (const auto& k : kernels) min_modulus = std::min(min_modulus, k.modulus());
  rep.add("kernel moduli positive", min_modulus > 0,
           "min modulus = " + std::to_string(min_modulus));

  const double bound =
      decentralized_bound ? decentralized_lambda_bound(wp.P) : lambda_max(wp.P);
  const bool sufficient = min_modulus >= rho * bound - 1e-12;
  rep.add("sufficient curvature condition", sufficient,
           "min modulus " + std::to_string(min_modulus) + " vs rho*lambda bound " +
               std::to_string(rho * bound));

  // exact condition: blockdiag(psi'') - rho * P (x) I >= -1e-9; non-quadratic
  // kernels contribute their conservative modulus * I block
  Mat big = -rho * kron_identity(wp.P, d);
  bool conservative = false;
  for (int i = 0; i < n; ++i) {
    const Vec anchor = anchors ? (*anchors)[i] : Vec::Zero(d);
    if (kernels[i].quadratic_at_anchor()) {
      big.block(i * d, i * d, d, d) += kernels[i].quad_matrix(anchor);
    } else {
      big.block(i * d, i * d, d, d) += kernels[i].modulus() * Mat::Identity(d, d);
      conservative = true;
    }
  }
  const double ev = lambda_min(big);
  std::string detail = "min eigenvalue = " + std::to_string(ev);
  if (conservative) detail += " (modulus*I used for non-quadratic kernels)";
  rep.add("exact curvature condition", ev >= -1e-9, detail);
  return rep;
}

// ConjugateGenerator ----------------------------------------------------------

ConjugateGenerator ConjugateGenerator::separable_smooth(std::vector<SmoothLocal> g, double eps) {
  if (g.empty()) throw AmmError("separable_smooth generator: empty block list");
  ConjugateGenerator c;
  c.kind_ = Kind::separable_smooth;
  c.n_ = static_cast<int>(g.size());
  c.d_ = g.front().dim();
  for (const auto& gi : g)
    if (gi.dim() != c.d_) throw AmmError("separable_smooth generator: block size mismatch");
  c.eps_ = eps;
  c.g_ = std::move(g);
  return c;
}

ConjugateGenerator ConjugateGenerator::quadratic(Mat g, const Topology& topo, int d) {
  const int n = topo.nodes();
  if (g.rows() != n * d || g.cols() != n * d)
    throw AmmError("quadratic generator: matrix must be " + std::to_string(n * d) + " square");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw AmmError("quadratic generator: matrix must be symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || topo.is_edge(i, j)) continue;
      if (g.block(i * d, j * d, d, d).cwiseAbs().maxCoeff() > 0)
        throw AmmError("quadratic generator: nonzero block at non-adjacent pair " +
                       block_name(i, j));
    }
  ConjugateGenerator c;
  c.kind_ = Kind::quadratic;
  c.n_ = n;
  c.d_ = d;
  c.mat_ = std::move(g);
  c.closed_neighborhoods_.resize(n);
  for (int i = 0; i < n; ++i) {
    c.closed_neighborhoods_[i] = topo.neighbors(i);
    c.closed_neighborhoods_[i].push_back(i);
  }
  return c;
}

double ConjugateGenerator::gamma_lo() const {
  return kind_ == Kind::separable_smooth ? eps_ : lambda_min(mat_);
}

double ConjugateGenerator::gamma_hi() const {
  if (kind_ == Kind::quadratic) return lambda_max(mat_);
  double m = 0.0;
  for (const auto& gi : g_) m = std::max(m, gi.smoothness());
  return eps_ + m;
}

Vec ConjugateGenerator::grad(const Vec& w) const {
  if (kind_ == Kind::quadratic) return mat_ * w;
  Vec out(n_ * d_);
  for (int i = 0; i < n_; ++i) {
    const Vec wi = w.segment(i * d_, d_);
    out.segment(i * d_, d_) = g_[i].grad(wi) + eps_ * wi;
  }
  return out;
}

Vec ConjugateGenerator::grad_block(int i, const std::function<Vec(int)>& fetch) const {
  if (kind_ == Kind::separable_smooth) {
    const Vec wi = fetch(i);
    return g_[i].grad(wi) + eps_ * wi;
  }
  Vec out = Vec::Zero(d_);
  for (int j : closed_neighborhoods_[i]) out += mat_.block(i * d_, j * d_, d_, d_) * fetch(j);
  return out;
}

Vec ConjugateGenerator::inverse_grad(const Vec& x) const {
  if (kind_ == Kind::quadratic) return mat_.ldlt().solve(x);
  Vec w(n_ * d_);
  for (int i = 0; i < n_; ++i) {
    const Vec xi = x.segment(i * d_, d_);
    // damped Newton on the strongly monotone equation grad g_i(t) + eps t = x_i
    Vec t = xi / eps_;
    bool done = false;
    for (int it = 0; it < 200 && !done; ++it) {
      Vec res = g_[i].grad(t) + eps_ * t - xi;
      if (res.norm() <= 1e-13 * std::max(1.0, xi.norm())) {
        done = true;
        break;
      }
      Mat jac = g_[i].hessian(t) + eps_ * Mat::Identity(d_, d_);
      Vec dir = jac.ldlt().solve(res);
      double step = 1.0;
      const double base = res.norm();
      for (int half = 0; half < 40; ++half) {
        Vec cand = t - step * dir;
        if ((g_[i].grad(cand) + eps_ * cand - xi).norm() < base) {
          t = cand;
          break;
        }
        step *= 0.5;
        if (half == 39) throw AmmError("inverse_grad: line search failed at block " +
                                       std::to_string(i + 1));
      }
    }
    if (!done && (g_[i].grad(t) + eps_ * t - xi).norm() > 1e-10 * std::max(1.0, xi.norm()))
      throw AmmError("inverse_grad: Newton did not converge at block " + std::to_string(i + 1));
    w.segment(i * d_, d_) = t;
  }
  return w;
}

const Mat& ConjugateGenerator::matrix() const {
  if (kind_ != Kind::quadratic) throw AmmError("matrix(): generator is not quadratic");
  return mat_;
}

const std::vector<int>& ConjugateGenerator::closed_neighborhood(int i) const {
  if (kind_ != Kind::quadratic)
    throw AmmError("closed_neighborhood(): generator is not quadratic");
  return closed_neighborhoods_.at(i);
}

ValidationReport validate_conjugate(const ConjugateGenerator& gen, const WeightPair& wp,
                                    double rho) {
  ValidationReport rep;
  const double lo = gen.gamma_lo(), hi = gen.gamma_hi();
  rep.add("generator strong-convexity interval", lo > 0 && hi >= lo,
           "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const double margin = 1.0 / hi - rho * lambda_max(wp.P);
  rep.add("conjugate penalty condition", margin >= -1e-9,
           "1/gamma_hi - rho*lambda_max(P) = " + std::to_string(margin));
  bool local = true;
  std::string detail = "structural (separable blocks)";
  if (!gen.separable()) {
    detail = "neighbor-sparse matrix";
    const Mat& g = gen.matrix();
    const int d = gen.dim();
    for (int i = 0; i < gen.nodes() && local; ++i) {
      std::vector<bool> allowed(gen.nodes(), false);
      for (int j : gen.closed_neighborhood(i)) allowed[j] = true;
      for (int j = 0; j < gen.nodes() && local; ++j)
        if (!allowed[j] && g.block(i * d, j * d, d, d).cwiseAbs().maxCoeff() > 0) {
          local = false;
          detail = "nonzero block at non-adjacent pair " + block_name(i, j);
        }
    }
  }
  rep.add("block locality", local, detail);
  return rep;
}

// QuadraticSurrogate ----------------------------------------------------------

QuadraticSurrogate QuadraticSurrogate::constant(const Mat& a) {
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw AmmError("quadratic surrogate: matrix must be symmetric");
  QuadraticSurrogate s;
  Mat sym = 0.5 * (a + a.transpose());
  s.provider = [sym](int, const Vec&) { return sym; };
  s.a_lower = sym;
  s.a_upper = sym;
  return s;
}

double QuadraticSurrogate::delta() const {
  Mat diff = a_upper - a_lower;
  return diff.cwiseAbs().maxCoeff() == 0 ? 0.0
                                         : std::max(std::abs(lambda_max(diff)),
                                                    std::abs(lambda_min(diff)));
}

QuadraticSurrogate lift_bregman(const std::vector<BregmanKernel>& kernels, const WeightPair& wp,
                                double rho) {
  if (kernels.empty()) throw AmmError("lift_bregman: empty kernel list");
  for (const auto& k : kernels)
    if (!k.quadratic_at_anchor())
      throw AmmError("lift_bregman: all kernels must be quadratic once anchored");
  const int n = static_cast<int>(kernels.size());
  const int d = kernels.front().dim();
  const Mat penalty = rho * kron_identity(wp.P, d);

  std::vector<BregmanKernel> copy = kernels;
  QuadraticSurrogate s;
  s.provider = [copy, penalty, n, d](int, const Vec& anchor) {
    Mat a = -penalty;
    for (int i = 0; i < n; ++i)
      a.block(i * d, i * d, d, d) += copy[i].quad_matrix(anchor.segment(i * d, d));
    return a;
  };

  s.a_lower = -penalty;
  s.a_upper = -penalty;
  const Vec zero = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    const auto& k = kernels[i];
    if (k.anchor_varying()) {
      s.a_lower.block(i * d, i * d, d, d) += k.modulus() * Mat::Identity(d, d);
      s.a_upper.block(i * d, i * d, d, d) += k.smoothness() * Mat::Identity(d, d);
    } else {
      const Mat q = k.quad_matrix(zero);
      s.a_lower.block(i * d, i * d, d, d) += q;
      s.a_upper.block(i * d, i * d, d, d) += q;
    }
  }
  return s;
}

// SqProvider ------------------------------------------------------------------

SqProvider SqProvider::constant(const Mat& g) {
  SqProvider s;
  Mat sym = 0.5 * (g + g.transpose());
  s.provider = [sym](int) { return sym; };
  s.gamma_lo = lambda_min(sym);
  s.gamma_hi = lambda_max(sym);
  return s;
}

ValidationReport validate_sq_matrix(const Mat& g, const SqProvider& sq, const Topology& topo,
                                    int d, const WeightPair& wp, double rho) {
  ValidationReport rep;
  const int n = topo.nodes();
  if (g.rows() != n * d || g.cols() != n * d) {
    rep.add("G size", false, "expected " + std::to_string(n * d) + " square");
    return rep;
  }
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  rep.add("G symmetry", asym <= 1e-10, "max asymmetry = " + std::to_string(asym));

  bool sparse = true;
  std::string where;
  for (int i = 0; i < n && sparse; ++i)
    for (int j = 0; j < n && sparse; ++j) {
      if (i == j || topo.is_edge(i, j)) continue;
      if (g.block(i * d, j * d, d, d).cwiseAbs().maxCoeff() > 0) {
        sparse = false;
        where = "nonzero block at non-adjacent pair " + block_name(i, j);
      }
    }
  rep.add("G neighbor sparsity", sparse, where);

  const double lo = lambda_min(g), hi = lambda_max(g);
  rep.add("G spectral interval", lo >= sq.gamma_lo - 1e-9 && hi <= sq.gamma_hi + 1e-9 &&
                                      sq.gamma_lo > 0,
           "eigs in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], declared [" +
               std::to_string(sq.gamma_lo) + ", " + std::to_string(sq.gamma_hi) + "]");

  if (lo > 0) {
    const Mat inv_penalty = g.inverse() - rho * kron_identity(wp.P, d);
    const double ev = lambda_min(Mat(0.5 * (inv_penalty + inv_penalty.transpose())));
    rep.add("G inverse penalty condition", ev >= -1e-9, "min eigenvalue = " + std::to_string(ev));
  } else {
    rep.add("G inverse penalty condition", false, "G is singular");
  }
  return rep;
}

}  // namespace amm
