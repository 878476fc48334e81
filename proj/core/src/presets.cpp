#include "amm/presets.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace amm {

namespace {

[[noreturn]] void fail(const std::string& preset, const std::string& what) {
  throw AmmError("preset " + preset + ": " + what);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Vec sym_eigenvalues(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  return es.eigenvalues();
}

// symmetric PSD check; on failure appends the offending eigenvalue
bool is_psd(const Mat& m, std::string* detail) {
  Vec lam = sym_eigenvalues(m);
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam(0) < -1e-9 * scale) {
    if (detail) *detail = " (min eigenvalue " + num(lam(0)) + ")";
    return false;
  }
  return true;
}

bool is_pd(const Mat& m, std::string* detail) {
  Vec lam = sym_eigenvalues(m);
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam(0) <= 1e-10 * scale) {
    if (detail) *detail = " (min eigenvalue " + num(lam(0)) + ")";
    return false;
  }
  return true;
}

// null space of a symmetric PSD matrix equals the consensus direction:
// the all-one vector is annihilated and the second eigenvalue is positive
bool null_is_consensus(const Mat& m) {
  Vec lam = sym_eigenvalues(m);
  const int n = static_cast<int>(m.rows());
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if ((m * Vec::Ones(n)).cwiseAbs().maxCoeff() > 1e-8 * scale) return false;
  return n < 2 || lam(1) > 1e-9 * scale;
}

std::string pair_name(int i, int j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

// Symmetric averaging matrix tied to the graph: rows sum to one, nonzeros only
// on the closed neighborhoods, spectral distance from the consensus projector
// below one. `nonneg` additionally requires entrywise nonnegativity (checked
// before the spectral property so sign violations are reported as such).
void require_average_matrix(const std::string& preset, const std::string& tag, const Mat& w,
                            const Topology& topo, bool nonneg = false) {
  const int n = topo.nodes();
  if (w.rows() != n || w.cols() != n)
    fail(preset, tag + " must be " + std::to_string(n) + " x " + std::to_string(n));
  double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) fail(preset, tag + " not symmetric");
  for (int i = 0; i < n; ++i) {
    double s = w.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9)
      fail(preset, tag + " rows must sum to 1 (row " + std::to_string(i + 1) + " sums to " +
                       num(s) + ")");
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !topo.is_edge(i, j) && std::abs(w(i, j)) > 1e-12)
        fail(preset, tag + " has a nonzero entry at non-adjacent pair " + pair_name(i, j));
  if (nonneg)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (w(i, j) < -1e-12)
          fail(preset, tag + " entries must be nonnegative (entry " + pair_name(i, j) + " = " +
                           num(w(i, j)) + ")");
  Mat centered = w - Mat::Constant(n, n, 1.0 / n);
  Vec lam = sym_eigenvalues(centered);
  double radius = lam.cwiseAbs().maxCoeff();
  if (radius >= 1.0 - 1e-9)
    fail(preset, "‖" + tag + " − 𝟏𝟏ᵀ/N‖ must be < 1 (spectral norm " + num(radius) + ")");
}

// Row-stochastic matrix with positive entries exactly on the closed
// neighborhoods (no symmetry demanded of the matrix itself).
void require_stochastic_neighbor_matrix(const std::string& preset, const std::string& tag,
                                        const Mat& w, const Topology& topo) {
  const int n = topo.nodes();
  if (w.rows() != n || w.cols() != n)
    fail(preset, tag + " must be " + std::to_string(n) + " x " + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    double s = w.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9)
      fail(preset, tag + " rows must sum to 1 (row " + std::to_string(i + 1) + " sums to " +
                       num(s) + ")");
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const bool closed = (i == j) || topo.is_edge(i, j);
      if (closed && w(i, j) <= 1e-12)
        fail(preset, tag + " entries on the closed neighborhood must be positive (entry " +
                         pair_name(i, j) + " = " + num(w(i, j)) + ")");
      if (!closed && std::abs(w(i, j)) > 1e-12)
        fail(preset, tag + " has a nonzero entry at non-adjacent pair " + pair_name(i, j));
    }
}

void require_smooth_only(const std::string& preset, const NetworkProblem& prob) {
  if (!prob.h_all_zero()) fail(preset, "requires all nonsmooth parts zero");
}

void require_nonsmooth_only(const std::string& preset, const NetworkProblem& prob) {
  if (!prob.f_all_zero()) fail(preset, "requires all smooth parts zero");
}

Mat node_degrees(const Topology& topo) {
  const int n = topo.nodes();
  Mat d = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) d(i, i) = static_cast<double>(topo.neighbors(i).size());
  return d;
}

std::vector<BregmanKernel> uniform_kernels(int n, int d, double eps) {
  std::vector<BregmanKernel> k;
  k.reserve(n);
  for (int i = 0; i < n; ++i) k.push_back(BregmanKernel::scaled_identity(d, eps));
  return k;
}

Mat block_hessian(const NetworkProblem& prob, const Vec& anchor) {
  const int n = prob.nodes(), d = prob.d;
  Mat h = Mat::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i)
    h.block(i * d, i * d, d, d) = prob.f[i].hessian(anchor.segment(i * d, d));
  return h;
}

double max_smoothness(const NetworkProblem& prob) {
  double m = 0.0;
  for (const auto& f : prob.f) m = std::max(m, f.smoothness());
  return m;
}

// ---------------------------------------------------------------------------

Preset make_extra(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "extra";
  const int n = prob.nodes(), d = prob.d;
  require_smooth_only(id, prob);
  if (p.alpha <= 0) fail(id, "α must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo);
  Mat wt = p.W_tilde.size() ? p.W_tilde : Mat(0.5 * (Mat::Identity(n, n) + w));
  require_average_matrix(id, "W̃", wt, prob.topo);
  std::string why;
  Mat diff = wt - w;
  if (!is_psd(diff, &why)) fail(id, "W̃ − W not PSD" + why);
  if (!null_is_consensus(diff)) fail(id, "Null(W̃ − W) must be span(1)");
  if (!is_pd(wt, &why)) fail(id, "W̃ not positive definite" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::quadratic_update;
  out.nodes = n;
  out.dim = d;
  out.rho = 1.0 / p.alpha;
  out.published_cost = 2.0;
  out.weights = WeightPair{Mat(Mat::Identity(n, n) - wt), diff};
  out.step_matrices = SqProvider::constant(p.alpha * Mat::Identity(n * d, n * d));
  out.q0_map = diff / p.alpha;
  out.q0_fixed = true;  // the dual is the running sum of the weighted iterates
  return out;
}

Preset make_id_fbbs(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "id_fbbs";
  const int n = prob.nodes(), d = prob.d;
  require_smooth_only(id, prob);
  if (p.alpha <= 0) fail(id, "α must be positive");
  Mat wt = p.W_tilde.size() ? p.W_tilde : (p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo));
  require_average_matrix(id, "W̃", wt, prob.topo);
  std::string why;
  if (!is_pd(wt, &why)) fail(id, "W̃ not positive definite" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::quadratic_update;
  out.nodes = n;
  out.dim = d;
  out.rho = 1.0 / p.alpha;
  out.published_cost = 2.0;
  Mat pmat = Mat::Identity(n, n) - wt;
  out.weights = WeightPair{pmat, pmat};
  out.step_matrices = SqProvider::constant(p.alpha * Mat::Identity(n * d, n * d));
  out.q0_map = Mat::Zero(n, n);
  return out;
}

Preset make_dqm(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "dqm";
  const int n = prob.nodes(), d = prob.d;
  require_smooth_only(id, prob);
  if (p.c <= 0) fail(id, "c must be positive");
  const double c = p.c;
  Mat lap = build_laplacian(prob.topo).P;
  Mat deg = node_degrees(prob.topo);
  // 2c diag(deg) - c L = c (deg + adjacency): the anchor-independent part
  Mat base = c * kron_identity(Mat(2.0 * deg - lap), d);
  NetworkProblem fcopy = prob;

  QuadraticSurrogate surr;
  surr.provider = [base, fcopy](int, const Vec& anchor) -> Mat {
    return base + block_hessian(fcopy, anchor);
  };
  surr.a_lower = base;
  surr.a_upper = base + max_smoothness(prob) * Mat::Identity(n * d, n * d);
  std::string why;
  if (!is_psd(surr.provider(0, Vec::Zero(n * d)), &why))
    fail(id, "2c·diag(|𝒩|)⊗I + ∇²f − cL not PSD" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::dense;
  out.nodes = n;
  out.dim = d;
  out.rho = c;
  out.published_cost = 2.0;
  out.weights = WeightPair{lap, lap};
  out.dense_surrogate = std::move(surr);
  out.q0_map = Mat::Zero(n, n);
  return out;
}

Preset make_pgc(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "pgc";
  const int n = prob.nodes(), d = prob.d;
  Vec beta = p.beta.size() ? p.beta : Vec(Vec::Ones(n));
  if (beta.size() != n) fail(id, "β must have one entry per node");
  for (int i = 0; i < n; ++i)
    if (beta(i) <= 0) fail(id, "β entries must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_stochastic_neighbor_matrix(id, "W", w, prob.topo);
  Mat wt = p.W_tilde.size() ? p.W_tilde : Mat(0.5 * (Mat::Identity(n, n) + w));
  require_stochastic_neighbor_matrix(id, "W̃", wt, prob.topo);

  Mat lb = beta.asDiagonal();
  Mat lbw = lb * w;
  Mat lbwt = lb * wt;
  double scale = std::max(1.0, lbwt.cwiseAbs().maxCoeff());
  if ((lbw - lbw.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    fail(id, "Λ_β W not symmetric");
  if ((lbwt - lbwt.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    fail(id, "Λ_β W̃ not symmetric");
  std::string why;
  Mat pt = lbwt - lbw;  // Λ_β (W̃ − W)
  if (!is_psd(pt, &why)) fail(id, "Λ_β(W̃ − W) not PSD" + why);
  if (!is_psd(lbwt, &why)) fail(id, "Λ_β W̃ not PSD" + why);
  if (!null_is_consensus(pt)) fail(id, "Null(Λ_β(W̃ − W)) must be span(1)");
  Mat pm = Mat(lb) - lbwt;  // Λ_β (I − W̃)
  if (!null_is_consensus(pm)) fail(id, "Null(Λ_β(I − W̃)) must be span(1)");

  Preset out;
  out.name = id;
  out.target = PresetTarget::per_node;
  out.nodes = n;
  out.dim = d;
  out.rho = 1.0;
  out.weights = WeightPair{pm, pt};
  out.kernels.reserve(n);
  for (int i = 0; i < n; ++i) out.kernels.push_back(BregmanKernel::scaled_identity(d, beta(i)));
  out.q0_map = Mat::Zero(n, n);
  return out;
}

Preset make_pg_extra(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "pg_extra";
  const int n = prob.nodes(), d = prob.d;
  if (p.rho <= 0) fail(id, "ρ must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo);

  Preset out;
  out.name = id;
  out.target = PresetTarget::per_node;
  out.nodes = n;
  out.dim = d;
  out.rho = p.rho;
  Mat pmat = 0.5 * (Mat::Identity(n, n) - w);
  out.weights = WeightPair{pmat, pmat};
  out.kernels = uniform_kernels(n, d, p.rho);
  out.q0_map = p.rho * pmat;
  out.q0_fixed = true;  // the dual seed is part of the algorithm definition
  return out;
}

Preset make_dpga(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "dpga";
  const int n = prob.nodes(), d = prob.d;
  Mat gamma = p.Gamma.size() ? p.Gamma : build_laplacian(prob.topo).P;
  if (gamma.rows() != n || gamma.cols() != n)
    fail(id, "Γ must be " + std::to_string(n) + " x " + std::to_string(n));
  double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    fail(id, "Γ not symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (prob.topo.is_edge(i, j) && gamma(i, j) >= -1e-12)
        fail(id, "Γ must be negative on edges (pair " + pair_name(i, j) + " = " +
                     num(gamma(i, j)) + ")");
      if (!prob.topo.is_edge(i, j) && std::abs(gamma(i, j)) > 1e-12)
        fail(id, "Γ has a nonzero entry at non-adjacent pair " + pair_name(i, j));
    }
  for (int i = 0; i < n; ++i)
    if (std::abs(gamma.row(i).sum()) > 1e-9 * scale)
      fail(id, "Γ rows must sum to 0 (row " + std::to_string(i + 1) + " sums to " +
                   num(gamma.row(i).sum()) + ")");
  if (!null_is_consensus(gamma)) fail(id, "Null(Γ) must be span(1)");

  Vec ci = p.c_i.size() ? p.c_i : Vec(Vec::Constant(n, 0.9 / lambda_max(gamma)));
  if (ci.size() != n) fail(id, "c_i must have one entry per node");
  for (int i = 0; i < n; ++i)
    if (ci(i) <= 0) fail(id, "c_i must be positive");
  Mat inv_steps = Vec(ci.cwiseInverse()).asDiagonal();
  std::string why;
  if (!is_psd(inv_steps - gamma, &why)) fail(id, "diag(1/c_i) − Γ not PSD" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::per_node;
  out.nodes = n;
  out.dim = d;
  out.rho = 1.0;
  out.weights = WeightPair{gamma, gamma};
  out.kernels.reserve(n);
  for (int i = 0; i < n; ++i)
    out.kernels.push_back(BregmanKernel::scaled_identity(d, 1.0 / ci(i)));
  out.q0_map = Mat::Zero(n, n);
  out.q0_fixed = true;  // the multipliers start at zero by definition
  return out;
}

Preset make_decentralized_admm(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "decentralized_admm";
  if (p.c <= 0) fail(id, "c must be positive");
  PresetParams q;
  q.Gamma = p.c * build_laplacian(prob.topo).P;
  const int n = prob.nodes();
  q.c_i = Vec(n);
  for (int i = 0; i < n; ++i) {
    const double deg = static_cast<double>(prob.topo.neighbors(i).size());
    q.c_i(i) = 1.0 / (2.0 * p.c * deg);
  }
  Preset out = make_dpga(q, prob);
  out.name = id;
  return out;
}

Preset make_d_fbbs(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "d_fbbs";
  const int n = prob.nodes(), d = prob.d;
  require_nonsmooth_only(id, prob);
  if (p.rho <= 0) fail(id, "ρ must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo);
  std::string why;
  if (!is_pd(w, &why)) fail(id, "W not positive definite" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::per_node;
  out.nodes = n;
  out.dim = d;
  out.rho = p.rho;
  Mat pmat = Mat::Identity(n, n) - w;
  out.weights = WeightPair{pmat, pmat};
  out.kernels = uniform_kernels(n, d, p.rho);
  out.q0_map = Mat::Zero(n, n);
  return out;
}

Preset make_distributed_admm_makhdoumi(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "distributed_admm_makhdoumi";
  const int n = prob.nodes(), d = prob.d;
  require_nonsmooth_only(id, prob);
  if (p.c <= 0) fail(id, "c must be positive");
  Mat gamma = p.Gamma.size() ? p.Gamma : build_laplacian(prob.topo).P;
  if (gamma.rows() != n || gamma.cols() != n)
    fail(id, "Γ must be " + std::to_string(n) + " x " + std::to_string(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !prob.topo.is_edge(i, j) && std::abs(gamma(i, j)) > 1e-12)
        fail(id, "Γ has a nonzero entry at non-adjacent pair " + pair_name(i, j));

  Vec inv_close(n);
  for (int i = 0; i < n; ++i)
    inv_close(i) = 1.0 / (static_cast<double>(prob.topo.neighbors(i).size()) + 1.0);
  Mat pm = gamma.transpose() * inv_close.asDiagonal() * gamma;
  pm = 0.5 * (pm + pm.transpose());
  if (!null_is_consensus(pm)) fail(id, "Null(ΓᵀΛ⁻¹Γ) must be span(1)");
  Vec col_norms(n);
  for (int i = 0; i < n; ++i) {
    col_norms(i) = gamma.col(i).squaredNorm();
    if (col_norms(i) <= 1e-12) fail(id, "Γ column " + std::to_string(i + 1) + " is zero");
  }
  std::string why;
  Mat gap = Mat(col_norms.asDiagonal()) - pm;
  if (!is_psd(gap, &why)) fail(id, "Q̃ − ΓᵀΛ⁻¹Γ not PSD" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::dense;
  out.nodes = n;
  out.dim = d;
  out.rho = p.c;
  out.published_cost = 2.0;
  out.weights = WeightPair{pm, pm};
  out.dense_surrogate = QuadraticSurrogate::constant(p.c * kron_identity(gap, d));
  out.q0_map = Mat::Zero(n, n);
  out.q0_fixed = true;  // the dual starts from a zero edge-ledger
  return out;
}

Preset make_lei_primal_dual(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "lei_primal_dual";
  const int n = prob.nodes(), d = prob.d;
  if (p.alpha <= 0) fail(id, "α must be positive");
  for (const auto& h : prob.h)
    if (h.kind() != NonsmoothLocal::Kind::zero && h.kind() != NonsmoothLocal::Kind::ball)
      fail(id, "requires indicator (ball or zero) nonsmooth parts");
  Mat gamma = p.Gamma.size() ? p.Gamma : build_laplacian(prob.topo).P;
  if (gamma.rows() != n || gamma.cols() != n)
    fail(id, "Γ must be " + std::to_string(n) + " x " + std::to_string(n));
  double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    fail(id, "Γ not symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !prob.topo.is_edge(i, j) && std::abs(gamma(i, j)) > 1e-12)
        fail(id, "Γ has a nonzero entry at non-adjacent pair " + pair_name(i, j));
  std::string why;
  if (!is_psd(gamma, &why)) fail(id, "Γ not PSD" + why);
  if (!null_is_consensus(gamma)) fail(id, "Null(Γ) must be span(1)");
  const double norm = lambda_max(gamma);
  if (p.alpha > 1.0 / (2.0 * norm) + 1e-12)
    fail(id, "α must satisfy α ≤ 1/(2‖Γ‖) (α = " + num(p.alpha) + ", bound = " +
                 num(1.0 / (2.0 * norm)) + ")");
  Mat gamma2 = gamma * gamma;
  Mat anode = Mat::Identity(n, n) / p.alpha - gamma + p.alpha * gamma2;
  if (!is_pd(anode, &why)) fail(id, "I/α − Γ + αΓ² not positive definite" + why);

  Preset out;
  out.name = id;
  out.target = PresetTarget::dense;
  out.nodes = n;
  out.dim = d;
  out.rho = p.alpha;
  out.published_cost = 2.0;
  out.weights = WeightPair{Mat(gamma / p.alpha - gamma2), gamma2};
  out.dense_surrogate = QuadraticSurrogate::constant(kron_identity(anode, d));
  out.q0_map = p.alpha * gamma2;  // the dual ledger starts at zero
  out.q0_fixed = true;
  return out;
}

Preset make_diging_static(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "diging_static";
  const int n = prob.nodes(), d = prob.d;
  require_smooth_only(id, prob);
  if (p.alpha <= 0) fail(id, "α must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo);
  std::string why;
  if (!is_psd(w, &why)) fail(id, "W not PSD" + why);

  Mat w2 = w * w;
  Preset out;
  out.name = id;
  out.target = PresetTarget::dense;
  out.nodes = n;
  out.dim = d;
  out.rho = 1.0 / p.alpha;
  out.published_cost = 2.0;
  Mat eye = Mat::Identity(n, n);
  out.weights = WeightPair{Mat(eye - w2), Mat((eye - w) * (eye - w))};
  out.dense_surrogate = QuadraticSurrogate::constant(kron_identity(w2, d) / p.alpha);
  out.q0_map = (w2 - w) / p.alpha;
  out.q0_fixed = true;  // forced by the gradient-tracking change of variables
  return out;
}

Preset make_esom(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "esom";
  const int n = prob.nodes(), d = prob.d;
  require_smooth_only(id, prob);
  if (p.alpha <= 0) fail(id, "α must be positive");
  if (p.epsilon <= 0) fail(id, "ε must be positive");
  if (p.K < 0) fail(id, "K must be nonnegative");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo, /*nonneg=*/true);

  Mat wd = Mat(w.diagonal().asDiagonal());
  const double alpha = p.alpha, eps = p.epsilon;
  const int K = p.K;
  Mat eye_nd = Mat::Identity(n * d, n * d);
  Mat curvature_shift = eps * eye_nd + 2.0 * alpha * kron_identity(Mat(Mat::Identity(n, n) - wd), d);
  Mat series_mat = alpha * (eye_nd + kron_identity(Mat(w - 2.0 * wd), d));
  Mat penalty = alpha * kron_identity(Mat(Mat::Identity(n, n) - w), d);
  NetworkProblem fcopy = prob;

  QuadraticSurrogate surr;
  surr.provider = [fcopy, curvature_shift, series_mat, penalty, K, eye_nd](
                      int, const Vec& anchor) -> Mat {
    Mat dmat = block_hessian(fcopy, anchor) + curvature_shift;
    Eigen::SelfAdjointEigenSolver<Mat> es(dmat);
    Mat dinv_sqrt = es.operatorInverseSqrt();
    Mat x = dinv_sqrt * series_mat * dinv_sqrt;
    Mat s = eye_nd;
    for (int t = 1; t <= K; ++t) s = eye_nd + x * s;  // sum_{t=0}^K x^t
    Mat q = dinv_sqrt * s * dinv_sqrt;
    Mat a = q.ldlt().solve(eye_nd) - penalty;
    return 0.5 * (a + a.transpose());
  };
  surr.a_lower = eps * eye_nd;
  surr.a_upper = (max_smoothness(prob) + eps + 2.0 * alpha) * eye_nd;

  Preset out;
  out.name = id;
  out.target = PresetTarget::dense;
  out.nodes = n;
  out.dim = d;
  out.rho = alpha;
  out.published_cost = static_cast<double>(K) + 2.0;
  Mat pmat = Mat::Identity(n, n) - w;
  out.weights = WeightPair{pmat, pmat};
  out.dense_surrogate = std::move(surr);
  out.q0_map = Mat::Zero(n, n);
  out.q0_fixed = true;  // the multipliers start at zero by definition
  return out;
}

Preset make_split_prox(const PresetParams& p, const NetworkProblem& prob) {
  const std::string id = "split_prox";
  const int n = prob.nodes(), d = prob.d;
  if (p.rho <= 0) fail(id, "ρ must be positive");
  if (p.epsilon <= 0) fail(id, "ε must be positive");
  Mat w = p.W.size() ? p.W : lazy_metropolis_matrix(prob.topo);
  require_average_matrix(id, "W", w, prob.topo);
  Mat pmat = Mat::Identity(n, n) - w;
  const double bound = p.rho * lambda_max(pmat);
  if (p.epsilon < bound - 1e-12)
    fail(id, "ε − ρ·λ_max(I − W) must be nonnegative (ε = " + num(p.epsilon) +
                 ", ρ·λ_max = " + num(bound) + ")");

  Preset out;
  out.name = id;
  out.target = PresetTarget::split;
  out.nodes = n;
  out.dim = d;
  out.rho = p.rho;
  out.published_cost = 2.0;
  out.weights = WeightPair{pmat, pmat};
  out.kernels = uniform_kernels(n, d, p.epsilon);
  out.q0_map = Mat::Zero(n, n);
  out.q0_fixed = true;  // the split engine requires zero initial multipliers
  return out;
}

}  // namespace

Mat lazy_metropolis_matrix(const Topology& topo) {
  return Mat::Identity(topo.nodes(), topo.nodes()) - 0.5 * build_metropolis(topo).P;
}

Vec Preset::initial_multipliers(const Vec& x0) const {
  Vec q = Vec::Zero(nodes * dim);
  if (x0.size() == 0 || q0_map.size() == 0) return q;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      if (q0_map(i, j) != 0.0)
        q.segment(i * dim, dim) += q0_map(i, j) * x0.segment(j * dim, dim);
  return q;
}

std::unique_ptr<Engine> Preset::build(const NetworkProblem& prob, const Vec& x0,
                                      const Vec& q0_override,
                                      const InnerSolverConfig& inner) const {
  const int nd = nodes * dim;
  Vec x = x0;
  if (x.size() == 0) x = Vec::Zero(nd);
  if (x.size() != nd)
    throw AmmError("preset " + name + ": x0 has size " + std::to_string(x.size()) +
                   ", expected " + std::to_string(nd));
  Vec q;
  if (q0_override.size() != 0) {
    if (q0_fixed)
      throw AmmError("preset " + name + ": initial multipliers are fixed by this preset");
    q = q0_override;
  } else {
    q = initial_multipliers(x);
  }

  switch (target) {
    case PresetTarget::per_node: {
      DistributedConfig cfg;
      cfg.rho = rho;
      cfg.inner = inner;
      cfg.x0 = unstack(x, nodes, dim);
      cfg.q0 = unstack(q, nodes, dim);
      return std::make_unique<DammEngine>(prob, weights, kernels, cfg);
    }
    case PresetTarget::quadratic_update: {
      DistributedConfig cfg;
      cfg.rho = rho;
      cfg.inner = inner;
      cfg.x0 = unstack(x, nodes, dim);
      cfg.q0 = unstack(q, nodes, dim);
      return std::make_unique<DammSqEngine>(prob, weights, step_matrices, cfg);
    }
    case PresetTarget::dense: {
      DenseEngineConfig cfg;
      cfg.rho = rho;
      cfg.inner = inner;
      cfg.x0 = x;
      cfg.q0 = q;
      return std::make_unique<ReferenceAmm>(prob, weights, DenseSurrogate::quadratic(dense_surrogate),
                                            cfg);
    }
    case PresetTarget::split: {
      DenseEngineConfig cfg;
      cfg.rho = rho;
      cfg.inner = inner;
      cfg.x0 = x;
      return std::make_unique<SplitEngine>(prob, weights, DenseSurrogate::bregman(kernels), cfg);
    }
  }
  throw AmmError("preset " + name + ": unknown target");
}

std::vector<std::string> preset_names() {
  return {"extra",
          "id_fbbs",
          "dqm",
          "pgc",
          "pg_extra",
          "dpga",
          "decentralized_admm",
          "d_fbbs",
          "distributed_admm_makhdoumi",
          "lei_primal_dual",
          "diging_static",
          "esom",
          "split_prox"};
}

Preset make_preset(const std::string& name, const PresetParams& params,
                   const NetworkProblem& prob) {
  prob.validate();
  if (name == "extra") return make_extra(params, prob);
  if (name == "id_fbbs") return make_id_fbbs(params, prob);
  if (name == "dqm") return make_dqm(params, prob);
  if (name == "pgc") return make_pgc(params, prob);
  if (name == "pg_extra") return make_pg_extra(params, prob);
  if (name == "dpga") return make_dpga(params, prob);
  if (name == "decentralized_admm") return make_decentralized_admm(params, prob);
  if (name == "d_fbbs") return make_d_fbbs(params, prob);
  if (name == "distributed_admm_makhdoumi") return make_distributed_admm_makhdoumi(params, prob);
  if (name == "lei_primal_dual") return make_lei_primal_dual(params, prob);
  if (name == "diging_static") return make_diging_static(params, prob);
  if (name == "esom") return make_esom(params, prob);
  if (name == "split_prox") return make_split_prox(params, prob);
  throw AmmError("unknown preset '" + name + "'");
}

}  // namespace amm
