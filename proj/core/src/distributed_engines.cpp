#include <cmath>

#include "amm/engines.hpp"

namespace amm {

namespace {

void check_node_weights(const WeightPair& wp, const Topology& topo) {
  const int n = topo.nodes();
  if (wp.P.rows() != n || wp.P.cols() != n || wp.Pt.rows() != n || wp.Pt.cols() != n)
    throw AmmError("distributed engine: weight matrices must be " + std::to_string(n) + " x " +
                   std::to_string(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || topo.is_edge(i, j)) continue;
      if (wp.P(i, j) != 0.0 || wp.Pt(i, j) != 0.0)
        throw AmmError("distributed engine: weight at non-adjacent pair (" +
                       std::to_string(i + 1) + "," + std::to_string(j + 1) +
                       ") must be zero");
    }
}

std::vector<Vec> blocks_or_zero(const std::vector<Vec>& given, int n, int d, const char* what) {
  if (given.empty()) return std::vector<Vec>(n, Vec::Zero(d));
  if (static_cast<int>(given.size()) != n)
    throw AmmError(std::string("distributed engine: ") + what + " must hold " +
                   std::to_string(n) + " blocks");
  for (const auto& v : given)
    if (v.size() != d)
      throw AmmError(std::string("distributed engine: every ") + what + " block must have size " +
                     std::to_string(d));
  return given;
}

void check_q_blocks_sum(const std::vector<Vec>& q, int d) {
  Vec s = Vec::Zero(d);
  double norm2 = 0;
  for (const auto& qi : q) {
    s += qi;
    norm2 += qi.squaredNorm();
  }
  if (s.norm() > 1e-9 * std::max(1.0, std::sqrt(norm2)))
    throw AmmError("distributed engine: initial multipliers must sum to zero across nodes (|sum| = " +
                   std::to_string(s.norm()) + ")");
}

}  // namespace

// DammEngine ------------------------------------------------------------------

DammEngine::DammEngine(NetworkProblem prob, WeightPair wp, std::vector<BregmanKernel> kernels,
                       DistributedConfig cfg)
    : prob_(std::move(prob)),
      wp_(std::move(wp)),
      kernels_(std::move(kernels)),
      cfg_(std::move(cfg)),
      net_(prob_.topo, prob_.d) {
  prob_.validate();
  check_node_weights(wp_, prob_.topo);
  if (cfg_.rho <= 0) throw AmmError("distributed engine: rho must be positive");
  if (static_cast<int>(kernels_.size()) != prob_.nodes())
    throw AmmError("distributed engine: kernel count does not match the node count");
  for (const auto& k : kernels_)
    if (k.dim() != prob_.d) throw AmmError("distributed engine: kernel block size mismatch");
}

void DammEngine::start() {
  const int n = prob_.nodes(), d = prob_.d;
  x_ = blocks_or_zero(cfg_.x0, n, d, "x0");
  q_ = blocks_or_zero(cfg_.q0, n, d, "q0");
  check_q_blocks_sum(q_, d);
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, x_[i]);
  k_ = 0;
  started_ = true;
}

void DammEngine::round() {
  if (!started_) throw AmmError("engine: start() must run before round()");
  const int n = prob_.nodes(), d = prob_.d;
  const double rho = cfg_.rho;
  net_.begin_round();

  // primal phase: every node assembles its linear term from last round's
  // neighbor values and solves its local subproblem
  std::vector<Vec> xn(n);
  for (int i = 0; i < n; ++i) {
    Vec c = q_[i] - kernels_[i].grad(x_[i], x_[i]) + prob_.f[i].grad(x_[i]);
    c += rho * wp_.P(i, i) * x_[i];
    for (int j : prob_.topo.neighbors(i)) c += rho * wp_.P(i, j) * net_.fetch(i, j, PayloadTag::x);
    Subproblem sp;
    sp.kernel = &kernels_[i];
    sp.h = &prob_.h[i];
    sp.linear = std::move(c);
    sp.anchor = x_[i];
    auto sol = solve_subproblem(sp, cfg_.inner);
    if (!sol.converged)
      throw AmmError("node " + std::to_string(i + 1) + ": local subproblem stalled at residual " +
                     std::to_string(sol.residual));
    xn[i] = std::move(sol.x);
  }

  // exchange
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, xn[i]);

  // dual phase: multipliers advance using the freshly exchanged values
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.Pt(i, i) * xn[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.Pt(i, j) * net_.fetch(i, j, PayloadTag::x);
    q_[i] += rho * acc;
  }

  x_ = std::move(xn);
  (void)d;
  ++k_;
}

// DammScEngine ----------------------------------------------------------------

DammScEngine::DammScEngine(NetworkProblem prob, WeightPair wp, ConjugateGenerator gen,
                           DistributedConfig cfg)
    : prob_(std::move(prob)),
      wp_(std::move(wp)),
      gen_(std::move(gen)),
      cfg_(std::move(cfg)),
      net_(prob_.topo, prob_.d) {
  prob_.validate();
  check_node_weights(wp_, prob_.topo);
  if (cfg_.rho <= 0) throw AmmError("distributed engine: rho must be positive");
  if (!prob_.h_all_zero())
    throw AmmError("constant-update engine: requires all nonsmooth parts zero");
  if (gen_.nodes() != prob_.nodes() || gen_.dim() != prob_.d)
    throw AmmError("constant-update engine: generator shape does not match the problem");
  if (!cfg_.x0.empty())
    throw AmmError("constant-update engine: x0 is derived from the seed points, not configurable");
}

Vec DammScEngine::combined(int i) const {
  return y_[i] - prob_.f[i].grad(x_[i]) - q_[i];
}

void DammScEngine::start() {
  const int n = prob_.nodes(), d = prob_.d;
  const double rho = cfg_.rho;
  q_ = blocks_or_zero(cfg_.q0, n, d, "q0");
  check_q_blocks_sum(q_, d);
  std::vector<Vec> zt = blocks_or_zero(cfg_.z_tilde, n, d, "z_tilde");

  // seed points travel even when the generator is separable
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::z_tilde, zt[i]);

  x_.assign(n, Vec());
  for (int i = 0; i < n; ++i)
    x_[i] = gen_.grad_block(
        i, [&](int j) { return j == i ? zt[i] : Vec(net_.fetch(i, j, PayloadTag::z_tilde)); });
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, x_[i]);

  y_.assign(n, Vec());
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.P(i, i) * x_[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.P(i, j) * net_.fetch(i, j, PayloadTag::x);
    y_[i] = zt[i] - rho * acc;
  }

  w_.assign(n, Vec());
  for (int i = 0; i < n; ++i) w_[i] = combined(i);
  if (!gen_.separable())
    for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::w, w_[i]);

  k_ = 0;
  started_ = true;
}

void DammScEngine::round() {
  if (!started_) throw AmmError("engine: start() must run before round()");
  const int n = prob_.nodes();
  const double rho = cfg_.rho;
  net_.begin_round();

  // primal phase: gradient map of the generator on the combined payloads
  // (a separable generator reads only the node's own block)
  std::vector<Vec> xn(n);
  for (int i = 0; i < n; ++i)
    xn[i] = gen_.grad_block(
        i, [&](int j) { return j == i ? w_[i] : Vec(net_.fetch(i, j, PayloadTag::w)); });

  // exchange
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, xn[i]);

  // dual phase: y advances with the pre-update gradient and multiplier, the
  // penalty part uses the freshly exchanged values
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.P(i, i) * xn[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.P(i, j) * net_.fetch(i, j, PayloadTag::x);
    y_[i] -= prob_.f[i].grad(x_[i]) + q_[i] + rho * acc;
  }
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.Pt(i, i) * xn[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.Pt(i, j) * net_.fetch(i, j, PayloadTag::x);
    q_[i] += rho * acc;
  }

  x_ = std::move(xn);
  for (int i = 0; i < n; ++i) w_[i] = combined(i);
  if (!gen_.separable())
    for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::w, w_[i]);

  ++k_;
}

// DammSqEngine ----------------------------------------------------------------

DammSqEngine::DammSqEngine(NetworkProblem prob, WeightPair wp, SqProvider sq,
                           DistributedConfig cfg)
    : prob_(std::move(prob)),
      wp_(std::move(wp)),
      sq_(std::move(sq)),
      cfg_(std::move(cfg)),
      net_(prob_.topo, prob_.d) {
  prob_.validate();
  check_node_weights(wp_, prob_.topo);
  if (cfg_.rho <= 0) throw AmmError("distributed engine: rho must be positive");
  if (!prob_.h_all_zero())
    throw AmmError("quadratic-update engine: requires all nonsmooth parts zero");
  if (!sq_.provider) throw AmmError("quadratic-update engine: step matrix provider must be set");
  auto rep = validate_sq_matrix(sq_.provider(0), sq_, prob_.topo, prob_.d, wp_, cfg_.rho);
  if (!rep.ok()) {
    std::string why = "quadratic-update engine: step matrix rejected:";
    for (const auto& c : rep.checks)
      if (!c.ok) why += " [" + c.name + "] " + c.detail;
    throw AmmError(why);
  }
}

void DammSqEngine::start() {
  const int n = prob_.nodes(), d = prob_.d;
  const double rho = cfg_.rho;
  x_ = blocks_or_zero(cfg_.x0, n, d, "x0");
  q_ = blocks_or_zero(cfg_.q0, n, d, "q0");
  check_q_blocks_sum(q_, d);

  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, x_[i]);

  z_.assign(n, Vec());
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.P(i, i) * x_[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.P(i, j) * net_.fetch(i, j, PayloadTag::x);
    z_[i] = prob_.f[i].grad(x_[i]) + q_[i] + rho * acc;
  }
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::z, z_[i]);

  k_ = 0;
  started_ = true;
}

void DammSqEngine::round() {
  if (!started_) throw AmmError("engine: start() must run before round()");
  const int n = prob_.nodes(), d = prob_.d;
  const double rho = cfg_.rho;
  net_.begin_round();

  const Mat g = sq_.provider(static_cast<int>(k_));
  if (g.rows() != n * d || g.cols() != n * d)
    throw AmmError("quadratic-update engine: step matrix must be " + std::to_string(n * d) +
                   " square");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw AmmError("quadratic-update engine: step matrix must be symmetric");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || prob_.topo.is_edge(i, j)) continue;
      if (g.block(i * d, j * d, d, d).cwiseAbs().maxCoeff() != 0.0)
        throw AmmError("quadratic-update engine: step matrix has a nonzero block at non-adjacent pair (" +
                       std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }

  // primal phase: neighbor-sparse step applied to the auxiliary payloads
  std::vector<Vec> xn(n);
  for (int i = 0; i < n; ++i) {
    Vec step = g.block(i * d, i * d, d, d) * z_[i];
    for (int j : prob_.topo.neighbors(i))
      step += g.block(i * d, j * d, d, d) * net_.fetch(i, j, PayloadTag::z);
    xn[i] = x_[i] - step;
  }

  // exchange
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::x, xn[i]);

  // dual phase: multiplier update, then the refreshed auxiliary payload
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.Pt(i, i) * xn[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.Pt(i, j) * net_.fetch(i, j, PayloadTag::x);
    q_[i] += rho * acc;
  }
  for (int i = 0; i < n; ++i) {
    Vec acc = wp_.P(i, i) * xn[i];
    for (int j : prob_.topo.neighbors(i)) acc += wp_.P(i, j) * net_.fetch(i, j, PayloadTag::x);
    z_[i] = prob_.f[i].grad(xn[i]) + q_[i] + rho * acc;
  }
  for (int i = 0; i < n; ++i) net_.publish(i, PayloadTag::z, z_[i]);

  x_ = std::move(xn);
  ++k_;
}

}  // namespace amm
