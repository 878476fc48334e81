#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "amm/engines.hpp"
#include "support/oracles.hpp"

using namespace amm;

namespace {

Vec block_sum(const Vec& q, int n, int d) {
  Vec s = Vec::Zero(d);
  for (int i = 0; i < n; ++i) s += q.segment(i * d, d);
  return s;
}

std::vector<Vec> random_blocks(std::mt19937_64& rng, int n, int d, double scale = 1.0) {
  std::vector<Vec> out;
  for (int i = 0; i < n; ++i) out.push_back(amm::testing::random_vec(rng, d, scale));
  return out;
}

std::vector<Vec> sum_zero_blocks(std::mt19937_64& rng, int n, int d, double scale = 1.0) {
  auto out = random_blocks(rng, n, d, scale);
  Vec mean = Vec::Zero(d);
  for (const auto& v : out) mean += v;
  mean /= n;
  for (auto& v : out) v -= mean;
  return out;
}

std::vector<BregmanKernel> identity_kernels(int n, int d, double eps) {
  std::vector<BregmanKernel> ks;
  for (int i = 0; i < n; ++i) ks.push_back(BregmanKernel::scaled_identity(d, eps));
  return ks;
}

double max_smoothness(const NetworkProblem& prob) {
  double m = 0;
  for (const auto& f : prob.f) m = std::max(m, f.smoothness());
  return m;
}

// kernel curvature that both satisfies the penalty condition and dominates
// the local smoothness, so the iteration contracts
double stable_eps(const NetworkProblem& prob, const WeightPair& wp, double rho) {
  return 1.05 * (rho * lambda_max_upper_bound(wp.P, prob.topo) + max_smoothness(prob));
}

Vec soft_threshold(const Vec& v, double t) {
  Vec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out(i) = std::copysign(std::max(0.0, std::abs(v(i)) - t), v(i));
  return out;
}

}  // namespace

TEST_CASE("dense engine holds a certified fixed point") {
  Topology topo = Topology::path(4);
  const int n = 4, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(21u, topo, d, d + 2);

  // exact common minimizer of the summed quadratics via normal equations
  Mat a_sum = Mat::Zero(d, d);
  Vec rhs_sum = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    a_sum += prob.f[i].hessian(Vec::Zero(d));
    rhs_sum -= prob.f[i].grad(Vec::Zero(d));
  }
  const Vec xs = a_sum.ldlt().solve(rhs_sum);

  // stationarity splits the zero total gradient across nodes; project the
  // blocks to an exactly balanced multiplier
  std::vector<Vec> q_blocks(n);
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    q_blocks[i] = -prob.f[i].grad(xs);
    mean += q_blocks[i];
  }
  mean /= n;
  for (auto& qb : q_blocks) qb -= mean;

  Vec x0(n * d);
  for (int i = 0; i < n; ++i) x0.segment(i * d, d) = xs;
  const Vec q0 = stack(q_blocks);

  DenseEngineConfig cfg;
  cfg.rho = 0.8;
  cfg.track_v = true;
  cfg.x0 = x0;
  cfg.q0 = q0;
  const double eps = stable_eps(prob, wp, cfg.rho);

  ReferenceAmm ref(prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), cfg);
  ref.start();
  for (int k = 0; k < 5; ++k) {
    ref.round();
    CHECK((ref.x_stacked() - x0).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((ref.q_stacked() - q0).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(ref.v_consistency() <= 1e-8);
  }

  // the distributed per-node engine holds the same point
  DistributedConfig dcfg;
  dcfg.rho = cfg.rho;
  dcfg.x0 = unstack(x0, n, d);
  dcfg.q0 = q_blocks;
  DammEngine eng(prob, wp, identity_kernels(n, d, eps), dcfg);
  eng.start();
  for (int k = 0; k < 5; ++k) {
    eng.round();
    CHECK((eng.x_stacked() - x0).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((eng.q_stacked() - q0).lpNorm<Eigen::Infinity>() <= 1e-9);
  }
}

TEST_CASE("single-node network reduces to the forward-backward iteration") {
  Topology topo = Topology::path(1);
  const int d = 2;
  std::mt19937_64 rng(3u);
  // well-conditioned data block so a few hundred forward-backward steps converge
  Mat B(3 + d, d);
  B.topRows(3) = amm::testing::random_mat(rng, 3, d);
  B.bottomRows(d) = Mat::Identity(d, d);
  Vec b = Vec::Zero(3 + d);
  b.head(3) = amm::testing::random_vec(rng, 3);
  NetworkProblem prob;
  prob.topo = topo;
  prob.d = d;
  prob.f.push_back(SmoothLocal::quadratic(B, b));
  prob.h.push_back(NonsmoothLocal::l1(0.2));

  const double eps = 1.05 * prob.f[0].smoothness();
  DistributedConfig cfg;
  cfg.rho = 0.9;  // irrelevant: the penalty of an isolated node is zero
  cfg.x0 = {amm::testing::random_vec(rng, d, 2.0)};
  DammEngine eng(prob, build_metropolis(topo), identity_kernels(1, d, eps), cfg);

  // manual forward-backward recursion with step 1/eps
  Vec xm = cfg.x0[0];
  eng.start();
  for (int k = 0; k < 40; ++k) {
    eng.round();
    xm = prob.h[0].prox(xm - prob.f[0].grad(xm) / eps, 1.0 / eps);
    CHECK((eng.x_stacked() - xm).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(eng.q_stacked().norm() == 0.0);
  }

  // limit point minimizes the local composite objective
  CompositeProblem pb;
  pb.smooth_value = [&](const Vec& x) { return prob.f[0].value(x); };
  pb.smooth_grad = [&](const Vec& x) { return prob.f[0].grad(x); };
  pb.lipschitz = prob.f[0].smoothness();
  pb.prox = [&](const Vec& v, double step) { return prob.h[0].prox(v, step); };
  pb.nonsmooth_value = [&](const Vec& x) { return prob.h[0].value(x); };
  InnerSolverConfig icfg;
  icfg.tolerance = 1e-12;
  auto direct = prox_gradient_minimize(pb, Vec::Zero(d), icfg);
  REQUIRE(direct.converged);
  for (int k = 0; k < 400; ++k) eng.round();
  CHECK((eng.x_stacked() - direct.x).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("identical nodes started together move in lockstep") {
  Topology topo = Topology::path(3);  // asymmetric degrees on purpose
  const int n = 3, d = 2;
  WeightPair wp = build_metropolis(topo);
  std::mt19937_64 rng(9u);
  Mat B = amm::testing::random_mat(rng, 3, d);
  Vec b = amm::testing::random_vec(rng, 3);
  NetworkProblem prob;
  prob.topo = topo;
  prob.d = d;
  for (int i = 0; i < n; ++i) {
    prob.f.push_back(SmoothLocal::quadratic(B, b));
    prob.h.push_back(NonsmoothLocal::zero());
  }

  DistributedConfig cfg;
  cfg.rho = 0.8;
  const Vec common = amm::testing::random_vec(rng, d, 1.5);
  cfg.x0.assign(n, common);
  const double eps = stable_eps(prob, wp, cfg.rho);
  DammEngine eng(prob, wp, identity_kernels(n, d, eps), cfg);
  eng.start();
  for (int k = 0; k < 5; ++k) {
    eng.round();
    const Vec x = eng.x_stacked();
    for (int i = 1; i < n; ++i)
      CHECK((x.segment(i * d, d) - x.head(d)).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(eng.q_stacked().lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("per-node engine and dense engine iterate identically on random instances") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(700u + seed);
    const int n = 2 + static_cast<int>(seed % 5);
    const int d = 1 + static_cast<int>(seed % 3);
    const int max_extra = n * (n - 1) / 2 - (n - 1);
    const int extra = max_extra > 0 ? static_cast<int>(seed) % std::min(3, max_extra + 1) : 0;
    Topology topo = Topology::random_connected(n, n - 1 + extra, 1000u + seed);
    WeightPair wp = build_metropolis(topo);
    NetworkProblem prob = make_least_squares_network(seed, topo, d, d + 2);
    switch (seed % 3) {
      case 0:
        break;  // smooth only
      case 1:
        for (int i = 0; i < n; ++i) prob.h[i] = NonsmoothLocal::l1(0.05 + 0.02 * i);
        break;
      case 2:
        for (int i = 0; i < n; ++i)
          prob.h[i] = NonsmoothLocal::ball(amm::testing::random_vec(rng, d, 0.5), 1.0 + 0.1 * i);
        break;
    }

    DistributedConfig dcfg;
    dcfg.rho = 0.4 + 0.05 * (seed % 5);
    dcfg.inner.tolerance = 1e-12;
    const double bound = dcfg.rho * lambda_max_upper_bound(wp.P, topo);
    std::vector<BregmanKernel> kernels;
    for (int i = 0; i < n; ++i) {
      const double floor = bound + prob.f[i].smoothness();
      if (seed % 2 == 0)
        kernels.push_back(BregmanKernel::scaled_identity(d, 1.05 * floor + 0.05 * i));
      else
        kernels.push_back(BregmanKernel::data_quadratic(
            amm::testing::random_spd(rng, d, 0.1) + floor * Mat::Identity(d, d)));
    }
    dcfg.x0 = random_blocks(rng, n, d);
    dcfg.q0 = sum_zero_blocks(rng, n, d);

    DenseEngineConfig rcfg;
    rcfg.rho = dcfg.rho;
    rcfg.inner.tolerance = 1e-12;
    rcfg.x0 = stack(dcfg.x0);
    rcfg.q0 = stack(dcfg.q0);

    DammEngine eng(prob, wp, kernels, dcfg);
    ReferenceAmm ref(prob, wp, DenseSurrogate::bregman(kernels), rcfg);
    eng.start();
    ref.start();
    for (int k = 0; k < 50; ++k) {
      eng.round();
      ref.round();
    }
    CHECK((eng.x_stacked() - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK((eng.q_stacked() - ref.q_stacked()).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(block_sum(eng.q_stacked(), n, d).norm() <= 1e-10);
  }
}

TEST_CASE("constant-update engine tracks the dense generator path") {
  Topology topo = Topology::ring(5);
  const int n = 5, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(31u, topo, d, d + 1);
  const double rho = 0.5;

  // neighbor-sparse generator scaled so its inverse curvature dominates the
  // objective smoothness plus the penalty: the iteration then contracts
  Mat gkron = kron_identity(Mat(0.5 * build_laplacian(topo).P + 1.2 * Mat::Identity(n, n)), d);
  const double gamma_target =
      1.0 / (1.1 * (max_smoothness(prob) + rho * lambda_max_upper_bound(wp.P, topo)));
  gkron *= gamma_target / lambda_max(gkron);
  ConjugateGenerator gen = ConjugateGenerator::quadratic(gkron, topo, d);
  REQUIRE(validate_conjugate(gen, wp, rho).ok());

  std::mt19937_64 rng(31u);
  auto zt = random_blocks(rng, n, d);
  auto q0 = sum_zero_blocks(rng, n, d, 0.5);

  DistributedConfig dcfg;
  dcfg.rho = rho;
  dcfg.z_tilde = zt;
  dcfg.q0 = q0;
  DammScEngine eng(prob, wp, gen, dcfg);

  DenseEngineConfig rcfg;
  rcfg.rho = rho;
  rcfg.x0 = gen.grad(stack(zt));  // seed points define the first iterate
  rcfg.q0 = stack(q0);
  ReferenceAmm ref(prob, wp, DenseSurrogate::conjugate(gen), rcfg);

  const Mat h = kron_identity(wp.P, d);
  eng.start();
  ref.start();
  CHECK((eng.x_stacked() - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-11);
  for (int k = 0; k < 50; ++k) {
    eng.round();
    ref.round();
    const Vec x = eng.x_stacked();
    CHECK((x - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((eng.q_stacked() - ref.q_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);
    // auxiliary state stays the generator pre-image shifted by the penalty
    const Vec expect_y = gen.inverse_grad(x) - rho * (h * x);
    CHECK((eng.y_stacked() - expect_y).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(block_sum(eng.q_stacked(), n, d).norm() <= 1e-10);
  }

  // non-separable generator: combined payloads travel every round
  const long e2 = 2 * topo.edge_count();
  CHECK(eng.declared_cost() == 2.0);
  CHECK(eng.net()->count_with_tag(PayloadTag::w, false) == e2 * 50);
  CHECK(eng.net()->count_with_tag(PayloadTag::x, false) == e2 * 50);
  CHECK(eng.net()->count_with_tag(PayloadTag::z_tilde, true) == e2);
  CHECK(eng.net()->observed_cost() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("separable constant-update engine drops the combined payloads") {
  Topology topo = Topology::path(4);
  const int n = 4, d = 2;
  WeightPair wp = build_metropolis(topo);
  std::mt19937_64 rng(77u);
  NetworkProblem prob = make_least_squares_network(78u, topo, d, d + 1);
  const double rho = 0.3;

  // per-node generator blocks scaled so the overall smoothness of the
  // generator stays below the contraction threshold
  const double target =
      1.0 / (1.1 * (max_smoothness(prob) + rho * lambda_max_upper_bound(wp.P, topo)));
  std::vector<SmoothLocal> g;
  for (int i = 0; i < n; ++i) {
    Mat b_raw = amm::testing::random_mat(rng, d + 1, d);
    Vec v_raw = amm::testing::random_vec(rng, d + 1);
    const double s = std::sqrt(0.3 * target / SmoothLocal::quadratic(b_raw, v_raw).smoothness());
    g.push_back(SmoothLocal::quadratic(s * b_raw, s * v_raw));
  }
  ConjugateGenerator gen = ConjugateGenerator::separable_smooth(g, 0.5 * target);
  REQUIRE(validate_conjugate(gen, wp, rho).ok());
  auto zt = random_blocks(rng, n, d);
  auto q0 = sum_zero_blocks(rng, n, d, 0.5);

  DistributedConfig dcfg;
  dcfg.rho = rho;
  dcfg.z_tilde = zt;
  dcfg.q0 = q0;
  DammScEngine eng(prob, wp, gen, dcfg);

  DenseEngineConfig rcfg;
  rcfg.rho = rho;
  rcfg.x0 = gen.grad(stack(zt));
  rcfg.q0 = stack(q0);
  ReferenceAmm ref(prob, wp, DenseSurrogate::conjugate(gen), rcfg);

  eng.start();
  ref.start();
  for (int k = 0; k < 50; ++k) {
    eng.round();
    ref.round();
  }
  CHECK((eng.x_stacked() - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);
  CHECK((eng.q_stacked() - ref.q_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);

  const long e2 = 2 * topo.edge_count();
  CHECK(eng.declared_cost() == 1.0);
  CHECK(eng.net()->count_with_tag(PayloadTag::w, true) == 0);  // never sent
  CHECK(eng.net()->count_with_tag(PayloadTag::z_tilde, true) == e2);  // seeds still travel
  CHECK(eng.net()->count_with_tag(PayloadTag::x, false) == e2 * 50);
  CHECK(eng.net()->observed_cost() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quadratic-update engine tracks the dense generator path") {
  Topology topo = Topology::random_connected(6, 8, 7u);
  const int n = 6, d = 2;
  WeightPair wp = build_metropolis(topo, 0.45);
  NetworkProblem prob = make_least_squares_network(56u, topo, d, d + 1);

  // rho large enough that the inverse of the step matrix dominates the
  // objective smoothness plus the penalty: the iteration then contracts
  const double lm = lambda_max(wp.P);
  REQUIRE(lm < 0.85);
  const double rho = 1.1 * max_smoothness(prob) / (1.0 - 1.1 * lm);
  const Mat gmat = kron_identity(Mat(Mat::Identity(n, n) - wp.P), d) / rho;
  SqProvider sq = SqProvider::constant(gmat);
  REQUIRE(validate_sq_matrix(gmat, sq, topo, d, wp, rho).ok());
  ConjugateGenerator gen = ConjugateGenerator::quadratic(gmat, topo, d);
  REQUIRE(validate_conjugate(gen, wp, rho).ok());

  std::mt19937_64 rng(55u);

  DistributedConfig dcfg;
  dcfg.rho = rho;
  dcfg.x0 = random_blocks(rng, n, d);
  dcfg.q0 = sum_zero_blocks(rng, n, d, 0.5);
  DammSqEngine eng(prob, wp, sq, dcfg);

  DenseEngineConfig rcfg;
  rcfg.rho = rho;
  rcfg.x0 = stack(dcfg.x0);
  rcfg.q0 = stack(dcfg.q0);
  ReferenceAmm ref(prob, wp, DenseSurrogate::conjugate(gen), rcfg);

  const Mat h = kron_identity(wp.P, d);
  eng.start();
  ref.start();
  for (int k = 0; k < 50; ++k) {
    eng.round();
    ref.round();
    const Vec x = eng.x_stacked();
    CHECK((x - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK((eng.q_stacked() - ref.q_stacked()).lpNorm<Eigen::Infinity>() <= 1e-9);
    // auxiliary payload equals penalty gradient + local gradient + multiplier
    const Vec expect_z = rho * (h * x) + network_grad(prob, x) + eng.q_stacked();
    CHECK((eng.z_stacked() - expect_z).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(block_sum(eng.q_stacked(), n, d).norm() <= 1e-10);
  }

  const long e2 = 2 * topo.edge_count();
  CHECK(eng.declared_cost() == 2.0);
  CHECK(eng.net()->count_with_tag(PayloadTag::x, false) == e2 * 50);
  CHECK(eng.net()->count_with_tag(PayloadTag::z, false) == e2 * 50);
  CHECK(eng.net()->observed_cost() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("quadratic-update mean iterate follows the averaged gradient") {
  Topology topo = Topology::ring(6);
  const int n = 6, d = 3;
  WeightPair wp = build_metropolis(topo, 0.45);
  NetworkProblem prob = make_least_squares_network(92u, topo, d, d + 1);
  const double rho = 1.1 * max_smoothness(prob) / (1.0 - 1.1 * lambda_max(wp.P));
  REQUIRE(rho > 0);
  const Mat gmat = kron_identity(Mat(Mat::Identity(n, n) - wp.P), d) / rho;
  SqProvider sq = SqProvider::constant(gmat);
  REQUIRE(validate_sq_matrix(gmat, sq, topo, d, wp, rho).ok());

  std::mt19937_64 rng(91u);
  DistributedConfig dcfg;
  dcfg.rho = rho;
  dcfg.x0 = random_blocks(rng, n, d);
  dcfg.q0 = sum_zero_blocks(rng, n, d, 0.4);
  DammSqEngine eng(prob, wp, sq, dcfg);
  eng.start();

  for (int k = 0; k < 20; ++k) {
    const Vec x_old = eng.x_stacked();
    Vec grad_mean = Vec::Zero(d);
    for (int i = 0; i < n; ++i) grad_mean += prob.f[i].grad(x_old.segment(i * d, d));
    grad_mean /= n;
    eng.round();
    const Vec expect = block_sum(x_old, n, d) / n - grad_mean / rho;
    CHECK((block_sum(eng.x_stacked(), n, d) / n - expect).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("split engine coincides with the dense engine on smooth problems") {
  Topology topo = Topology::random_connected(5, 6, 3u);
  const int n = 5, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(4u, topo, d, d + 1);
  std::mt19937_64 rng(13u);

  DenseEngineConfig cfg;
  cfg.rho = 0.7;
  cfg.x0 = amm::testing::random_vec(rng, n * d);
  const double eps = stable_eps(prob, wp, cfg.rho);

  SplitEngine split(prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), cfg);
  ReferenceAmm ref(prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), cfg);
  split.start();
  ref.start();
  for (int k = 0; k < 20; ++k) {
    split.round();
    ref.round();
    CHECK((split.x_stacked() - ref.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((split.q_stacked() - ref.q_stacked()).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((split.z() - split.x_stacked()).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("split engine applies the nonsmooth part as a separate proximal step") {
  Topology topo = Topology::path(3);
  const int n = 3, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(8u, topo, d, d + 1);
  const double lambda = 0.3;
  for (int i = 0; i < n; ++i) prob.h[i] = NonsmoothLocal::l1(lambda);

  std::mt19937_64 rng(17u);
  DenseEngineConfig cfg;
  cfg.rho = 0.9;
  cfg.x0 = amm::testing::random_vec(rng, n * d);
  const double eps = stable_eps(prob, wp, cfg.rho);
  SplitEngine split(prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), cfg);
  split.start();

  // manual two-round recursion: smooth surrogate solve, soft threshold at
  // weight lambda/rho, multiplier driven by the pre-threshold point
  const Mat h = kron_identity(wp.P, d);
  const Mat ht = kron_identity(wp.Pt, d);
  Vec xm = cfg.x0, qm = Vec::Zero(n * d);
  for (int round = 0; round < 2; ++round) {
    const Vec c = qm + network_grad(prob, xm) + cfg.rho * (h * xm) - eps * xm;
    const Vec zm = -c / eps;
    xm = soft_threshold(zm, lambda / cfg.rho);
    qm += cfg.rho * (ht * zm);
    split.round();
    CHECK((split.z() - zm).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((split.x_stacked() - xm).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((split.q_stacked() - qm).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("multiplier blocks stay balanced for every engine") {
  Topology topo = Topology::ring(5);
  const int n = 5, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(41u, topo, d, d + 1);
  std::mt19937_64 rng(42u);
  auto q0 = sum_zero_blocks(rng, n, d, 0.7);
  auto x0 = random_blocks(rng, n, d);

  const double rho = 0.6;
  const double eps = stable_eps(prob, wp, rho);

  // contracting generator for the constant-update engine
  Mat gkron = kron_identity(Mat(0.5 * build_laplacian(topo).P + 1.5 * Mat::Identity(n, n)), d);
  const double target =
      1.0 / (1.1 * (max_smoothness(prob) + rho * lambda_max_upper_bound(wp.P, topo)));
  gkron *= target / lambda_max(gkron);
  ConjugateGenerator gen = ConjugateGenerator::quadratic(gkron, topo, d);

  // contracting step matrix for the quadratic-update engine
  WeightPair wps = build_metropolis(topo, 0.45);
  const double rho_sq = 1.1 * max_smoothness(prob) / (1.0 - 1.1 * lambda_max(wps.P));
  const Mat gmat = kron_identity(Mat(Mat::Identity(n, n) - wps.P), d) / rho_sq;

  std::vector<std::unique_ptr<Engine>> engines;
  {
    DenseEngineConfig cfg;
    cfg.rho = rho;
    cfg.x0 = stack(x0);
    cfg.q0 = stack(q0);
    engines.push_back(std::make_unique<ReferenceAmm>(
        prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), cfg));
    DenseEngineConfig scfg;
    scfg.rho = rho;
    scfg.x0 = stack(x0);
    engines.push_back(std::make_unique<SplitEngine>(
        prob, wp, DenseSurrogate::bregman(identity_kernels(n, d, eps)), scfg));
  }
  {
    DistributedConfig cfg;
    cfg.rho = rho;
    cfg.x0 = x0;
    cfg.q0 = q0;
    engines.push_back(std::make_unique<DammEngine>(prob, wp, identity_kernels(n, d, eps), cfg));
    DistributedConfig sqcfg;
    sqcfg.rho = rho_sq;
    sqcfg.x0 = x0;
    sqcfg.q0 = q0;
    engines.push_back(std::make_unique<DammSqEngine>(prob, wps, SqProvider::constant(gmat), sqcfg));
    DistributedConfig sccfg;
    sccfg.rho = rho;
    sccfg.z_tilde = x0;
    sccfg.q0 = q0;
    engines.push_back(std::make_unique<DammScEngine>(prob, wp, gen, sccfg));
  }

  for (auto& eng : engines) {
    CAPTURE(eng->name());
    eng->start();
    for (int k = 0; k < 20; ++k) {
      eng->round();
      CHECK(block_sum(eng->q_stacked(), n, d).norm() <= 1e-10);
    }
  }
}

TEST_CASE("engine preconditions are enforced") {
  Topology topo = Topology::path(3);
  const int n = 3, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(6u, topo, d, d + 1);
  auto kernels = identity_kernels(n, d, 1.0);

  SUBCASE("unbalanced initial multipliers are refused at start") {
    DenseEngineConfig cfg;
    cfg.q0 = Vec::Ones(n * d);
    ReferenceAmm ref(prob, wp, DenseSurrogate::bregman(kernels), cfg);
    CHECK_THROWS_WITH_AS(ref.start(), doctest::Contains("sum to zero"), AmmError);
    DistributedConfig dcfg;
    dcfg.q0 = std::vector<Vec>(n, Vec::Ones(d));
    DammEngine eng(prob, wp, kernels, dcfg);
    CHECK_THROWS_WITH_AS(eng.start(), doctest::Contains("sum to zero"), AmmError);
  }

  SUBCASE("split variant refuses nonzero initial multipliers") {
    DenseEngineConfig cfg;
    cfg.q0 = Vec::Ones(n * d) - Vec::Ones(n * d) / 3.0;
    CHECK_THROWS_WITH_AS(SplitEngine(prob, wp, DenseSurrogate::bregman(kernels), cfg),
                         doctest::Contains("zero initial multipliers"), AmmError);
  }

  SUBCASE("constant-update engine requires smooth problems and derives x0") {
    NetworkProblem with_h = prob;
    with_h.h[1] = NonsmoothLocal::l1(0.1);
    std::vector<SmoothLocal> g;
    for (int i = 0; i < n; ++i) g.push_back(SmoothLocal::zero(d));
    ConjugateGenerator gen = ConjugateGenerator::separable_smooth(g, 1.0);
    CHECK_THROWS_WITH_AS(DammScEngine(with_h, wp, gen, {}),
                         doctest::Contains("nonsmooth"), AmmError);
    DistributedConfig cfg;
    cfg.x0 = std::vector<Vec>(n, Vec::Zero(d));
    CHECK_THROWS_WITH_AS(DammScEngine(prob, wp, gen, cfg),
                         doctest::Contains("seed points"), AmmError);
  }

  SUBCASE("quadratic-update engine validates the step matrix up front") {
    const double rho = 1.0;
    const double too_big = 2.0 / (rho * lambda_max(wp.P));
    SqProvider sq = SqProvider::constant(too_big * Mat::Identity(n * d, n * d));
    DistributedConfig cfg;
    cfg.rho = rho;
    CHECK_THROWS_WITH_AS(DammSqEngine(prob, wp, sq, cfg),
                         doctest::Contains("step matrix rejected"), AmmError);
  }

  SUBCASE("weights off the graph are refused") {
    WeightPair dense_wp{Mat::Ones(n, n), Mat::Ones(n, n)};
    CHECK_THROWS_WITH_AS(DammEngine(prob, dense_wp, kernels, {}),
                         doctest::Contains("non-adjacent"), AmmError);
  }

  SUBCASE("rounds before start are refused") {
    DammEngine eng(prob, wp, kernels, {});
    CHECK_THROWS_WITH_AS(eng.round(), doctest::Contains("start()"), AmmError);
  }

  SUBCASE("oversized dense state is refused") {
    Topology big = Topology::path(21);
    WeightPair bwp = build_metropolis(big);
    NetworkProblem bprob = make_least_squares_network(2u, big, 100, 1);
    CHECK_THROWS_WITH_AS(
        ReferenceAmm(bprob, bwp, DenseSurrogate::bregman(identity_kernels(21, 100, 1.0)), {}),
        doctest::Contains("cap"), AmmError);
  }
}

TEST_CASE("a stalled local solve names the node and aborts the round") {
  Topology topo = Topology::path(3);
  const int n = 3, d = 2;
  WeightPair wp = build_metropolis(topo);
  NetworkProblem prob = make_least_squares_network(14u, topo, d, d + 1);
  for (int i = 0; i < n; ++i) prob.h[i] = NonsmoothLocal::l1(0.2);

  std::mt19937_64 rng(15u);
  std::vector<BregmanKernel> kernels;
  for (int i = 0; i < n; ++i)
    kernels.push_back(BregmanKernel::data_quadratic(amm::testing::random_spd(rng, d, 0.5) +
                                                    Mat::Identity(d, d)));
  DistributedConfig cfg;
  cfg.inner.tolerance = 1e-16;
  cfg.inner.max_iters = 1;
  cfg.x0 = std::vector<Vec>(n, Vec::Constant(d, 10.0));
  DammEngine eng(prob, wp, kernels, cfg);
  eng.start();
  CHECK_THROWS_WITH_AS(eng.round(), doctest::Contains("node 1"), AmmError);

  DenseEngineConfig rcfg;
  rcfg.inner.tolerance = 1e-16;
  rcfg.inner.max_iters = 1;
  rcfg.x0 = Vec::Constant(n * d, 10.0);
  ReferenceAmm ref(prob, wp, DenseSurrogate::bregman(kernels), rcfg);
  ref.start();
  CHECK_THROWS_WITH_AS(ref.round(), doctest::Contains("stalled"), AmmError);
}
