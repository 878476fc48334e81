#include <random>

#include "doctest.h"
#include "support/oracles.hpp"

#include "amm/local_solver.hpp"

using namespace amm;
using namespace amm::testing;

namespace {

Subproblem make_sp(const BregmanKernel& k, const NonsmoothLocal& h, Vec c, Vec anchor) {
  Subproblem sp;
  sp.kernel = &k;
  sp.h = &h;
  sp.linear = std::move(c);
  sp.anchor = std::move(anchor);
  return sp;
}

}  // namespace

TEST_CASE("closed forms for the elementary dispatches") {
  SUBCASE("scaled identity with no nonsmooth part") {
    auto k = BregmanKernel::scaled_identity(2, 1.0);
    auto h = NonsmoothLocal::zero();
    Vec c(2);
    c << 2, -2;
    auto sol = solve_subproblem(make_sp(k, h, c, Vec::Zero(2)));
    CHECK(sol.converged);
    CHECK(sol.x(0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(sol.x(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sol.residual <= 1e-12);
  }

  SUBCASE("scaled identity with an l1 part soft-thresholds") {
    auto k = BregmanKernel::scaled_identity(2, 1.0);
    auto h = NonsmoothLocal::l1(1.0);
    Vec c(2);
    c << -1.5, -0.2;
    auto sol = solve_subproblem(make_sp(k, h, c, Vec::Zero(2)));
    CHECK(sol.x(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.x(1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.residual <= 1e-10);
  }

  SUBCASE("anchored-quadratic kernel with affine gradient part") {
    std::mt19937_64 rng(3);
    Mat B = random_mat(rng, 3, 3);
    auto r = SmoothLocal::quadratic(B, random_vec(rng, 3));
    auto k = BregmanKernel::proximal(r, 0.6);
    auto h = NonsmoothLocal::zero();
    Vec c = random_vec(rng, 3), anchor = random_vec(rng, 3);
    auto sol = solve_subproblem(make_sp(k, h, c, anchor));
    CHECK(sol.converged);
    CHECK((k.grad(sol.x, anchor) + c).norm() <= 1e-9);
  }
}

TEST_CASE("quadratic kernel constrained to a ball") {
  Mat q(2, 2);
  q << 2, 0, 0, 1;
  auto k = BregmanKernel::data_quadratic(q);
  auto h = NonsmoothLocal::ball(Vec::Zero(2), 1.0);
  Vec c(2);
  c << -4, 0;
  auto sol = solve_subproblem(make_sp(k, h, c, Vec::Zero(2)));
  CHECK(sol.converged);
  Vec expected(2);
  expected << 1, 0;
  CHECK((sol.x - expected).norm() <= 1e-7);

  // independent check: value dominance over a brute-force grid refinement
  auto F = [&](const Vec& x) { return 0.5 * x.dot(q * x) + c.dot(x) + h.value(x); };
  Vec brute = grid_minimize_2d_refined(F, -1.5, 1.5, 1e-2, 1e-4);
  CHECK(F(sol.x) <= F(brute) + 1e-8);
}

TEST_CASE("closed-form and iterative paths agree") {
  std::mt19937_64 rng(7);
  InnerSolverConfig tight;
  tight.force_iterative = true;
  tight.tolerance = 1e-12;

  SUBCASE("scaled identity against every nonsmooth kind") {
    for (int t = 0; t < 50; ++t) {
      const int d = 3;
      const double eps = 0.5 + 2.5 * (t % 5) / 4.0;
      auto k = BregmanKernel::scaled_identity(d, eps);
      NonsmoothLocal h = NonsmoothLocal::zero();
      switch (t % 4) {
        case 0: h = NonsmoothLocal::zero(); break;
        case 1: h = NonsmoothLocal::l1(0.3 + 0.1 * (t % 3)); break;
        case 2: h = NonsmoothLocal::ball(random_vec(rng, d), 0.5 + 0.5 * (t % 2)); break;
        case 3:
          h = NonsmoothLocal::sum({NonsmoothLocal::l1(0.2),
                                   NonsmoothLocal::ball(random_vec(rng, d, 0.3), 1.5)});
          break;
      }
      auto sp = make_sp(k, h, random_vec(rng, d), random_vec(rng, d));
      auto exact = solve_subproblem(sp);
      auto iter = solve_subproblem(sp, tight);
      REQUIRE(iter.converged);
      CHECK((exact.x - iter.x).norm() <= 1e-8);
    }
  }

  SUBCASE("linear-solve path against the iterative path") {
    for (int t = 0; t < 50; ++t) {
      const int d = 4;
      auto k = BregmanKernel::data_quadratic(random_spd(rng, d, 0.4));
      auto h = NonsmoothLocal::zero();
      auto sp = make_sp(k, h, random_vec(rng, d), random_vec(rng, d));
      auto exact = solve_subproblem(sp);
      auto iter = solve_subproblem(sp, tight);
      REQUIRE(iter.converged);
      CHECK((exact.x - iter.x).norm() <= 1e-8);
    }
  }
}

TEST_CASE("returned points satisfy the optimality inclusion") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const int d = 3;
    auto k = BregmanKernel::data_quadratic(random_spd(rng, d, 0.5));
    NonsmoothLocal h = (t % 3 == 0)
                           ? NonsmoothLocal::l1(0.4)
                           : (t % 3 == 1)
                                 ? NonsmoothLocal::ball(random_vec(rng, d, 0.5), 1.0)
                                 : NonsmoothLocal::sum({NonsmoothLocal::l1(0.2),
                                                        NonsmoothLocal::ball(
                                                            random_vec(rng, d, 0.2), 2.0)});
    auto sp = make_sp(k, h, random_vec(rng, d), random_vec(rng, d));
    auto sol = solve_subproblem(sp);
    REQUIRE(sol.converged);
    CHECK(h.subgrad_dist(sol.x, -(k.grad(sol.x, sp.anchor) + sp.linear)) <= 1e-7);
  }
}

TEST_CASE("plain proximal gradient decreases the objective monotonically") {
  std::mt19937_64 rng(9);
  const int d = 4;
  auto k = BregmanKernel::data_quadratic(random_spd(rng, d, 0.3));
  auto h = NonsmoothLocal::ball(Vec::Zero(d), 0.8);
  auto sp = make_sp(k, h, random_vec(rng, d, 2.0), random_vec(rng, d, 0.2));

  std::vector<double> objectives;
  InnerSolverConfig cfg;
  cfg.accelerate = false;
  cfg.force_iterative = true;
  cfg.observer = [&](const Vec&, double obj) { objectives.push_back(obj); };
  auto sol = solve_subproblem(sp, cfg);
  REQUIRE(sol.converged);
  REQUIRE(objectives.size() >= 2);
  for (std::size_t i = 1; i < objectives.size(); ++i)
    CHECK(objectives[i] <= objectives[i - 1] + 1e-12);
}

TEST_CASE("iteration cap returns the best iterate with a residual flag") {
  std::mt19937_64 rng(10);
  const int d = 4;
  auto k = BregmanKernel::data_quadratic(random_spd(rng, d, 0.05));
  auto h = NonsmoothLocal::ball(Vec::Zero(d), 0.8);
  auto sp = make_sp(k, h, random_vec(rng, d, 2.0), random_vec(rng, d, 0.2));

  InnerSolverConfig cfg;
  cfg.force_iterative = true;
  cfg.tolerance = 1e-15;
  cfg.max_iters = 5;
  auto sol = solve_subproblem(sp, cfg);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 5);
  CHECK(sol.residual > 0);
  CHECK(std::isfinite(sol.residual));
  CHECK(sol.x.allFinite());
}

TEST_CASE("warm starts at the solution finish immediately") {
  std::mt19937_64 rng(11);
  const int d = 3;
  auto k = BregmanKernel::data_quadratic(random_spd(rng, d, 0.4));
  auto h = NonsmoothLocal::l1(0.5);
  Vec c = random_vec(rng, d);

  InnerSolverConfig cfg;
  cfg.force_iterative = true;
  auto first = solve_subproblem(make_sp(k, h, c, random_vec(rng, d)), cfg);
  REQUIRE(first.converged);
  auto second = solve_subproblem(make_sp(k, h, c, first.x), cfg);
  CHECK(second.converged);
  CHECK(second.iterations <= 3);
}

TEST_CASE("composite driver recovers the soft-threshold solution") {
  std::mt19937_64 rng(12);
  const int d = 5;
  const double a = 1.7, lam = 0.6;
  Vec v = random_vec(rng, d, 2.0);

  CompositeProblem pb;
  pb.smooth_value = [&](const Vec& x) { return 0.5 * a * (x - v).squaredNorm(); };
  pb.smooth_grad = [&](const Vec& x) { return Vec(a * (x - v)); };
  pb.lipschitz = a;
  auto h = NonsmoothLocal::l1(lam);
  pb.prox = [&](const Vec& p, double step) { return h.prox(p, step); };
  pb.nonsmooth_value = [&](const Vec& x) { return h.value(x); };

  auto sol = prox_gradient_minimize(pb, Vec::Zero(d), {});
  REQUIRE(sol.converged);
  for (int j = 0; j < d; ++j) {
    const double expected = std::copysign(std::max(0.0, std::abs(v(j)) - lam / a), v(j));
    CHECK(sol.x(j) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("malformed subproblems and configurations are refused") {
  auto k = BregmanKernel::scaled_identity(2, 1.0);
  auto h = NonsmoothLocal::zero();

  SUBCASE("missing pieces") {
    Subproblem sp;
    sp.linear = Vec::Zero(2);
    sp.anchor = Vec::Zero(2);
    CHECK_THROWS_AS(solve_subproblem(sp), AmmError);
  }

  SUBCASE("dimension mismatch") {
    auto sp = make_sp(k, h, Vec::Zero(3), Vec::Zero(2));
    CHECK_THROWS_AS(solve_subproblem(sp), AmmError);
  }

  SUBCASE("degenerate kernel") {
    auto flat = BregmanKernel::data_quadratic(Mat::Zero(2, 2));
    auto sp = make_sp(flat, h, Vec::Zero(2), Vec::Zero(2));
    CHECK_THROWS_AS(solve_subproblem(sp), AmmError);
  }

  SUBCASE("non-positive tolerance") {
    auto sp = make_sp(k, h, Vec::Zero(2), Vec::Zero(2));
    InnerSolverConfig cfg;
    cfg.tolerance = 0;
    cfg.force_iterative = true;
    CHECK_THROWS_AS(solve_subproblem(sp, cfg), AmmError);
  }
}
