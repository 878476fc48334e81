#pragma once

// Per-node primal subproblem solver: minimize psi(x) + h(x) + <c, x> with psi a
// Bregman kernel anchored at the node's current iterate. Closed forms are used
// where they exist; otherwise an accelerated proximal-gradient inner loop with
// a computable optimality certificate.

#include <functional>

#include "amm/common.hpp"
#include "amm/objectives.hpp"
#include "amm/surrogates.hpp"

namespace amm {

// One node's subproblem: minimize psi(x) + h(x) + <linear, x>, where psi is
// anchored at `anchor` (also the warm start for the iterative path).
struct Subproblem {
  const BregmanKernel* kernel = nullptr;
  const NonsmoothLocal* h = nullptr;
  Vec linear;
  Vec anchor;
};

struct InnerSolverConfig {
  double tolerance = 1e-10;  // on the subgradient-residual norm
  long max_iters = 200000;
  bool accelerate = true;      // momentum with objective-increase restarts
  bool force_iterative = false;  // skip the closed-form dispatch (diagnostics)
  // optional per-iteration hook (iterate, composite objective value)
  std::function<void(const Vec&, double)> observer;
};

struct SubproblemSolution {
  Vec x;
  double residual = 0.0;  // distance of 0 from the objective's subdifferential
  long iterations = 0;
  bool converged = false;
};

// Dispatch:
//   (a) scaled-identity kernel: exact, x = prox_h(-c/eps, 1/eps)
//   (b) anchored-quadratic kernel and h == 0: exact linear solve
//   (c) otherwise: proximal gradient with step 1/smoothness, warm-started at
//       the anchor; the returned residual certifies the optimality inclusion
// Hitting max_iters returns the best iterate seen with converged == false.
SubproblemSolution solve_subproblem(const Subproblem& sp, const InnerSolverConfig& cfg = {});

// Generic composite minimization used by the per-node path (c) and the dense
// network-level solvers: minimize smooth(x) + nonsmooth(x).
struct CompositeProblem {
  std::function<double(const Vec&)> smooth_value;
  std::function<Vec(const Vec&)> smooth_grad;
  double lipschitz = 1.0;  // gradient-Lipschitz constant of the smooth part
  // argmin_p nonsmooth(p) + |p - v|^2 / (2*step)
  std::function<Vec(const Vec&, double)> prox;
  std::function<double(const Vec&)> nonsmooth_value;  // may return +inf
};

// Accelerated proximal gradient with fixed step 1/lipschitz. The residual of
// the returned point is ||grad F(p) - grad F(y) + (y - p)/step|| evaluated at
// the prox output p of the extrapolated point y; it bounds the distance from 0
// to the subdifferential of the composite objective at p.
SubproblemSolution prox_gradient_minimize(const CompositeProblem& pb, const Vec& start,
                                          const InnerSolverConfig& cfg = {});

}  // namespace amm
