#include "amm/local_solver.hpp"

#include <cmath>
#include <limits>

namespace amm {

namespace {

void check_subproblem(const Subproblem& sp) {
  if (!sp.kernel || !sp.h) throw AmmError("solve_subproblem: kernel and h must be set");
  const int d = sp.kernel->dim();
  if (sp.linear.size() != d || sp.anchor.size() != d)
    throw AmmError("solve_subproblem: linear term and anchor must have the kernel's dimension");
  if (sp.kernel->modulus() <= 0)
    throw AmmError("solve_subproblem: kernel is not strongly convex");
}

}  // namespace

SubproblemSolution prox_gradient_minimize(const CompositeProblem& pb, const Vec& start,
                                          const InnerSolverConfig& cfg) {
  if (cfg.tolerance <= 0) throw AmmError("inner solver: tolerance must be positive");
  if (pb.lipschitz <= 0) throw AmmError("inner solver: lipschitz constant must be positive");
  const double step = 1.0 / pb.lipschitz;

  Vec x = start;     // accepted iterate
  Vec y = start;     // extrapolated point
  double t = 1.0;    // momentum coefficient
  double obj = pb.smooth_value(x) + pb.nonsmooth_value(x);

  SubproblemSolution best;
  best.x = start;
  best.residual = std::numeric_limits<double>::infinity();

  for (long it = 1; it <= cfg.max_iters; ++it) {
    const Vec gy = pb.smooth_grad(y);
    const Vec p = pb.prox(y - step * gy, step);
    // (y - p)/step - gy is a subgradient of the nonsmooth part at p, so this
    // vector lies in the subdifferential of the composite objective at p
    const double residual = (pb.smooth_grad(p) - gy + (y - p) / step).norm();
    const double obj_new = pb.smooth_value(p) + pb.nonsmooth_value(p);
    if (cfg.observer) cfg.observer(p, obj_new);
    if (residual < best.residual) {
      best.x = p;
      best.residual = residual;
    }
    if (residual <= cfg.tolerance) {
      best.x = p;
      best.residual = residual;
      best.iterations = it;
      best.converged = true;
      return best;
    }
    if (!cfg.accelerate) {
      y = p;  // plain proximal gradient: monotone with step 1/lipschitz
    } else if (obj_new > obj) {
      t = 1.0;  // objective increased: drop the momentum, restart from p
      y = p;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = p + ((t - 1.0) / t_next) * (p - x);
      t = t_next;
    }
    x = p;
    obj = obj_new;
  }
  best.iterations = cfg.max_iters;
  best.converged = false;
  return best;
}

SubproblemSolution solve_subproblem(const Subproblem& sp, const InnerSolverConfig& cfg) {
  check_subproblem(sp);
  const BregmanKernel& kernel = *sp.kernel;
  const NonsmoothLocal& h = *sp.h;
  const Vec& c = sp.linear;
  const int d = kernel.dim();

  if (!cfg.force_iterative) {
    if (kernel.kind() == BregmanKernel::Kind::scaled_identity) {
      // (eps/2)|x|^2 + <c,x> + h(x) = h(x) + (eps/2)|x + c/eps|^2 + const
      const double eps = kernel.smoothness();
      SubproblemSolution sol;
      sol.x = h.prox(-c / eps, 1.0 / eps);
      sol.residual = h.subgrad_dist(sol.x, -(eps * sol.x + c));
      sol.converged = true;
      return sol;
    }
    if (kernel.quadratic_at_anchor() && h.is_zero()) {
      const Mat q = kernel.quad_matrix(sp.anchor);
      const Vec r0 = kernel.grad(Vec::Zero(d), sp.anchor);  // affine part of grad psi
      SubproblemSolution sol;
      sol.x = q.ldlt().solve(-(c + r0));
      sol.residual = (q * sol.x + r0 + c).norm();
      sol.converged = true;
      return sol;
    }
  }

  CompositeProblem pb;
  pb.smooth_value = [&](const Vec& x) { return kernel.value(x, sp.anchor) + c.dot(x); };
  pb.smooth_grad = [&](const Vec& x) { return Vec(kernel.grad(x, sp.anchor) + c); };
  pb.lipschitz = kernel.smoothness();
  pb.prox = [&](const Vec& v, double step) { return h.prox(v, step); };
  pb.nonsmooth_value = [&](const Vec& x) { return h.value(x); };
  return prox_gradient_minimize(pb, sp.anchor, cfg);
}

}  // namespace amm
