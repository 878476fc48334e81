#include <cmath>

#include "amm/objectives.hpp"

namespace amm {

namespace {

// prox of the sum of all nodes' nonsmooth terms at one common point
Vec summed_prox(const NetworkProblem& p, const Vec& v, double step) {
  std::vector<NonsmoothLocal> terms;
  for (const auto& hi : p.h)
    if (!hi.is_zero()) terms.push_back(hi);
  if (terms.empty()) return v;
  return NonsmoothLocal::sum(std::move(terms)).prox(v, step);
}

}  // namespace

ReferenceSolution solve_reference_optimum(const NetworkProblem& p, const ReferenceOptions& opt) {
  p.validate();
  const double sum_m = p.sum_smoothness();
  // Proximal gradient with step 1/sum(M_i); pure proximal point when there is
  // no smooth part.
  const double step = sum_m > 0 ? 1.0 / sum_m : 1.0;

  Vec x = opt.x0.size() == p.d ? opt.x0 : Vec::Zero(p.d);
  // start feasible so the objective is finite from the first iterate
  x = summed_prox(p, x, step);

  ReferenceSolution sol;
  double change = 0;
  for (long it = 1; it <= opt.max_iter; ++it) {
    Vec grad = Vec::Zero(p.d);
    for (const auto& fi : p.f)
      if (!fi.is_zero()) grad += fi.grad(x);
    const Vec x_next = summed_prox(p, x - step * grad, step);
    change = (x_next - x).norm();
    x = x_next;
    sol.iterations = it;
    if (change < opt.change_tol) {
      sol.converged = true;
      break;
    }
  }
  sol.x_star = x;
  sol.F_star = p.value_at_common(x);
  sol.final_change = change;
  if (!sol.converged)
    sol.warning = "reference optimum: iteration cap reached with successive change " +
                  std::to_string(change);
  return sol;
}

}  // namespace amm
