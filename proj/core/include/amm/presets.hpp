#pragma once

#include <memory>
#include <string>
#include <vector>

#include "amm/engines.hpp"

namespace amm {

// Which engine a preset configuration drives.
enum class PresetTarget {
  per_node,          // kernel-based per-node engine
  quadratic_update,  // step-matrix per-node engine
  dense,             // dense reference engine with a quadratic surrogate
  split,             // dense split-step engine with scaled-identity kernels
};

// A named, validated algorithm configuration: penalty strength, weight pair,
// surrogate payload for the target engine, and the initial-multiplier rule
// q0 = (q0_map (x) I_d) x0 (a zero map means q0 = 0). Some algorithms pin
// their multiplier seed to that rule; the rest accept any balanced override.
struct Preset {
  std::string name;
  PresetTarget target = PresetTarget::dense;
  int nodes = 0;
  int dim = 0;
  double rho = 1.0;
  WeightPair weights;

  std::vector<BregmanKernel> kernels;  // per_node and split targets
  SqProvider step_matrices;            // quadratic_update target
  QuadraticSurrogate dense_surrogate;  // dense target

  Mat q0_map;            // N x N node-level map applied to x0
  bool q0_fixed = false; // true: overrides are part of the algorithm and refused

  // d-vectors each node sends per round in the method's native distributed
  // form, used as the declared communication cost when the preset runs on an
  // oracle-hosted engine: one for single-exchange kernel methods, two for
  // methods exchanging two vector classes per round, K + 2 for the
  // series-truncated second-order method.
  double published_cost = 1.0;

  // (q0_map (x) I_d) x0 for a stacked x0.
  Vec initial_multipliers(const Vec& x0) const;

  // Constructs and configures the target engine. Empty x0 means zeros. A
  // nonempty q0_override replaces the preset rule and must be balanced;
  // presets with a pinned rule refuse it.
  std::unique_ptr<Engine> build(const NetworkProblem& prob, const Vec& x0 = Vec(),
                                const Vec& q0_override = Vec(),
                                const InnerSolverConfig& inner = InnerSolverConfig()) const;
};

// Free parameters for make_preset. Each algorithm reads the subset it needs;
// matrix and vector fields left empty fall back to documented defaults built
// from the problem topology (a lazy Metropolis averaging matrix, a Laplacian
// coupling, or uniform coefficients).
struct PresetParams {
  double alpha = 0.0;    // step size (extra, id_fbbs, lei_primal_dual, diging_static, esom)
  double c = 0.0;        // coupling strength (dqm, decentralized_admm, distributed_admm_makhdoumi)
  double rho = 0.0;      // penalty strength (pg_extra, d_fbbs, split_prox)
  double epsilon = 0.0;  // curvature offset (esom, split_prox)
  int K = 0;             // series truncation order (esom)
  Mat W;                 // averaging matrix
  Mat W_tilde;           // second averaging matrix (extra, pgc, id_fbbs)
  Mat Gamma;             // coupling matrix (dpga, distributed_admm_makhdoumi, lei_primal_dual)
  Vec beta;              // per-node proximal weights (pgc)
  Vec c_i;               // per-node step sizes (dpga)
};

// The 13 registered algorithm names.
std::vector<std::string> preset_names();

// Builds and validates the named configuration against the given problem.
// Violated preconditions raise a configuration error naming the failed matrix
// inequality (e.g. "W̃ − W not PSD").
Preset make_preset(const std::string& name, const PresetParams& params,
                   const NetworkProblem& prob);

// Default averaging matrix: I - M/2 with M the Metropolis penalty matrix.
// Symmetric, rows sum to one, entrywise nonnegative, positive definite.
Mat lazy_metropolis_matrix(const Topology& topo);

}  // namespace amm
