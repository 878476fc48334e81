#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace amm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error raised for invalid inputs, failed invariants, and refused configurations.
class AmmError : public std::runtime_error {
 public:
  explicit AmmError(const std::string& what) : std::runtime_error(what) {}
};

// Outcome of one validation sub-condition.
struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Aggregate of named sub-condition checks; failures carry the violating entry
// or eigenvalue in `detail`.
struct ValidationReport {
  std::vector<CheckResult> checks;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }
  void add(std::string name, bool pass, std::string detail = "") {
    checks.push_back({std::move(name), pass, std::move(detail)});
  }
  std::string to_string() const;
};

// Stacked <-> per-node conversions for states living in R^{N*d}.
Vec stack(const std::vector<Vec>& blocks);
std::vector<Vec> unstack(const Vec& v, int n_blocks, int d);

}  // namespace amm
