#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "amm/graph.hpp"

namespace amm {

namespace {

Eigen::SelfAdjointEigenSolver<Mat> eig(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw AmmError("eigendecomposition failed");
  return es;
}

}  // namespace

WeightPair build_metropolis(const Topology& topo, double scale) {
  if (scale <= 0) throw AmmError("build_metropolis: scale must be positive");
  const int n = topo.nodes();
  Mat m = Mat::Zero(n, n);
  for (const auto& [i, j] : topo.edges()) {
    const double w = -1.0 / (std::max(topo.degree(i), topo.degree(j)) + 1.0);
    m(i, j) = m(j, i) = w * scale;
  }
  for (int i = 0; i < n; ++i) m(i, i) = -m.row(i).sum();
  return {m, m};
}

WeightPair build_laplacian(const Topology& topo, double scale) {
  if (scale <= 0) throw AmmError("build_laplacian: scale must be positive");
  const int n = topo.nodes();
  Mat m = Mat::Zero(n, n);
  for (const auto& [i, j] : topo.edges()) m(i, j) = m(j, i) = -scale;
  for (int i = 0; i < n; ++i) m(i, i) = topo.degree(i) * scale;
  return {m, m};
}

namespace {

void validate_one(const Mat& p, const Topology& topo, const std::string& label,
                  ValidationReport& report) {
  const int n = topo.nodes();
  if (p.rows() != n || p.cols() != n) {
    report.add(label + " dimensions", false,
               "expected " + std::to_string(n) + "x" + std::to_string(n));
    return;
  }
  // (a) symmetry
  double asym = (p - p.transpose()).cwiseAbs().maxCoeff();
  report.add(label + " symmetry", asym <= 1e-12, "max |p_ij - p_ji| = " + std::to_string(asym));

  // (b) neighbor sparsity
  bool sparse_ok = true;
  std::string where;
  for (int i = 0; i < n && sparse_ok; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || topo.is_edge(i, j)) continue;
      if (std::abs(p(i, j)) > 1e-12) {
        sparse_ok = false;
        where = "nonzero at (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
        break;
      }
    }
  report.add(label + " neighbor sparsity", sparse_ok, where);

  // (c) null space = span(1): P*1 = 0 and second eigenvalue > tol
  const double row_sum = (p * Vec::Ones(n)).norm();
  report.add(label + " row sums", row_sum <= 1e-12, "||P*1|| = " + std::to_string(row_sum));
  auto es = eig(p);
  const Vec& ev = es.eigenvalues();
  report.add(label + " positive semidefinite", ev(0) >= -1e-10,
             "min eigenvalue = " + std::to_string(ev(0)));
  if (n >= 2) {
    report.add(label + " second eigenvalue", ev(1) >= 1e-9,
               "second-smallest eigenvalue = " + std::to_string(ev(1)));
  }
}

}  // namespace

ValidationReport validate_weight_pair(const WeightPair& wp, const Topology& topo,
                                      bool require_dominated) {
  ValidationReport report;
  validate_one(wp.P, topo, "P", report);
  validate_one(wp.Pt, topo, "P~", report);
  if (require_dominated && wp.P.rows() == wp.Pt.rows()) {
    const double lo = lambda_min(wp.P - wp.Pt);
    report.add("P dominates P~", lo >= -1e-10, "min eigenvalue of P - P~ = " + std::to_string(lo));
  }
  return report;
}

double lambda_max_upper_bound(const Mat& P, const Topology& topo) {
  double m = 0;
  for (const auto& [i, j] : topo.edges()) m = std::max(m, std::abs(P(i, j)));
  return m * topo.nodes();
}

double lambda_max(const Mat& symmetric) {
  return eig(symmetric).eigenvalues().maxCoeff();
}

double lambda_min(const Mat& symmetric) {
  return eig(symmetric).eigenvalues().minCoeff();
}

Mat kron_identity(const Mat& P, int d) {
  Mat out = Mat::Zero(P.rows() * d, P.cols() * d);
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < P.cols(); ++j)
      if (P(i, j) != 0.0)
        out.block(i * d, j * d, d, d) = P(i, j) * Mat::Identity(d, d);
  return out;
}

double smallest_nonzero_eigenvalue(const Mat& P, double zero_tol) {
  auto es = eig(P);
  const Vec& ev = es.eigenvalues();
  if (ev.size() < 2) throw AmmError("smallest_nonzero_eigenvalue: matrix too small");
  if (std::abs(ev(0)) > zero_tol)
    throw AmmError("smallest_nonzero_eigenvalue: no zero eigenvalue (min = " +
                   std::to_string(ev(0)) + ")");
  if (std::abs(ev(1)) <= zero_tol)
    throw AmmError("smallest_nonzero_eigenvalue: zero eigenvalue has multiplicity > 1 "
                   "(second-smallest = " + std::to_string(ev(1)) +
                   "); matrix does not satisfy Null = span(1)");
  return ev(1);
}

void save_matrix_csv(const Mat& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw AmmError("save_matrix_csv: cannot write " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << m(i, j);
    }
    out << "\n";
  }
}

Mat load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AmmError("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw AmmError("load_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw AmmError("load_matrix_csv: empty file " + path);
  Mat m(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace amm
