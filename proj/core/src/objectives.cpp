#include "amm/objectives.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace amm {

SmoothLocal SmoothLocal::zero(int dim) {
  SmoothLocal s;
  s.kind_ = Kind::zero;
  s.dim_ = dim;
  return s;
}

SmoothLocal SmoothLocal::quadratic(Mat B, Vec b) {
  if (B.rows() != b.size()) throw AmmError("quadratic: B rows must match b length");
  SmoothLocal s;
  s.kind_ = Kind::quadratic;
  s.dim_ = static_cast<int>(B.cols());
  s.smoothness_ = B.size() == 0 ? 0.0 : lambda_max(Mat(B.transpose() * B));
  s.A_ = std::move(B);
  s.y_ = std::move(b);
  return s;
}

SmoothLocal SmoothLocal::logistic(Mat features, Vec labels) {
  if (features.rows() != labels.size())
    throw AmmError("logistic: feature rows must match label count");
  for (Eigen::Index j = 0; j < labels.size(); ++j)
    if (labels(j) != 1.0 && labels(j) != -1.0)
      throw AmmError("logistic: labels must be +1 or -1");
  SmoothLocal s;
  s.kind_ = Kind::logistic;
  s.dim_ = static_cast<int>(features.cols());
  s.smoothness_ =
      features.size() == 0 ? 0.0 : 0.25 * lambda_max(Mat(features.transpose() * features));
  s.A_ = std::move(features);
  s.y_ = std::move(labels);
  return s;
}

namespace {
double softplus(double z) {  // log(1 + e^z), overflow-safe
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}
}  // namespace

double SmoothLocal::value(const Vec& x) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::quadratic:
      return 0.5 * (A_ * x - y_).squaredNorm();
    case Kind::logistic: {
      double v = 0;
      const Vec t = A_ * x;
      for (Eigen::Index j = 0; j < y_.size(); ++j) v += softplus(-y_(j) * t(j));
      return v;
    }
  }
  return 0.0;
}

Vec SmoothLocal::grad(const Vec& x) const {
  switch (kind_) {
    case Kind::zero:
      return Vec::Zero(dim_);
    case Kind::quadratic:
      return A_.transpose() * (A_ * x - y_);
    case Kind::logistic: {
      const Vec t = A_ * x;
      Vec coef(y_.size());
      for (Eigen::Index j = 0; j < y_.size(); ++j)
        coef(j) = -y_(j) / (1.0 + std::exp(y_(j) * t(j)));
      return A_.transpose() * coef;
    }
  }
  return Vec::Zero(dim_);
}

Mat SmoothLocal::hessian(const Vec& x) const {
  switch (kind_) {
    case Kind::zero:
      return Mat::Zero(dim_, dim_);
    case Kind::quadratic:
      return A_.transpose() * A_;
    case Kind::logistic: {
      const Vec t = A_ * x;
      Vec coef(y_.size());
      for (Eigen::Index j = 0; j < y_.size(); ++j) {
        const double s = 1.0 / (1.0 + std::exp(-t(j)));
        coef(j) = s * (1.0 - s);
      }
      return A_.transpose() * coef.asDiagonal() * A_;
    }
  }
  return Mat::Zero(dim_, dim_);
}

bool NetworkProblem::f_all_zero() const {
  for (const auto& fi : f)
    if (!fi.is_zero()) return false;
  return true;
}

bool NetworkProblem::h_all_zero() const {
  for (const auto& hi : h)
    if (!hi.is_zero()) return false;
  return true;
}

double NetworkProblem::sum_smoothness() const {
  double m = 0;
  for (const auto& fi : f) m += fi.smoothness();
  return m;
}

double NetworkProblem::smooth_value(const std::vector<Vec>& x) const {
  double v = 0;
  for (int i = 0; i < nodes(); ++i) v += f[i].value(x[i]);
  return v;
}

double NetworkProblem::nonsmooth_value(const std::vector<Vec>& x) const {
  double v = 0;
  for (int i = 0; i < nodes(); ++i) {
    const double hv = h[i].value(x[i]);
    if (!std::isfinite(hv)) return std::numeric_limits<double>::infinity();
    v += hv;
  }
  return v;
}

double NetworkProblem::value_at_common(const Vec& xc) const {
  double v = 0;
  for (int i = 0; i < nodes(); ++i) {
    v += f[i].value(xc);
    const double hv = h[i].value(xc);
    if (!std::isfinite(hv)) return std::numeric_limits<double>::infinity();
    v += hv;
  }
  return v;
}

void NetworkProblem::validate() const {
  const size_t n = static_cast<size_t>(topo.nodes());
  if (f.size() != n || h.size() != n)
    throw AmmError("network problem: need one smooth and one nonsmooth term per node");
  for (const auto& fi : f)
    if (fi.dim() != d) throw AmmError("network problem: smooth term dimension mismatch");
  if (d <= 0) throw AmmError("network problem: dimension must be positive");
}

namespace {

Mat random_normal_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

Vec random_normal_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace

NetworkProblem make_least_squares_network(std::uint64_t seed, const Topology& topo, int dim,
                                          int rows) {
  std::mt19937_64 rng(seed);
  NetworkProblem p;
  p.topo = topo;
  p.d = dim;
  for (int i = 0; i < topo.nodes(); ++i) {
    Mat B = random_normal_matrix(rng, rows, dim);
    Vec b = random_normal_vector(rng, rows);
    p.f.push_back(SmoothLocal::quadratic(std::move(B), std::move(b)));
    p.h.push_back(NonsmoothLocal::zero());
  }
  p.validate();
  return p;
}

NetworkProblem make_constrained_lasso_network(std::uint64_t seed, int n_nodes, int dim, int rows,
                                              int n_edges) {
  std::mt19937_64 rng(seed);
  NetworkProblem p;
  p.topo = Topology::random_connected(n_nodes, n_edges, rng());
  p.d = dim;
  const double l1_weight = 1.0 / n_nodes;
  for (int i = 0; i < n_nodes; ++i) {
    Mat B = random_normal_matrix(rng, rows, dim);
    Vec b = random_normal_vector(rng, rows);
    Vec a = random_normal_vector(rng, dim);
    const double radius = a.norm() + 1.0;
    p.f.push_back(SmoothLocal::quadratic(std::move(B), std::move(b)));
    p.h.push_back(NonsmoothLocal::sum(
        {NonsmoothLocal::l1(l1_weight), NonsmoothLocal::ball(std::move(a), radius)}));
  }
  p.validate();
  return p;
}

NetworkProblem make_logistic_network(std::uint64_t seed, const Topology& topo, int dim,
                                     int samples_per_node) {
  std::mt19937_64 rng(seed);
  NetworkProblem p;
  p.topo = topo;
  p.d = dim;
  const Vec separator = random_normal_vector(rng, dim);
  std::bernoulli_distribution flip(0.05);
  for (int i = 0; i < topo.nodes(); ++i) {
    Mat features = random_normal_matrix(rng, samples_per_node, dim);
    Vec labels(samples_per_node);
    for (int j = 0; j < samples_per_node; ++j) {
      const double s = features.row(j).dot(separator) >= 0 ? 1.0 : -1.0;
      labels(j) = flip(rng) ? -s : s;
    }
    p.f.push_back(SmoothLocal::logistic(std::move(features), std::move(labels)));
    p.h.push_back(NonsmoothLocal::zero());
  }
  p.validate();
  return p;
}

// serialization --------------------------------------------------------------

namespace {

void write_matrix(std::ostream& out, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << "\n";
  }
}

void write_vector(std::ostream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v(i);
  out << "\n";
}

void write_nonsmooth(std::ostream& out, const NonsmoothLocal& h) {
  switch (h.kind()) {
    case NonsmoothLocal::Kind::zero:
      out << "h zero\n";
      break;
    case NonsmoothLocal::Kind::l1:
      out << "h l1 " << h.l1_weight() << "\n";
      break;
    case NonsmoothLocal::Kind::ball:
      out << "h ball " << h.radius() << "\n";
      write_vector(out, h.center());
      break;
    case NonsmoothLocal::Kind::sum:
      out << "h sum " << h.terms().size() << "\n";
      for (const auto& t : h.terms()) write_nonsmooth(out, t);
      break;
  }
}

Mat read_matrix(std::istream& in, int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(in >> m(i, j))) throw AmmError("problem file: truncated matrix");
  return m;
}

Vec read_vector(std::istream& in, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i)
    if (!(in >> v(i))) throw AmmError("problem file: truncated vector");
  return v;
}

NonsmoothLocal read_nonsmooth(std::istream& in, int dim) {
  std::string tag, kind;
  if (!(in >> tag >> kind) || tag != "h") throw AmmError("problem file: expected h record");
  if (kind == "zero") return NonsmoothLocal::zero();
  if (kind == "l1") {
    double w;
    if (!(in >> w)) throw AmmError("problem file: l1 weight missing");
    return NonsmoothLocal::l1(w);
  }
  if (kind == "ball") {
    double r;
    if (!(in >> r)) throw AmmError("problem file: ball radius missing");
    Vec c = read_vector(in, dim);
    return NonsmoothLocal::ball(std::move(c), r);
  }
  if (kind == "sum") {
    int k;
    if (!(in >> k) || k < 1) throw AmmError("problem file: bad sum arity");
    std::vector<NonsmoothLocal> terms;
    for (int t = 0; t < k; ++t) terms.push_back(read_nonsmooth(in, dim));
    return NonsmoothLocal::sum(std::move(terms));
  }
  throw AmmError("problem file: unknown nonsmooth kind '" + kind + "'");
}

}  // namespace

void save_problem(const NetworkProblem& p, const std::string& path) {
  p.validate();
  std::ofstream out(path);
  if (!out) throw AmmError("save_problem: cannot write " + path);
  out.precision(17);
  out << "amm-problem v1\n";
  out << "nodes " << p.nodes() << "\n";
  out << "dim " << p.d << "\n";
  out << "edges " << p.topo.edge_count() << "\n";
  for (const auto& [a, b] : p.topo.edges()) out << (a + 1) << " " << (b + 1) << "\n";
  for (int i = 0; i < p.nodes(); ++i) {
    out << "node " << (i + 1) << "\n";
    const SmoothLocal& fi = p.f[i];
    switch (fi.kind()) {
      case SmoothLocal::Kind::zero:
        out << "f zero\n";
        break;
      case SmoothLocal::Kind::quadratic:
        out << "f quadratic " << fi.data_matrix().rows() << "\n";
        write_matrix(out, fi.data_matrix());
        write_vector(out, fi.data_vector());
        break;
      case SmoothLocal::Kind::logistic:
        out << "f logistic " << fi.data_matrix().rows() << "\n";
        write_matrix(out, fi.data_matrix());
        write_vector(out, fi.data_vector());
        break;
    }
    write_nonsmooth(out, p.h[i]);
  }
}

NetworkProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AmmError("load_problem: cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "amm-problem" || version != "v1")
    throw AmmError("load_problem: unrecognized header in " + path);
  std::string key;
  int n = 0, d = 0, e = 0;
  in >> key >> n;
  if (key != "nodes") throw AmmError("load_problem: expected 'nodes'");
  in >> key >> d;
  if (key != "dim") throw AmmError("load_problem: expected 'dim'");
  in >> key >> e;
  if (key != "edges") throw AmmError("load_problem: expected 'edges'");
  std::vector<std::pair<int, int>> edges;
  for (int t = 0; t < e; ++t) {
    int a, b;
    if (!(in >> a >> b)) throw AmmError("load_problem: truncated edge list");
    edges.emplace_back(a - 1, b - 1);
  }
  NetworkProblem p;
  p.topo = Topology::from_edges(n, std::move(edges));
  p.d = d;
  for (int i = 0; i < n; ++i) {
    int idx;
    in >> key >> idx;
    if (key != "node" || idx != i + 1) throw AmmError("load_problem: expected node record");
    std::string tag, kind;
    in >> tag >> kind;
    if (tag != "f") throw AmmError("load_problem: expected f record");
    if (kind == "zero") {
      p.f.push_back(SmoothLocal::zero(d));
    } else if (kind == "quadratic" || kind == "logistic") {
      int rows;
      if (!(in >> rows)) throw AmmError("load_problem: row count missing");
      Mat A = read_matrix(in, rows, d);
      Vec y = read_vector(in, rows);
      p.f.push_back(kind == "quadratic" ? SmoothLocal::quadratic(std::move(A), std::move(y))
                                        : SmoothLocal::logistic(std::move(A), std::move(y)));
    } else {
      throw AmmError("load_problem: unknown smooth kind '" + kind + "'");
    }
    p.h.push_back(read_nonsmooth(in, d));
  }
  p.validate();
  return p;
}

}  // namespace amm
