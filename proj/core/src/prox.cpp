#include <cmath>
#include <limits>
#include <optional>

#include "amm/objectives.hpp"

namespace amm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

NonsmoothLocal NonsmoothLocal::zero() { return NonsmoothLocal(); }

NonsmoothLocal NonsmoothLocal::l1(double weight) {
  if (weight < 0) throw AmmError("l1: weight must be nonnegative");
  NonsmoothLocal h;
  h.kind_ = Kind::l1;
  h.weight_ = weight;
  return h;
}

NonsmoothLocal NonsmoothLocal::ball(Vec center, double radius) {
  if (radius <= 0) throw AmmError("ball: radius must be positive");
  NonsmoothLocal h;
  h.kind_ = Kind::ball;
  h.center_ = std::move(center);
  h.radius_ = radius;
  return h;
}

NonsmoothLocal NonsmoothLocal::sum(std::vector<NonsmoothLocal> terms) {
  std::vector<NonsmoothLocal> flat;
  for (auto& t : terms) {
    if (t.kind_ == Kind::sum)
      for (auto& s : t.terms_) flat.push_back(std::move(s));
    else
      flat.push_back(std::move(t));
  }
  if (flat.empty()) return NonsmoothLocal();
  if (flat.size() == 1) return std::move(flat.front());
  NonsmoothLocal h;
  h.kind_ = Kind::sum;
  h.terms_ = std::move(flat);
  return h;
}

bool NonsmoothLocal::is_zero() const {
  if (kind_ == Kind::zero) return true;
  if (kind_ == Kind::l1) return weight_ == 0;
  return false;
}

double NonsmoothLocal::value(const Vec& x) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::l1:
      return weight_ * x.lpNorm<1>();
    case Kind::ball:
      return (x - center_).norm() <= radius_ + 1e-12 * std::max(1.0, radius_) ? 0.0 : kInf;
    case Kind::sum: {
      double v = 0;
      for (const auto& t : terms_) {
        const double tv = t.value(x);
        if (!std::isfinite(tv)) return kInf;
        v += tv;
      }
      return v;
    }
  }
  return 0.0;
}

namespace {

Vec soft_threshold(const Vec& v, double t) {
  Vec out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) > t)
      out(j) = v(j) - t;
    else if (v(j) < -t)
      out(j) = v(j) + t;
    else
      out(j) = 0.0;
  }
  return out;
}

Vec project_ball(const Vec& v, const Vec& center, double radius) {
  const Vec u = v - center;
  const double n = u.norm();
  if (n <= radius) return v;
  return center + (radius / n) * u;
}

}  // namespace

Vec NonsmoothLocal::prox(const Vec& v, double step) const {
  if (step <= 0) throw AmmError("prox: step must be positive");
  switch (kind_) {
    case Kind::zero:
      return v;
    case Kind::l1:
      return soft_threshold(v, weight_ * step);
    case Kind::ball:
      return project_ball(v, center_, radius_);
    case Kind::sum: {
      // Dykstra splitting across the elementary proxes; converges to the prox
      // of the sum because each term is proper closed convex.
      const int m = static_cast<int>(terms_.size());
      Vec x = v;
      std::vector<Vec> p(m, Vec::Zero(v.size()));
      double residual = kInf;
      for (int it = 0; it < kSumProxMaxIter; ++it) {
        const Vec x_prev = x;
        for (int i = 0; i < m; ++i) {
          const Vec y = terms_[i].prox(x + p[i], step);
          p[i] += x - y;
          x = y;
        }
        residual = (x - x_prev).norm();
        if (residual <= kSumProxTol) return x;
      }
      throw AmmError("prox: sum splitting did not converge (residual " +
                     std::to_string(residual) + " after " + std::to_string(kSumProxMaxIter) +
                     " sweeps)");
    }
  }
  return v;
}

namespace {

// Projection of g onto the subdifferential of an elementary term at x;
// nullopt when the subdifferential is empty (x outside a ball).
std::optional<Vec> project_subdiff(const NonsmoothLocal& h, const Vec& x, const Vec& g,
                                   double zero_tol) {
  switch (h.kind()) {
    case NonsmoothLocal::Kind::zero:
      return Vec::Zero(x.size());
    case NonsmoothLocal::Kind::l1: {
      const double w = h.l1_weight();
      Vec out(x.size());
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (x(j) > zero_tol)
          out(j) = w;
        else if (x(j) < -zero_tol)
          out(j) = -w;
        else
          out(j) = std::clamp(g(j), -w, w);
      }
      return out;
    }
    case NonsmoothLocal::Kind::ball: {
      const Vec u = x - h.center();
      const double n = u.norm();
      const double tol = zero_tol * std::max(1.0, h.radius());
      if (n > h.radius() + tol) return std::nullopt;  // infeasible point
      if (n < h.radius() - tol) return Vec::Zero(x.size());
      // boundary: normal cone is the ray along (x - center)
      const Vec dir = u / n;
      const double t = std::max(0.0, g.dot(dir));
      return Vec(t * dir);
    }
    case NonsmoothLocal::Kind::sum:
      break;
  }
  throw AmmError("project_subdiff: not an elementary term");
}

}  // namespace

double NonsmoothLocal::subgrad_dist(const Vec& x, const Vec& g, double zero_tol) const {
  if (kind_ != Kind::sum) {
    auto p = project_subdiff(*this, x, g, zero_tol);
    if (!p) return kInf;
    return (g - *p).norm();
  }
  // Distance to a Minkowski sum of elementary subdifferentials: block
  // coordinate descent on min ||g - sum_i g_i|| with g_i constrained to the
  // i-th subdifferential. Each block step is an exact projection.
  const int m = static_cast<int>(terms_.size());
  std::vector<Vec> gi(m, Vec::Zero(x.size()));
  Vec r = g;
  double dist = r.norm();
  for (int sweep = 0; sweep < 500; ++sweep) {
    const double before = dist;
    for (int i = 0; i < m; ++i) {
      auto p = project_subdiff(terms_[i], x, r + gi[i], zero_tol);
      if (!p) return kInf;
      r += gi[i] - *p;
      gi[i] = *p;
    }
    dist = r.norm();
    if (before - dist <= 1e-14 * std::max(1.0, dist)) break;
  }
  return dist;
}

}  // namespace amm
