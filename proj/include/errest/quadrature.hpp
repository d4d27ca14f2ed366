#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace errest {

/// Gauss-Legendre rule on [0,1]; exact for polynomials of degree 2n-1.
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;  // sums to 1
};

namespace detail {

inline GaussRule compute_gauss_rule(int n) {
  // Newton iteration on P_n over [-1,1], mapped to [0,1].
  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      if (n == 1) p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? t : p1;
      const double pn1 = (n == 1) ? 1.0 : p0;
      dp = n * (t * pn - pn1) / (t * t - 1.0);
      const double dt = pn / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    rule.x[i] = 0.5 * (1.0 + t);
    rule.w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return rule;
}

}  // namespace detail

inline const GaussRule& gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_rule: need at least one point");
  static std::map<int, GaussRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_rule(n)).first;
  return it->second;
}

/// Number of Gauss points used for an edge integral of polynomial degree deg.
inline int edge_points_for_degree(int deg) { return (deg + 3) / 2; }

/// Quadrature on the reference triangle {(0,0),(1,0),(0,1)}. Weights are all
/// positive and sum to 1/2. Built as a collapsed Gauss product (Duffy map),
/// which is exact for total degree <= the requested degree.
struct TriangleRule {
  std::vector<double> xi;
  std::vector<double> eta;
  std::vector<double> w;
  int degree = 0;
  std::size_t size() const { return w.size(); }
};

namespace detail {

inline TriangleRule compute_triangle_rule(int degree) {
  // With xi = u, eta = v (1-u) the integrand of total degree d becomes degree
  // d+1 in u (including the Jacobian 1-u) and degree d in v.
  const int nu = (degree + 3) / 2;
  const int nv = (degree + 2) / 2;
  const GaussRule& gu = gauss_rule(nu);
  const GaussRule& gv = gauss_rule(std::max(nv, 1));
  TriangleRule rule;
  rule.degree = degree;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < std::max(nv, 1); ++j) {
      const double u = gu.x[i];
      const double v = gv.x[j];
      rule.xi.push_back(u);
      rule.eta.push_back(v * (1.0 - u));
      rule.w.push_back(gu.w[i] * gv.w[j] * (1.0 - u));
    }
  return rule;
}

}  // namespace detail

inline const TriangleRule& triangle_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("triangle_rule: degree must be >= 0");
  static std::map<int, TriangleRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end())
    it = cache.emplace(degree, detail::compute_triangle_rule(degree)).first;
  return it->second;
}

}  // namespace errest
