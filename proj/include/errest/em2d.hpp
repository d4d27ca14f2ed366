#pragma once

#include "errest/estimator.hpp"
#include "errest/fem.hpp"

namespace errest {

/// 90-degree rotation Q = [[0,1],[-1,0]]: rot E = div(Q E), grad_perp H = Q grad H.
inline Eigen::Matrix2d rotation_q() {
  Eigen::Matrix2d q;
  q << 0.0, 1.0, -1.0, 0.0;
  return q;
}

/// Material data for grad_perp(mu^{-1} rot E) + c eps E = J with
/// c = 1 (Maxwell type) or i omega (eddy current); eps doubles as sigma.
struct EMCoefficients {
  std::vector<Eigen::Matrix2d> eps;
  std::vector<double> mu;
  CaseMode mode = CaseMode::I;
  double omega = 0.0;

  static EMCoefficients sample(const Mesh2D& mesh,
                               const std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>& e,
                               const std::function<double(const Eigen::Vector2d&)>& m,
                               CaseMode mode, double omega = 0.0) {
    detail::require(mode == CaseMode::I || omega != 0.0,
                    "EMCoefficients: omega must be nonzero in Case II");
    EMCoefficients c;
    c.mode = mode;
    c.omega = omega;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      const ElementGeometry g = element_geometry(mesh, t);
      const Eigen::Vector2d centroid = (g.p[0] + g.p[1] + g.p[2]) / 3.0;
      c.eps.push_back(e(centroid));
      c.mu.push_back(m(centroid));
      detail::require(c.mu.back() > 0.0, "EMCoefficients: mu must be positive");
    }
    return c;
  }

  Complex reaction_factor() const {
    return mode == CaseMode::I ? Complex(1.0, 0.0) : Complex(0.0, omega);
  }
  Eigen::Matrix2d primal_weight(int t) const {
    return mode == CaseMode::I ? eps[t] : Eigen::Matrix2d(std::abs(omega) * eps[t]);
  }
};

/// Closed-form exact pair (E, H) with H = mu^{-1} rot E; the current is
/// derived per element as J = grad_perp H + c eps E.
struct EMManufactured {
  std::function<Vector2c(const Eigen::Vector2d&)> E;
  std::function<Complex(const Eigen::Vector2d&)> rot_E;
  std::function<Complex(const Eigen::Vector2d&)> H;
  std::function<Vector2c(const Eigen::Vector2d&)> grad_H;
  std::optional<int> polynomial_degree;
};

inline Vector2c em_current(const EMCoefficients& coeff, const EMManufactured& exact,
                           int t, const Eigen::Vector2d& x) {
  const Eigen::Matrix2d q = rotation_q();
  return q.cast<Complex>() * exact.grad_H(x) +
         coeff.reaction_factor() * (coeff.eps[t].cast<Complex>() * exact.E(x));
}

/// H(rot)-conforming fields are realized as rotated RT0: E = Q^T w with w an
/// RT0 field, so rot E = div w and the tangential trace of E is (up to sign)
/// the normal trace of w. Dirichlet edges of E constrain w's flux dofs.
struct EMSolution {
  Vector w;  // RT0 edge coefficients representing E = Q^T w
  Vector H;  // P1 vertex coefficients
};

inline Vector2c em_e_value(const ElementGeometry& g, const Mesh2D& mesh,
                           const EdgeTable& edges, int t, const Vector& w,
                           const Eigen::Vector2d& x) {
  return rotation_q().transpose().cast<Complex>() * rt0_value(g, mesh, edges, t, w, x);
}

inline Complex em_rot_value(const ElementGeometry& g, const EdgeTable& edges, int t,
                            const Vector& w) {
  return rt0_divergence(g, edges, t, w);
}

/// Interpolant of a manufactured E into the rotated-RT0 space (edge dofs of
/// the RT0 representative w = Q E).
inline Vector em_interpolate_e(const Mesh2D& mesh, const EdgeTable& edges,
                               const EMManufactured& exact) {
  const Eigen::Matrix2d q = rotation_q();
  return rt0_interpolate(mesh, edges, [&](const Eigen::Vector2d& x) {
    return Vector2c(q.cast<Complex>() * exact.E(x));
  });
}

/// Conforming Galerkin solves of the primal problem (E in rotated RT0 with
/// Gamma_D tangential constraint) and of the dual problem (H in P1 with
/// Gamma_N constraint); the boundary tag roles are exchanged relative to the
/// reaction-diffusion pairing.
inline EMSolution em_solve(const Mesh2D& mesh, const EdgeTable& edges,
                           const EMCoefficients& coeff, const EMManufactured& exact,
                           int quad_degree = 6) {
  const Eigen::Matrix2d q = rotation_q();
  EMSolution sol;
  {
    const RT0Space space(mesh, edges, {BoundaryTag::Dirichlet});
    RT0Problem prob;
    prob.mass = [&](int t) { return Eigen::Matrix2d(q * coeff.eps[t] * q.transpose()); };
    prob.mass_factor = [&](int t) { return coeff.reaction_factor(); };
    prob.divdiv = [&](int t) { return Complex(1.0 / coeff.mu[t], 0.0); };
    prob.vec_load = [&](int t, const Eigen::Vector2d& x) {
      return Vector2c(q.cast<Complex>() * em_current(coeff, exact, t, x));
    };
    prob.quad_degree = quad_degree;
    prob.hermitian = coeff.mode == CaseMode::I;
    sol.w = rt0_solve(mesh, edges, space, prob);
  }
  {
    const P1Space space(mesh, {BoundaryTag::Neumann});
    P1Problem prob;
    prob.stiffness = [&](int t) {
      const Eigen::Matrix2d winv =
          coeff.mode == CaseMode::I
              ? Eigen::Matrix2d(coeff.eps[t].inverse())
              : Eigen::Matrix2d((coeff.omega * coeff.eps[t]).inverse());
      return Eigen::Matrix2d(q.transpose() * winv * q);
    };
    prob.mass = [&](int t) {
      return coeff.mode == CaseMode::I ? Complex(coeff.mu[t], 0.0)
                                       : Complex(0.0, coeff.mu[t]);
    };
    prob.grad_load = [&](int t, const Eigen::Vector2d& x) {
      const Eigen::Matrix2d winv =
          coeff.mode == CaseMode::I
              ? Eigen::Matrix2d(coeff.eps[t].inverse())
              : Eigen::Matrix2d((coeff.omega * coeff.eps[t]).inverse());
      return Vector2c(q.transpose().cast<Complex>() *
                      (winv.cast<Complex>() * em_current(coeff, exact, t, x)));
    };
    prob.quad_degree = quad_degree;
    prob.hermitian = coeff.mode == CaseMode::I;
    sol.H = p1_solve(mesh, space, prob);
  }
  return sol;
}

/// Element-wise quadrature of M_ec and of the combined error against the
/// manufactured pair.
inline FemEvaluation em_majorant_and_error(const Mesh2D& mesh, const EdgeTable& edges,
                                           const EMCoefficients& coeff,
                                           const EMManufactured& exact, const Vector& w,
                                           const Vector& h, int quad_degree = 6) {
  FemEvaluation out;
  if (exact.polynomial_degree && quad_degree < 2 * *exact.polynomial_degree)
    out.quadrature_warning = true;
  const TriangleRule& rule = triangle_rule(quad_degree);
  const Eigen::Matrix2d q = rotation_q();
  const Complex c = coeff.reaction_factor();
  out.indicators.eta_sq.resize(mesh.n_triangles());
  out.indicators.e_sq.resize(mesh.n_triangles());
  KahanSum res_eq, res_flux, err_primal, err_dual;

  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    const Eigen::Matrix2d w1 = coeff.primal_weight(t);
    const Eigen::Matrix2d w1_inv = w1.inverse();
    const double mu = coeff.mu[t];

    const Complex rot_et = em_rot_value(g, edges, t, w);
    const Vector2c grad_ht = p1_gradient(g, mesh, t, h);
    const Vector2c gp_ht = q.cast<Complex>() * grad_ht;

    double eq = 0.0, flux = 0.0, prim = 0.0, dual = 0.0;
    auto quad_form = [](const Vector2c& v, const Eigen::Matrix2d& b) {
      return std::real(v.dot(b.cast<Complex>() * v));
    };
    for (std::size_t qq = 0; qq < rule.size(); ++qq) {
      const Eigen::Vector2d x = g.point(rule.xi[qq], rule.eta[qq]);
      const double wq = rule.w[qq] * 2.0 * g.area;

      const Vector2c et = em_e_value(g, mesh, edges, t, w, x);
      const Complex ht = p1_value(mesh, t, h, rule.xi[qq], rule.eta[qq]);

      const Vector2c e_exact = exact.E(x);
      const Complex rot_exact = exact.rot_E(x);
      const Complex h_exact = exact.H(x);
      const Vector2c gp_exact = q.cast<Complex>() * exact.grad_H(x);
      const Vector2c j = em_current(coeff, exact, t, x);

      const Vector2c r_eq = j - c * (coeff.eps[t].cast<Complex>() * et) - gp_ht;
      const Complex r_flux = ht - rot_et / mu;
      eq += wq * quad_form(r_eq, w1_inv);
      flux += wq * mu * std::norm(r_flux);

      const Vector2c de = e_exact - et;
      const Complex drot = rot_exact - rot_et;
      const Complex dh = h_exact - ht;
      const Vector2c dgp = gp_exact - gp_ht;
      prim += wq * (quad_form(de, w1) + std::norm(drot) / mu);
      dual += wq * (mu * std::norm(dh) + quad_form(dgp, w1_inv));
    }
    out.indicators.eta_sq[t] = eq + flux;
    out.indicators.e_sq[t] = prim + dual;
    res_eq.add(eq);
    res_flux.add(flux);
    err_primal.add(prim);
    err_dual.add(dual);
  }

  out.indicators.recompute_totals();
  out.error.primal_sq = err_primal.value();
  out.error.dual_sq = err_dual.value();
  out.error.total_sq = out.error.primal_sq + out.error.dual_sq;
  out.majorant.residual_equation_sq = res_eq.value();
  out.majorant.residual_flux_sq = res_flux.value();
  out.majorant.total = res_eq.value() + res_flux.value();
  if (coeff.mode == CaseMode::I) {
    out.majorant.lower_bound = out.majorant.total;
    out.majorant.upper_bound = out.majorant.total;
  } else {
    out.majorant.lower_bound = kCase2Lower * out.majorant.total;
    out.majorant.upper_bound = kCase2Upper * out.majorant.total;
  }
  if (out.error.total_sq > 0.0)
    out.majorant.efficiency_index = out.majorant.total / out.error.total_sq;
  return out;
}

/// |J|^2 in the eps^{-1} resp. (|omega| sigma)^{-1} weight.
inline double em_j_norm_sq(const Mesh2D& mesh, const EMCoefficients& coeff,
                           const EMManufactured& exact, int quad_degree = 6) {
  const TriangleRule& rule = triangle_rule(quad_degree);
  KahanSum total;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    const Eigen::Matrix2d w1_inv = coeff.primal_weight(t).inverse();
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
      const Vector2c j = em_current(coeff, exact, t, x);
      local += rule.w[q] * 2.0 * g.area * std::real(j.dot(w1_inv.cast<Complex>() * j));
    }
    total.add(local);
  }
  return total.value();
}

// --- manufactured-solution catalog -------------------------------------------

struct EMCase {
  std::string name;
  TagPredicate tags;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&)> eps;
  std::function<double(const Eigen::Vector2d&)> mu;
  EMManufactured exact;
  std::string description;
};

inline const std::vector<EMCase>& em_catalog() {
  static const std::vector<EMCase> catalog = [] {
    std::vector<EMCase> list;

    // Polynomial field with vanishing tangential trace on the whole boundary.
    {
      EMCase c;
      c.name = "em-poly3";
      c.description = "cubic E with zero tangential trace everywhere";
      c.tags = all_dirichlet();
      Eigen::Matrix2d eps;
      eps << 2.0, 0.5, 0.5, 1.0;
      c.eps = [eps](const Eigen::Vector2d&) { return eps; };
      const double mu = 2.0;
      c.mu = [mu](const Eigen::Vector2d&) { return mu; };
      c.exact.E = [](const Eigen::Vector2d& x) {
        return Vector2c(Complex(x.y() * (1.0 - x.y()) * (1.0 + x.x()), 0),
                        Complex(x.x() * (1.0 - x.x()) * (1.0 - x.y()), 0));
      };
      c.exact.rot_E = [](const Eigen::Vector2d& x) {
        return Complex((1.0 - 2.0 * x.x()) * (1.0 - x.y()) -
                           (1.0 - 2.0 * x.y()) * (1.0 + x.x()),
                       0);
      };
      c.exact.H = [mu](const Eigen::Vector2d& x) {
        return Complex(((1.0 - 2.0 * x.x()) * (1.0 - x.y()) -
                        (1.0 - 2.0 * x.y()) * (1.0 + x.x())) /
                           mu,
                       0);
      };
      c.exact.grad_H = [mu](const Eigen::Vector2d& x) {
        return Vector2c(Complex((-3.0 + 4.0 * x.y()) / mu, 0),
                        Complex((1.0 + 4.0 * x.x()) / mu, 0));
      };
      c.exact.polynomial_degree = 3;
      list.push_back(std::move(c));
    }

    // Trigonometric field, same boundary layout.
    {
      EMCase c;
      c.name = "em-sin";
      c.description = "trigonometric E with zero tangential trace everywhere";
      c.tags = all_dirichlet();
      c.eps = [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Identity(); };
      const double mu = 1.0;
      c.mu = [mu](const Eigen::Vector2d&) { return mu; };
      const double pi = M_PI;
      c.exact.E = [pi](const Eigen::Vector2d& x) {
        return Vector2c(Complex(std::sin(pi * x.y()) * std::cos(pi * x.x()), 0),
                        Complex(2.0 * std::sin(pi * x.x()) * std::cos(pi * x.y()), 0));
      };
      c.exact.rot_E = [pi](const Eigen::Vector2d& x) {
        return Complex(pi * std::cos(pi * x.x()) * std::cos(pi * x.y()), 0);
      };
      c.exact.H = [pi, mu](const Eigen::Vector2d& x) {
        return Complex(pi * std::cos(pi * x.x()) * std::cos(pi * x.y()) / mu, 0);
      };
      c.exact.grad_H = [pi, mu](const Eigen::Vector2d& x) {
        return Vector2c(
            Complex(-pi * pi * std::sin(pi * x.x()) * std::cos(pi * x.y()) / mu, 0),
            Complex(-pi * pi * std::cos(pi * x.x()) * std::sin(pi * x.y()) / mu, 0));
      };
      list.push_back(std::move(c));
    }

    return list;
  }();
  return catalog;
}

inline const EMCase& find_em_case(const std::string& name) {
  for (const auto& c : em_catalog())
    if (c.name == name) return c;
  throw LinalgError("unknown manufactured solution: " + name);
}

}  // namespace errest
