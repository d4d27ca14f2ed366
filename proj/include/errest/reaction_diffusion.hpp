#pragma once

#include "errest/estimator.hpp"
#include "errest/fem.hpp"

#include <optional>

namespace errest {

/// Piecewise-constant material data for -div(alpha grad u) + c rho u = f,
/// c = 1 (Case I) or i omega (Case II).
struct RDCoefficients {
  std::vector<Eigen::Matrix2d> alpha;
  std::vector<double> rho;
  CaseMode mode = CaseMode::I;
  double omega = 0.0;

  static RDCoefficients sample(const Mesh2D& mesh,
                               const std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>& a,
                               const std::function<double(const Eigen::Vector2d&)>& r,
                               CaseMode mode, double omega = 0.0) {
    detail::require(mode == CaseMode::I || omega != 0.0,
                    "RDCoefficients: omega must be nonzero in Case II");
    RDCoefficients c;
    c.mode = mode;
    c.omega = omega;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      const ElementGeometry g = element_geometry(mesh, t);
      const Eigen::Vector2d centroid = (g.p[0] + g.p[1] + g.p[2]) / 3.0;
      c.alpha.push_back(a(centroid));
      c.rho.push_back(r(centroid));
      detail::require(c.rho.back() > 0.0, "RDCoefficients: rho must be positive");
    }
    return c;
  }

  Complex reaction_factor() const {
    return mode == CaseMode::I ? Complex(1.0, 0.0) : Complex(0.0, omega);
  }
  /// Weight of the primal L2 norms: rho or |omega| rho.
  double reaction_weight(int t) const {
    return mode == CaseMode::I ? rho[t] : std::abs(omega) * rho[t];
  }
};

/// Closed-form exact solution; the source is derived per element as
/// f = -div p + c rho u, consistent with the piecewise coefficients.
struct RDManufactured {
  std::function<Complex(const Eigen::Vector2d&)> u;
  std::function<Vector2c(const Eigen::Vector2d&)> grad_u;
  std::function<Vector2c(const Eigen::Vector2d&)> p;  // alpha grad u
  std::function<Complex(const Eigen::Vector2d&)> div_p;
  std::optional<int> polynomial_degree;
};

inline Complex rd_source(const RDCoefficients& coeff, const RDManufactured& exact, int t,
                         const Eigen::Vector2d& x) {
  return -exact.div_p(x) + coeff.reaction_factor() * coeff.rho[t] * exact.u(x);
}

/// Galerkin solution of the primal problem in P1 (H^1 conforming, Dirichlet
/// vertices constrained). Returns the full vertex coefficient vector.
inline Vector rd_solve_primal(const Mesh2D& mesh, const RDCoefficients& coeff,
                              const RDManufactured& exact, int quad_degree = 6) {
  const P1Space space(mesh, {BoundaryTag::Dirichlet});
  P1Problem prob;
  prob.stiffness = [&](int t) { return coeff.alpha[t]; };
  prob.mass = [&](int t) { return coeff.reaction_factor() * coeff.rho[t]; };
  prob.load = [&](int t, const Eigen::Vector2d& x) { return rd_source(coeff, exact, t, x); };
  prob.dirichlet = [&](const Eigen::Vector2d& x) { return exact.u(x); };
  prob.quad_degree = quad_degree;
  prob.hermitian = coeff.mode == CaseMode::I;
  return p1_solve(mesh, space, prob);
}

/// Galerkin solution of the dual problem in RT0 (H(div) conforming, zero
/// normal flux on Neumann edges). Returns full edge coefficients.
inline Vector rd_solve_dual(const Mesh2D& mesh, const EdgeTable& edges,
                            const RDCoefficients& coeff, const RDManufactured& exact,
                            int quad_degree = 6) {
  const RT0Space space(mesh, edges, {BoundaryTag::Neumann});
  RT0Problem prob;
  prob.mass = [&](int t) { return Eigen::Matrix2d(coeff.alpha[t].inverse()); };
  prob.divdiv = [&](int t) {
    // Signed omega: the Case II dual form carries (omega rho)^{-1}.
    return coeff.mode == CaseMode::I ? Complex(1.0 / coeff.rho[t], 0.0)
                                     : Complex(1.0 / (coeff.omega * coeff.rho[t]), 0.0);
  };
  if (coeff.mode == CaseMode::II)
    prob.mass_factor = [](int) { return Complex(0.0, 1.0); };
  prob.div_load = [&](int t, const Eigen::Vector2d& x) {
    const Complex f = rd_source(coeff, exact, t, x);
    return coeff.mode == CaseMode::I ? -f / coeff.rho[t] : -f / (coeff.omega * coeff.rho[t]);
  };
  prob.quad_degree = quad_degree;
  prob.hermitian = coeff.mode == CaseMode::I;
  return rt0_solve(mesh, edges, space, prob);
}

/// Element-wise quadrature of the majorant terms and the four error-norm
/// terms against the manufactured exact pair; fills per-element eta_T^2 and
/// e_T^2 along the way.
inline FemEvaluation rd_majorant_and_error(const Mesh2D& mesh, const EdgeTable& edges,
                                           const RDCoefficients& coeff,
                                           const RDManufactured& exact,
                                           const Vector& u_coeffs, const Vector& p_coeffs,
                                           int quad_degree = 6) {
  FemEvaluation out;
  if (exact.polynomial_degree && quad_degree < 2 * *exact.polynomial_degree)
    out.quadrature_warning = true;

  const TriangleRule& rule = triangle_rule(quad_degree);
  const Complex c = coeff.reaction_factor();
  out.indicators.eta_sq.resize(mesh.n_triangles());
  out.indicators.e_sq.resize(mesh.n_triangles());
  KahanSum res_eq, res_flux, err_primal, err_dual;

  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    const Eigen::Matrix2d alpha = coeff.alpha[t];
    const Eigen::Matrix2d alpha_inv = alpha.inverse();
    const double w1 = coeff.reaction_weight(t);
    const double rho = coeff.rho[t];

    const Vector2c grad_ut = p1_gradient(g, mesh, t, u_coeffs);
    const Complex div_pt = rt0_divergence(g, edges, t, p_coeffs);

    double eq = 0.0, flux = 0.0, prim = 0.0, dual = 0.0;
    auto quad_form = [](const Vector2c& v, const Eigen::Matrix2d& b) {
      return std::real(v.dot(b.cast<Complex>() * v));
    };
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
      const double wq = rule.w[q] * 2.0 * g.area;

      const Complex ut = p1_value(mesh, t, u_coeffs, rule.xi[q], rule.eta[q]);
      const Vector2c pt = rt0_value(g, mesh, edges, t, p_coeffs, x);

      const Complex u = exact.u(x);
      const Vector2c grad_u = exact.grad_u(x);
      const Vector2c p = exact.p(x);
      const Complex div_p = exact.div_p(x);
      const Complex f = -div_p + c * rho * u;

      const Complex r_eq = f - c * rho * ut + div_pt;
      const Vector2c r_flux = pt - (alpha.cast<Complex>() * grad_ut);
      eq += wq * std::norm(r_eq) / w1;
      flux += wq * quad_form(r_flux, alpha_inv);

      const Complex du = u - ut;
      const Vector2c dgrad = grad_u - grad_ut;
      const Vector2c dp = p - pt;
      const Complex ddiv = div_p - div_pt;
      prim += wq * (w1 * std::norm(du) + quad_form(dgrad, alpha));
      dual += wq * (quad_form(dp, alpha_inv) + std::norm(ddiv) / w1);
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

/// |f|^2 in the rho^{-1} (Case I) resp. (|omega| rho)^{-1} (Case II) weight,
/// for the normalized identities.
inline double rd_f_norm_sq(const Mesh2D& mesh, const RDCoefficients& coeff,
                           const RDManufactured& exact, int quad_degree = 6) {
  const TriangleRule& rule = triangle_rule(quad_degree);
  KahanSum total;
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
      local += rule.w[q] * 2.0 * g.area * std::norm(rd_source(coeff, exact, t, x)) /
               coeff.reaction_weight(t);
    }
    total.add(local);
  }
  return total.value();
}

// --- manufactured-solution catalog -------------------------------------------

struct RDCase {
  std::string name;
  TagPredicate tags;
  std::function<Eigen::Matrix2d(const Eigen::Vector2d&)> alpha;
  std::function<double(const Eigen::Vector2d&)> rho;
  RDManufactured exact;
  std::string description;
};

namespace detail {

inline Eigen::Matrix2d diag2(double a, double b) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace detail

/// Built-in manufactured solutions on the unit square. Each entry's exact
/// pair is conforming for the given boundary tags.
inline const std::vector<RDCase>& rd_catalog() {
  static const std::vector<RDCase> catalog = [] {
    std::vector<RDCase> list;

    // u = H(x) + H(y), H(t) = t^2 (3 - 2t): pure Neumann, alpha = diag(2, 1/2).
    {
      RDCase c;
      c.name = "rd-poly3";
      c.description = "cubic with zero flux on the whole boundary, diagonal alpha";
      c.tags = all_neumann();
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(2.0, 0.5); };
      c.rho = [](const Eigen::Vector2d&) { return 1.0; };
      auto H = [](double t) { return t * t * (3.0 - 2.0 * t); };
      auto dH = [](double t) { return 6.0 * t * (1.0 - t); };
      auto ddH = [](double t) { return 6.0 - 12.0 * t; };
      c.exact.u = [H](const Eigen::Vector2d& x) { return Complex(H(x.x()) + H(x.y()), 0); };
      c.exact.grad_u = [dH](const Eigen::Vector2d& x) {
        return Vector2c(Complex(dH(x.x()), 0), Complex(dH(x.y()), 0));
      };
      c.exact.p = [dH](const Eigen::Vector2d& x) {
        return Vector2c(Complex(2.0 * dH(x.x()), 0), Complex(0.5 * dH(x.y()), 0));
      };
      c.exact.div_p = [ddH](const Eigen::Vector2d& x) {
        return Complex(2.0 * ddH(x.x()) + 0.5 * ddH(x.y()), 0);
      };
      c.exact.polynomial_degree = 3;
      list.push_back(std::move(c));
    }

    // u = y (2 - y): Dirichlet on y = 0, Neumann elsewhere, quadratic.
    {
      RDCase c;
      c.name = "rd-poly2";
      c.description = "quadratic, Dirichlet on the bottom edge";
      c.tags = [](double, double y) {
        return y < 1e-9 ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
      };
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(1.0, 3.0); };
      c.rho = [](const Eigen::Vector2d&) { return 2.0; };
      c.exact.u = [](const Eigen::Vector2d& x) { return Complex(x.y() * (2.0 - x.y()), 0); };
      c.exact.grad_u = [](const Eigen::Vector2d& x) {
        return Vector2c(Complex(0, 0), Complex(2.0 - 2.0 * x.y(), 0));
      };
      c.exact.p = [](const Eigen::Vector2d& x) {
        return Vector2c(Complex(0, 0), Complex(3.0 * (2.0 - 2.0 * x.y()), 0));
      };
      c.exact.div_p = [](const Eigen::Vector2d&) { return Complex(-6.0, 0); };
      c.exact.polynomial_degree = 2;
      list.push_back(std::move(c));
    }

    // u = H(x) + H(y) with a reaction jump across x = 1/2.
    {
      RDCase c;
      c.name = "rd-poly3-jump";
      c.description = "cubic with piecewise-constant reaction (jump at x = 1/2)";
      c.tags = all_neumann();
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(1.0, 1.0); };
      c.rho = [](const Eigen::Vector2d& x) { return x.x() > 0.5 ? 4.0 : 1.0; };
      auto H = [](double t) { return t * t * (3.0 - 2.0 * t); };
      auto dH = [](double t) { return 6.0 * t * (1.0 - t); };
      auto ddH = [](double t) { return 6.0 - 12.0 * t; };
      c.exact.u = [H](const Eigen::Vector2d& x) { return Complex(H(x.x()) + H(x.y()), 0); };
      c.exact.grad_u = [dH](const Eigen::Vector2d& x) {
        return Vector2c(Complex(dH(x.x()), 0), Complex(dH(x.y()), 0));
      };
      c.exact.p = c.exact.grad_u;
      c.exact.div_p = [ddH](const Eigen::Vector2d& x) {
        return Complex(ddH(x.x()) + ddH(x.y()), 0);
      };
      c.exact.polynomial_degree = 3;
      list.push_back(std::move(c));
    }

    // u = sin(pi x) sin(pi y): Dirichlet everywhere.
    {
      RDCase c;
      c.name = "rd-sinsin";
      c.description = "transcendental, Dirichlet on the whole boundary";
      c.tags = all_dirichlet();
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(2.0, 0.5); };
      c.rho = [](const Eigen::Vector2d&) { return 1.0; };
      const double pi = M_PI;
      c.exact.u = [pi](const Eigen::Vector2d& x) {
        return Complex(std::sin(pi * x.x()) * std::sin(pi * x.y()), 0);
      };
      c.exact.grad_u = [pi](const Eigen::Vector2d& x) {
        return Vector2c(Complex(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), 0),
                        Complex(pi * std::sin(pi * x.x()) * std::cos(pi * x.y()), 0));
      };
      c.exact.p = [pi](const Eigen::Vector2d& x) {
        return Vector2c(Complex(2.0 * pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), 0),
                        Complex(0.5 * pi * std::sin(pi * x.x()) * std::cos(pi * x.y()), 0));
      };
      c.exact.div_p = [pi](const Eigen::Vector2d& x) {
        return Complex(-2.5 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y()), 0);
      };
      list.push_back(std::move(c));
    }

    // u = sin(pi x / 2) cos(pi y): Dirichlet on x = 0, Neumann elsewhere.
    {
      RDCase c;
      c.name = "rd-mixed";
      c.description = "transcendental with mixed Dirichlet/Neumann tags";
      c.tags = [](double x, double) {
        return x < 1e-9 ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
      };
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(1.0, 1.0); };
      c.rho = [](const Eigen::Vector2d&) { return 2.0; };
      const double pi = M_PI;
      c.exact.u = [pi](const Eigen::Vector2d& x) {
        return Complex(std::sin(0.5 * pi * x.x()) * std::cos(pi * x.y()), 0);
      };
      c.exact.grad_u = [pi](const Eigen::Vector2d& x) {
        return Vector2c(
            Complex(0.5 * pi * std::cos(0.5 * pi * x.x()) * std::cos(pi * x.y()), 0),
            Complex(-pi * std::sin(0.5 * pi * x.x()) * std::sin(pi * x.y()), 0));
      };
      c.exact.p = c.exact.grad_u;
      c.exact.div_p = [pi](const Eigen::Vector2d& x) {
        return Complex(-1.25 * pi * pi * std::sin(0.5 * pi * x.x()) * std::cos(pi * x.y()),
                       0);
      };
      list.push_back(std::move(c));
    }

    // Bubble-localized steep circular layer, Dirichlet everywhere.
    {
      RDCase c;
      c.name = "rd-layer";
      c.description = "steep interior layer (adaptive refinement benchmark)";
      c.tags = all_dirichlet();
      c.alpha = [](const Eigen::Vector2d&) { return detail::diag2(1.0, 1.0); };
      c.rho = [](const Eigen::Vector2d&) { return 1.0; };
      const double s = 20.0, r0 = 0.3, cx = 0.5, cy = 0.5;
      auto bub = [](double t) { return t * (1.0 - t); };
      auto dbub = [](double t) { return 1.0 - 2.0 * t; };
      auto parts = [=](const Eigen::Vector2d& x, double& B, Eigen::Vector2d& gB,
                       double& lapB, double& L, Eigen::Vector2d& gL, double& lapL) {
        B = 16.0 * bub(x.x()) * bub(x.y());
        gB = 16.0 * Eigen::Vector2d(dbub(x.x()) * bub(x.y()), bub(x.x()) * dbub(x.y()));
        lapB = 16.0 * (-2.0 * bub(x.y()) - 2.0 * bub(x.x()));
        const double gx = x.x() - cx, gy = x.y() - cy;
        const double gq = gx * gx + gy * gy - r0 * r0;
        const double den = 1.0 + s * s * gq * gq;
        L = std::atan(s * gq);
        gL = (2.0 * s / den) * Eigen::Vector2d(gx, gy);
        lapL = 4.0 * s / den - 8.0 * s * s * s * gq * (gx * gx + gy * gy) / (den * den);
      };
      c.exact.u = [parts](const Eigen::Vector2d& x) {
        double B, lapB, L, lapL;
        Eigen::Vector2d gB, gL;
        parts(x, B, gB, lapB, L, gL, lapL);
        return Complex(B * L, 0);
      };
      c.exact.grad_u = [parts](const Eigen::Vector2d& x) {
        double B, lapB, L, lapL;
        Eigen::Vector2d gB, gL;
        parts(x, B, gB, lapB, L, gL, lapL);
        const Eigen::Vector2d g = L * gB + B * gL;
        return Vector2c(Complex(g.x(), 0), Complex(g.y(), 0));
      };
      c.exact.p = c.exact.grad_u;
      c.exact.div_p = [parts](const Eigen::Vector2d& x) {
        double B, lapB, L, lapL;
        Eigen::Vector2d gB, gL;
        parts(x, B, gB, lapB, L, gL, lapL);
        return Complex(L * lapB + 2.0 * gB.dot(gL) + B * lapL, 0);
      };
      list.push_back(std::move(c));
    }

    return list;
  }();
  return catalog;
}

inline const RDCase& find_rd_case(const std::string& name) {
  for (const auto& c : rd_catalog())
    if (c.name == name) return c;
  throw LinalgError("unknown manufactured solution: " + name);
}

/// Solve + indicate pass for the adaptive loop: Galerkin P1/RT0 pair, then
/// element-wise majorant and error quadrature.
inline AdaptiveDriver rd_adaptive_driver(RDCase c, CaseMode mode, double omega,
                                         int quad_degree) {
  return [c = std::move(c), mode, omega, quad_degree](const Mesh2D& mesh) {
    const EdgeTable edges(mesh);
    const RDCoefficients coeff = RDCoefficients::sample(mesh, c.alpha, c.rho, mode, omega);
    const Vector u = rd_solve_primal(mesh, coeff, c.exact, quad_degree);
    const Vector p = rd_solve_dual(mesh, edges, coeff, c.exact, quad_degree);
    FemEvaluation eval =
        rd_majorant_and_error(mesh, edges, coeff, c.exact, u, p, quad_degree);
    AdaptiveStep step;
    step.indicators = std::move(eval.indicators);
    const P1Space p1(mesh, {BoundaryTag::Dirichlet});
    const RT0Space rt0(mesh, edges, {BoundaryTag::Neumann});
    step.n_dofs = p1.n_dofs() + rt0.n_dofs();
    return step;
  };
}

}  // namespace errest
