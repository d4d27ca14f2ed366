#pragma once

#include "errest/linalg.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace errest {

/// Case I:  A* a2 A x +    a1 x = f   (exact error equality)
/// Case II: A* a2 A x + iw a1 x = f   (two-sided estimate)
enum class CaseMode { I, II };

inline constexpr double kCase2Lower = M_SQRT2 / (M_SQRT2 + 1.0);
inline constexpr double kCase2Upper = M_SQRT2 / (M_SQRT2 - 1.0);

/// A finite-dimensional instance of the mixed problem
///   A* y + c a1 x = f,   a2 A x = y,   c = 1 (Case I) or i*omega (Case II),
/// with A : C^n -> C^m and SPD weights a1 (n x n), a2 (m x m).
struct AbstractProblem {
  Operator a;
  WeightedSpace alpha1;
  WeightedSpace alpha2;
  CaseMode mode = CaseMode::I;
  double omega = 0.0;
  Vector f;

  AbstractProblem(Operator a_, WeightedSpace alpha1_, WeightedSpace alpha2_,
                  CaseMode mode_, double omega_, Vector f_)
      : a(std::move(a_)),
        alpha1(std::move(alpha1_)),
        alpha2(std::move(alpha2_)),
        mode(mode_),
        omega(omega_),
        f(std::move(f_)) {
    detail::require(alpha1.dim() == a.cols() && alpha2.dim() == a.rows(),
                    "AbstractProblem: weight dimensions do not match operator");
    detail::require(f.size() == a.cols(), "AbstractProblem: rhs dimension mismatch");
    detail::require(mode == CaseMode::I || omega != 0.0,
                    "AbstractProblem: omega must be nonzero in Case II");
  }

  static AbstractProblem case1(Operator a, WeightedSpace alpha1, WeightedSpace alpha2,
                               Vector f) {
    return AbstractProblem(std::move(a), std::move(alpha1), std::move(alpha2),
                           CaseMode::I, 0.0, std::move(f));
  }
  static AbstractProblem case2(Operator a, WeightedSpace alpha1, WeightedSpace alpha2,
                               double omega, Vector f) {
    return AbstractProblem(std::move(a), std::move(alpha1), std::move(alpha2),
                           CaseMode::II, omega, std::move(f));
  }

  int primal_dim() const { return a.cols(); }
  int dual_dim() const { return a.rows(); }

  /// The weight entering all primal norms: a1 in Case I, |omega| a1 in Case II.
  WeightedSpace primal_weight() const {
    return mode == CaseMode::I ? alpha1 : alpha1.scaled(std::abs(omega));
  }

  /// Multiplier of the a1-term in the strong equation: 1 or i*omega.
  Complex reaction_factor() const {
    return mode == CaseMode::I ? Complex(1.0, 0.0) : Complex(0.0, omega);
  }
};

struct MixedPair {
  Vector x;
  Vector y;
};

/// The squared combined (graph) norms of a pair; total = primal + dual.
struct CombinedNorms {
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  double total_sq = 0.0;
};

/// The two residual terms of the majorant, their total, and (Case II) the
/// interval bracketing the true squared combined error.
struct MajorantBreakdown {
  double residual_equation_sq = 0.0;
  double residual_flux_sq = 0.0;
  double total = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double efficiency_index = std::numeric_limits<double>::quiet_NaN();
};

struct IdentityReport {
  bool passed = true;
  double error_sq = 0.0;
  double majorant = 0.0;
  double deviation = 0.0;        // Case I: |M - e^2|
  double lower_bound = 0.0;      // Case II bracket
  double upper_bound = 0.0;
  double slack_lower = 0.0;      // e^2 - lower (>= 0 when the bound holds)
  double slack_upper = 0.0;      // upper - e^2
  double normalized_deviation = 0.0;
  std::string message;
};

struct IsometryReport {
  bool passed = true;
  double pair_norm_sq = 0.0;
  double f_norm_sq = 0.0;
  double ratio = 0.0;            // |(x,y)| / |f|
  double splitting_defect = 0.0; // Case II: |f|^2 - |A*y|^2 - |x|^2, relative
  std::string message;
};

struct OrthogonalityReport {
  bool passed = true;
  int kernel_dim = 0;
  double worst = 0.0;  // max |<y,k>_{a2^-1}| / (|y||k|)
  std::string message;
};

struct StrongIdentityReport {
  bool passed = true;
  double rel_residual = 0.0;
  std::string message;
};

struct SeparateBoundsReport {
  bool passed = true;
  double primal_sq = 0.0;
  double dual_sq = 0.0;
  double majorant = 0.0;
  std::string message;
};

struct DeltaBoundsReport {
  bool passed = true;
  double delta = 0.0;
  double lower_lhs = 0.0;  // (1-r/(2d)) prim + (1-r d/2) dual, r = sqrt(2)
  double upper_lhs = 0.0;
  double majorant = 0.0;
  std::string message;
};

/// Solves the primal problem (A* a2 A + c a1) x = f; residual <= 1e-10 rel.
inline Vector solve_primal(const AbstractProblem& p) {
  const Matrix& a = p.a.matrix();
  const Matrix gram = a.adjoint() * (p.alpha2.weight() * a);
  const Matrix system = gram + p.reaction_factor() * p.alpha1.weight();
  return p.mode == CaseMode::I ? solve_hpd(system, p.f) : solve_general(system, p.f);
}

/// y := a2 A x.
inline Vector lift_dual(const AbstractProblem& p, const Vector& x) {
  return p.alpha2.apply(p.a.apply(x));
}

/// Solves the dual variational problem
///   <A* y, A* psi>_{w1^-1} + c <y, psi>_{a2^-1} = <f, A* psi>_{w1^-1}
/// over the full dual space, with w1 = a1 (Case I) or omega*a1 (Case II,
/// signed) and c = 1 resp. i.
inline Vector solve_dual(const AbstractProblem& p) {
  const Matrix& a = p.a.matrix();
  const Matrix a1_inv = p.alpha1.inverse().weight();
  const Matrix a2_inv = p.alpha2.inverse().weight();
  if (p.mode == CaseMode::I) {
    const Matrix system = a * a1_inv * a.adjoint() + a2_inv;
    const Vector rhs = a * (a1_inv * p.f);
    return solve_hpd(system, rhs);
  }
  const Matrix w1_inv = a1_inv / p.omega;  // (omega a1)^-1, signed
  const Matrix system = a * w1_inv * a.adjoint() + Complex(0.0, 1.0) * a2_inv;
  const Vector rhs = a * (w1_inv * p.f);
  return solve_general(system, rhs);
}

inline MixedPair solve_mixed(const AbstractProblem& p) {
  Vector x = solve_primal(p);
  Vector y = lift_dual(p, x);
  return {std::move(x), std::move(y)};
}

/// Squared combined norm of a pair (not a difference).
inline CombinedNorms combined_norms(const AbstractProblem& p, const MixedPair& pair) {
  const WeightedSpace w1 = p.primal_weight();
  CombinedNorms n;
  n.primal_sq = w1.norm_sq(pair.x) + p.alpha2.norm_sq(p.a.apply(pair.x));
  n.dual_sq = p.alpha2.norm_inv_sq(pair.y) + w1.norm_inv_sq(p.a.apply_adjoint(pair.y));
  n.total_sq = n.primal_sq + n.dual_sq;
  return n;
}

/// Combined norm of the difference exact - approx (four weighted terms).
inline CombinedNorms combined_error(const AbstractProblem& p, const MixedPair& exact,
                                    const MixedPair& approx) {
  detail::require(exact.x.size() == approx.x.size() && exact.y.size() == approx.y.size(),
                  "combined_error: dimension mismatch");
  return combined_norms(p, {exact.x - approx.x, exact.y - approx.y});
}

/// The functional majorant of an arbitrary conforming pair:
///   M  = |f -      a1 xt - A* yt|^2_{a1^-1}        + |yt - a2 A xt|^2_{a2^-1}
///   Mi = |f - i w  a1 xt - A* yt|^2_{(|w| a1)^-1}  + |yt - a2 A xt|^2_{a2^-1}
inline MajorantBreakdown majorant(const AbstractProblem& p, const MixedPair& approx) {
  const WeightedSpace w1 = p.primal_weight();
  const Vector r_eq =
      p.f - p.reaction_factor() * p.alpha1.apply(approx.x) - p.a.apply_adjoint(approx.y);
  const Vector r_flux = approx.y - lift_dual(p, approx.x);
  MajorantBreakdown m;
  m.residual_equation_sq = w1.norm_inv_sq(r_eq);
  m.residual_flux_sq = p.alpha2.norm_inv_sq(r_flux);
  m.total = m.residual_equation_sq + m.residual_flux_sq;
  if (p.mode == CaseMode::I) {
    m.lower_bound = m.total;
    m.upper_bound = m.total;
  } else {
    m.lower_bound = kCase2Lower * m.total;
    m.upper_bound = kCase2Upper * m.total;
  }
  return m;
}

/// Majorant of the regular pair (xt, a2 A xt): the flux residual vanishes and
/// a single data term remains. Case I: equals e^2; Case II: brackets e^2
/// within a factor of 2.
inline MajorantBreakdown regular_pair_majorant(const AbstractProblem& p,
                                               const Vector& x_tilde) {
  MixedPair pair{x_tilde, lift_dual(p, x_tilde)};
  MajorantBreakdown m = majorant(p, pair);
  m.residual_flux_sq = 0.0;
  m.total = m.residual_equation_sq;
  if (p.mode == CaseMode::I) {
    m.lower_bound = m.total;
    m.upper_bound = m.total;
  } else {
    m.lower_bound = m.total;
    m.upper_bound = 2.0 * m.total;
  }
  return m;
}

/// Checks the Case I error equality resp. the Case II two-sided bound,
/// including the normalized counterparts.
inline IdentityReport check_error_identity(const AbstractProblem& p,
                                           const MixedPair& approx, double tol) {
  detail::require(tol > 0.0, "check_error_identity: tol must be positive");
  const MixedPair exact = solve_mixed(p);
  const CombinedNorms err = combined_error(p, exact, approx);
  const MajorantBreakdown m = majorant(p, approx);
  const double f_norm_sq = p.primal_weight().norm_inv_sq(p.f);
  const double sol_norm_sq = combined_norms(p, exact).total_sq;

  IdentityReport rep;
  rep.error_sq = err.total_sq;
  rep.majorant = m.total;
  rep.lower_bound = m.lower_bound;
  rep.upper_bound = m.upper_bound;
  std::ostringstream msg;
  if (p.mode == CaseMode::I) {
    rep.deviation = std::abs(m.total - err.total_sq);
    const double scale = std::max(1.0, err.total_sq);
    if (rep.deviation > tol * scale) {
      rep.passed = false;
      msg << "error equality violated: M=" << m.total << " e^2=" << err.total_sq;
    }
    if (f_norm_sq > 0.0) {
      rep.normalized_deviation =
          std::abs(m.total / f_norm_sq - err.total_sq / sol_norm_sq);
      if (rep.normalized_deviation > tol) {
        rep.passed = false;
        msg << " normalized identity violated (dev " << rep.normalized_deviation << ")";
      }
    }
  } else {
    const double scale = std::max(1.0, err.total_sq);
    rep.slack_lower = err.total_sq - m.lower_bound;
    rep.slack_upper = m.upper_bound - err.total_sq;
    if (rep.slack_lower < -tol * scale || rep.slack_upper < -tol * scale) {
      rep.passed = false;
      msg << "two-sided bound violated: [" << m.lower_bound << ", " << m.upper_bound
          << "] vs e^2=" << err.total_sq;
    }
    if (f_norm_sq > 0.0 && sol_norm_sq > 0.0) {
      // Normalized counterpart; the lower constant carries an extra 1/2.
      const double nerr = err.total_sq / sol_norm_sq;
      const double nmaj = m.total / f_norm_sq;
      const double lo = 0.5 * kCase2Lower * nmaj;
      const double hi = kCase2Upper * nmaj;
      const double nscale = std::max(1.0, nerr);
      rep.normalized_deviation = std::max(lo - nerr, nerr - hi);
      if (rep.normalized_deviation > tol * nscale) {
        rep.passed = false;
        msg << " normalized bound violated";
      }
    }
  }
  rep.message = msg.str();
  return rep;
}

enum class FixedSide { Primal, Dual };

/// Case I majorant minimization over the free component (the classical
/// primal/dual a posteriori estimates). Fixing xt minimizes over the dual
/// variable and recovers the exact y; fixing yt recovers the exact x.
inline std::pair<Vector, double> minimize_majorant(const AbstractProblem& p,
                                                   FixedSide fixed,
                                                   const Vector& fixed_value) {
  if (p.mode != CaseMode::I)
    throw LinalgError("minimize_majorant: only Case I carries an exact minimization");
  const Matrix& a = p.a.matrix();
  const WeightedSpace a1_inv = p.alpha1.inverse();
  const WeightedSpace a2_inv = p.alpha2.inverse();
  LeastSquares ls;
  Vector minimizer;
  if (fixed == FixedSide::Primal) {
    const Vector r = p.f - p.alpha1.apply(fixed_value);
    ls.add_term(a.adjoint(), r, a1_inv);
    ls.add_term(Matrix::Identity(p.dual_dim(), p.dual_dim()), lift_dual(p, fixed_value),
                a2_inv);
    minimizer = ls.solve();
    MajorantBreakdown m = majorant(p, {fixed_value, minimizer});
    return {std::move(minimizer), m.total};
  }
  const Vector s = p.f - p.a.apply_adjoint(fixed_value);
  ls.add_term(p.alpha1.weight(), s, a1_inv);
  ls.add_term(Matrix(p.alpha2.weight() * a), fixed_value, a2_inv);
  minimizer = ls.solve();
  MajorantBreakdown m = majorant(p, {minimizer, fixed_value});
  return {std::move(minimizer), m.total};
}

/// Case II: primal and dual errors are separately bounded by 2 M_i.
inline SeparateBoundsReport separate_bounds_case2(const AbstractProblem& p,
                                                  const MixedPair& approx,
                                                  double tol = 1e-10) {
  detail::require(p.mode == CaseMode::II, "separate_bounds_case2: Case II only");
  const MixedPair exact = solve_mixed(p);
  const CombinedNorms err = combined_error(p, exact, approx);
  const MajorantBreakdown m = majorant(p, approx);
  SeparateBoundsReport rep;
  rep.primal_sq = err.primal_sq;
  rep.dual_sq = err.dual_sq;
  rep.majorant = m.total;
  const double scale = std::max(1.0, m.total);
  if (err.primal_sq > 2.0 * m.total + tol * scale ||
      err.dual_sq > 2.0 * m.total + tol * scale) {
    rep.passed = false;
    std::ostringstream msg;
    msg << "separate bound violated: prim=" << err.primal_sq << " dual=" << err.dual_sq
        << " 2M=" << 2.0 * m.total;
    rep.message = msg.str();
  }
  return rep;
}

/// The delta-parameterized inequalities behind the Case II theorem:
///   (1 - r/(2d)) prim + (1 - r d/2) dual <= M_i <= (1 + r/(2d)) prim + (1 + r d/2) dual
/// with r = sqrt(2), for every d > 0.
inline DeltaBoundsReport delta_bounds_case2(const AbstractProblem& p,
                                            const MixedPair& approx, double delta,
                                            double tol = 1e-10) {
  detail::require(p.mode == CaseMode::II, "delta_bounds_case2: Case II only");
  detail::require(delta > 0.0, "delta_bounds_case2: delta must be positive");
  const MixedPair exact = solve_mixed(p);
  const CombinedNorms err = combined_error(p, exact, approx);
  const MajorantBreakdown m = majorant(p, approx);
  DeltaBoundsReport rep;
  rep.delta = delta;
  rep.majorant = m.total;
  rep.lower_lhs = (1.0 - M_SQRT2 / (2.0 * delta)) * err.primal_sq +
                  (1.0 - M_SQRT2 * delta / 2.0) * err.dual_sq;
  rep.upper_lhs = (1.0 + M_SQRT2 / (2.0 * delta)) * err.primal_sq +
                  (1.0 + M_SQRT2 * delta / 2.0) * err.dual_sq;
  const double scale = std::max(1.0, m.total);
  if (rep.lower_lhs > m.total + tol * scale || rep.upper_lhs < m.total - tol * scale) {
    rep.passed = false;
    std::ostringstream msg;
    msg << "delta inequalities violated at delta=" << delta << ": " << rep.lower_lhs
        << " <= " << m.total << " <= " << rep.upper_lhs;
    rep.message = msg.str();
  }
  return rep;
}

/// Case I: the solution operator is an isometry, |(x,y)|^2 = |f|^2_{a1^-1}.
/// Case II: |f| <= |(x,y)|_i <= sqrt(2)|f| in the (|w| a1)^-1 weight, plus
/// the splitting |f|^2 = |A* y|^2 + |x|^2 in the proper weights.
inline IsometryReport isometry_check(const AbstractProblem& p, double tol = 1e-10) {
  const MixedPair sol = solve_mixed(p);
  const WeightedSpace w1 = p.primal_weight();
  IsometryReport rep;
  rep.pair_norm_sq = combined_norms(p, sol).total_sq;
  rep.f_norm_sq = w1.norm_inv_sq(p.f);
  rep.ratio = rep.f_norm_sq > 0.0 ? std::sqrt(rep.pair_norm_sq / rep.f_norm_sq) : 0.0;
  std::ostringstream msg;
  if (p.mode == CaseMode::I) {
    const double dev = std::abs(rep.pair_norm_sq - rep.f_norm_sq);
    if (dev > tol * std::max(1.0, rep.f_norm_sq)) {
      rep.passed = false;
      msg << "isometry violated: |(x,y)|^2=" << rep.pair_norm_sq
          << " |f|^2=" << rep.f_norm_sq;
    }
  } else {
    const double scale = std::max(1.0, rep.f_norm_sq);
    if (rep.pair_norm_sq < rep.f_norm_sq - tol * scale ||
        rep.pair_norm_sq > 2.0 * rep.f_norm_sq + tol * scale) {
      rep.passed = false;
      msg << "almost-isometry bound violated: ratio^2="
          << rep.pair_norm_sq / rep.f_norm_sq;
    }
    const double split =
        w1.norm_inv_sq(p.a.apply_adjoint(sol.y)) + w1.norm_sq(sol.x);
    rep.splitting_defect = std::abs(rep.f_norm_sq - split) / scale;
    if (rep.splitting_defect > tol) {
      rep.passed = false;
      msg << " splitting identity violated (defect " << rep.splitting_defect << ")";
    }
  }
  rep.message = msg.str();
  return rep;
}

/// The exact dual solution is a2^-1-orthogonal to N(A*).
inline OrthogonalityReport helmholtz_orthogonality(const AbstractProblem& p,
                                                   double tol = 1e-9) {
  const Vector y = solve_dual(p);
  const auto kernel = null_space_basis(p.a.adjoint(), 1e-10);
  OrthogonalityReport rep;
  rep.kernel_dim = static_cast<int>(kernel.size());
  const double ynorm = y.norm();
  for (const auto& k : kernel) {
    const double denom = ynorm * k.norm();
    if (denom == 0.0) continue;
    const double val = std::abs(p.alpha2.inner_inv(y, k)) / denom;
    rep.worst = std::max(rep.worst, val);
  }
  if (rep.worst > tol) {
    rep.passed = false;
    rep.message = "Helmholtz orthogonality violated, worst " + std::to_string(rep.worst);
  }
  return rep;
}

/// Strong form of the dual problem:
///   Case I:  A a1^-1       (A* y - f) = -  a2^-1 y
///   Case II: A (omega a1)^-1 (A* y - f) = -i a2^-1 y
inline StrongIdentityReport dual_strong_identity(const AbstractProblem& p,
                                                 double tol = 1e-9) {
  const Vector y = solve_dual(p);
  Vector z = p.alpha1.apply_inverse(p.a.apply_adjoint(y) - p.f);
  Complex factor(-1.0, 0.0);
  if (p.mode == CaseMode::II) {
    z /= p.omega;
    factor = Complex(0.0, -1.0);
  }
  const Vector lhs = p.a.apply(z);
  const Vector rhs = factor * p.alpha2.apply_inverse(y);
  StrongIdentityReport rep;
  const double scale = std::max(1.0, rhs.norm());
  rep.rel_residual = (lhs - rhs).norm() / scale;
  if (rep.rel_residual > tol) {
    rep.passed = false;
    rep.message =
        "dual strong identity violated, residual " + std::to_string(rep.rel_residual);
  }
  return rep;
}

/// Deterministic random instance: dense complex A with entries in the unit
/// disk, real SPD weights B^T B + I, random complex f. In Case II omega is
/// drawn from +-[0.25, 2.5] (both signs occur).
inline AbstractProblem generate_random_problem(std::uint64_t seed, int n, int m,
                                               CaseMode mode) {
  detail::require(n >= 1 && m >= 1, "generate_random_problem: dims must be >= 1");
  std::mt19937_64 rng(seed);
  Operator a(random_complex_matrix(rng, m, n));
  WeightedSpace alpha1{random_spd_weight(rng, n)};
  WeightedSpace alpha2{random_spd_weight(rng, m)};
  Vector f = random_complex_vector(rng, n);
  double omega = 0.0;
  if (mode == CaseMode::II) {
    std::uniform_real_distribution<double> mag(0.25, 2.5);
    omega = mag(rng) * (rng() % 2 == 0 ? 1.0 : -1.0);
  }
  return AbstractProblem(std::move(a), std::move(alpha1), std::move(alpha2), mode, omega,
                         std::move(f));
}

/// Deterministic random conforming pair for sweep tests.
inline MixedPair random_pair(std::uint64_t seed, const AbstractProblem& p,
                             double scale = 1.0) {
  std::mt19937_64 rng(seed);
  MixedPair pair;
  pair.x = scale * random_complex_vector(rng, p.primal_dim());
  pair.y = scale * random_complex_vector(rng, p.dual_dim());
  return pair;
}

}  // namespace errest
