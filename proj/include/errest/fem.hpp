#pragma once

#include "errest/linalg.hpp"
#include "errest/mesh.hpp"
#include "errest/quadrature.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <functional>
#include <set>

namespace errest {

using Vector2c = Eigen::Vector2cd;
using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// Bilinear (non-conjugating) dot product; the test functions are real.
inline Complex cdot(const Vector2c& a, const Eigen::Vector2d& b) {
  return a.x() * b.x() + a.y() * b.y();
}

struct ElementGeometry {
  std::array<Eigen::Vector2d, 3> p;
  std::array<Eigen::Vector2d, 3> grad;  // gradients of the barycentric coordinates
  double area = 0.0;

  Eigen::Vector2d point(double xi, double eta) const {
    return p[0] + xi * (p[1] - p[0]) + eta * (p[2] - p[0]);
  }
};

inline ElementGeometry element_geometry(const Mesh2D& mesh, int t) {
  ElementGeometry g;
  for (int i = 0; i < 3; ++i) g.p[i] = mesh.vertices[mesh.triangles[t].v[i]];
  const double twice_area = (g.p[1].x() - g.p[0].x()) * (g.p[2].y() - g.p[0].y()) -
                            (g.p[2].x() - g.p[0].x()) * (g.p[1].y() - g.p[0].y());
  g.area = 0.5 * twice_area;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d e = g.p[(i + 2) % 3] - g.p[(i + 1) % 3];
    g.grad[i] = Eigen::Vector2d(-e.y(), e.x()) / twice_area;
  }
  return g;
}

/// Global edge enumeration. Edges are oriented from the lower to the higher
/// vertex id; the global unit normal is the right-hand normal of that
/// direction. tri_sign is +1 where the global normal points out of the
/// triangle.
class EdgeTable {
public:
  explicit EdgeTable(const Mesh2D& mesh) : mesh_(&mesh) {
    std::map<std::pair<int, int>, int> ids;
    tri_edge_.resize(mesh.n_triangles());
    tri_sign_.resize(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
      const auto& tri = mesh.triangles[t];
      for (int i = 0; i < 3; ++i) {
        const int a = tri.v[(i + 1) % 3], b = tri.v[(i + 2) % 3];
        const auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = ids.find(key);
        if (it == ids.end()) {
          it = ids.emplace(key, static_cast<int>(edges_.size())).first;
          edges_.push_back({key.first, key.second});
        }
        tri_edge_[t][i] = it->second;
        tri_sign_[t][i] = (a == key.first) ? 1.0 : -1.0;
      }
    }
    boundary_edge_.resize(mesh.boundary.size());
    for (std::size_t b = 0; b < mesh.boundary.size(); ++b) {
      const auto& be = mesh.boundary[b];
      const auto key = std::make_pair(std::min(be.a, be.b), std::max(be.a, be.b));
      const auto it = ids.find(key);
      if (it == ids.end()) throw MeshError("EdgeTable: boundary edge not in mesh");
      boundary_edge_[b] = it->second;
    }
  }

  int n_edges() const { return static_cast<int>(edges_.size()); }
  const std::array<int, 2>& edge(int e) const { return edges_[e]; }
  int tri_edge(int t, int i) const { return tri_edge_[t][i]; }
  double tri_sign(int t, int i) const { return tri_sign_[t][i]; }
  int boundary_edge(int b) const { return boundary_edge_[b]; }

  double length(int e) const {
    return (mesh_->vertices[edges_[e][1]] - mesh_->vertices[edges_[e][0]]).norm();
  }
  Eigen::Vector2d normal(int e) const {
    const Eigen::Vector2d t =
        (mesh_->vertices[edges_[e][1]] - mesh_->vertices[edges_[e][0]]).normalized();
    return {t.y(), -t.x()};
  }

private:
  const Mesh2D* mesh_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> tri_edge_;
  std::vector<std::array<double, 3>> tri_sign_;
  std::vector<int> boundary_edge_;
};

/// Continuous piecewise-linear scalars; vertices on essential-tagged boundary
/// edges are constrained.
class P1Space {
public:
  P1Space(const Mesh2D& mesh, const std::set<BoundaryTag>& essential) {
    std::vector<bool> fixed(mesh.n_vertices(), false);
    for (const auto& be : mesh.boundary)
      if (essential.count(be.tag)) fixed[be.a] = fixed[be.b] = true;
    dof_.assign(mesh.n_vertices(), -1);
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      if (fixed[v]) constrained_.push_back(v);
      else dof_[v] = n_dofs_++;
    }
  }

  int n_dofs() const { return n_dofs_; }
  int dof(int vertex) const { return dof_[vertex]; }
  bool constrained(int vertex) const { return dof_[vertex] < 0; }
  const std::vector<int>& constrained_vertices() const { return constrained_; }

private:
  std::vector<int> dof_;
  std::vector<int> constrained_;
  int n_dofs_ = 0;
};

/// Lowest-order Raviart-Thomas fields; one dof per edge (total normal flux in
/// the direction of the global edge normal). Edges on essential-tagged
/// boundary parts are constrained to zero flux.
class RT0Space {
public:
  RT0Space(const Mesh2D& mesh, const EdgeTable& edges,
           const std::set<BoundaryTag>& essential) {
    std::vector<bool> fixed(edges.n_edges(), false);
    for (std::size_t b = 0; b < mesh.boundary.size(); ++b)
      if (essential.count(mesh.boundary[b].tag)) fixed[edges.boundary_edge(b)] = true;
    dof_.assign(edges.n_edges(), -1);
    for (int e = 0; e < edges.n_edges(); ++e) {
      if (fixed[e]) constrained_.push_back(e);
      else dof_[e] = n_dofs_++;
    }
  }

  int n_dofs() const { return n_dofs_; }
  int dof(int edge) const { return dof_[edge]; }
  bool constrained(int edge) const { return dof_[edge] < 0; }
  const std::vector<int>& constrained_edges() const { return constrained_; }

private:
  std::vector<int> dof_;
  std::vector<int> constrained_;
  int n_dofs_ = 0;
};

// --- field evaluation (coefficient vectors are full length: one entry per
// vertex resp. edge, constrained entries included) ---------------------------

inline Complex p1_value(const Mesh2D& mesh, int t, const Vector& coeffs, double xi,
                        double eta) {
  const auto& tri = mesh.triangles[t];
  return coeffs[tri.v[0]] * (1.0 - xi - eta) + coeffs[tri.v[1]] * xi +
         coeffs[tri.v[2]] * eta;
}

inline Vector2c p1_gradient(const ElementGeometry& g, const Mesh2D& mesh, int t,
                            const Vector& coeffs) {
  const auto& tri = mesh.triangles[t];
  Vector2c grad = Vector2c::Zero();
  for (int i = 0; i < 3; ++i) grad += coeffs[tri.v[i]] * g.grad[i].cast<Complex>();
  return grad;
}

inline Vector2c rt0_value(const ElementGeometry& g, const Mesh2D& mesh,
                          const EdgeTable& edges, int t, const Vector& coeffs,
                          const Eigen::Vector2d& x) {
  Vector2c val = Vector2c::Zero();
  for (int i = 0; i < 3; ++i) {
    const Complex c = coeffs[edges.tri_edge(t, i)] * edges.tri_sign(t, i);
    val += c * ((x - g.p[i]) / (2.0 * g.area)).cast<Complex>();
  }
  return val;
}

inline Complex rt0_divergence(const ElementGeometry& g, const EdgeTable& edges, int t,
                              const Vector& coeffs) {
  Complex div(0.0, 0.0);
  for (int i = 0; i < 3; ++i)
    div += coeffs[edges.tri_edge(t, i)] * edges.tri_sign(t, i) / g.area;
  return div;
}

// --- interpolation -----------------------------------------------------------

inline Vector p1_interpolate(const Mesh2D& mesh,
                             const std::function<Complex(const Eigen::Vector2d&)>& u) {
  Vector coeffs(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) coeffs[v] = u(mesh.vertices[v]);
  return coeffs;
}

/// Canonical RT0 interpolant: per-edge integral of the normal component,
/// evaluated with Gauss quadrature (>= 4 points).
inline Vector rt0_interpolate(const Mesh2D& mesh, const EdgeTable& edges,
                              const std::function<Vector2c(const Eigen::Vector2d&)>& p,
                              int n_gauss = 4) {
  const GaussRule& rule = gauss_rule(std::max(n_gauss, 4));
  Vector coeffs(edges.n_edges());
  for (int e = 0; e < edges.n_edges(); ++e) {
    const Eigen::Vector2d a = mesh.vertices[edges.edge(e)[0]];
    const Eigen::Vector2d b = mesh.vertices[edges.edge(e)[1]];
    const Eigen::Vector2d nu = edges.normal(e);
    const double len = (b - a).norm();
    Complex flux(0.0, 0.0);
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const Eigen::Vector2d x = a + rule.x[q] * (b - a);
      flux += rule.w[q] * cdot(p(x), nu);
    }
    coeffs[e] = flux * len;
  }
  return coeffs;
}

// --- linear solves -----------------------------------------------------------

/// Sparse solve with the same residual contract as the dense path: relative
/// residual <= 1e-10, one refinement step, deterministic.
inline Vector solve_sparse(const SparseMatrix& m, const Vector& b, bool hermitian) {
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());
  Vector x;
  if (hermitian) {
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> solver;
    solver.compute(m);
    if (solver.info() != Eigen::Success)
      throw LinalgError("solve_sparse: Hermitian factorization failed");
    x = solver.solve(b);
    x += solver.solve(Vector(b - m * x));
  } else {
    Eigen::SparseLU<SparseMatrix> solver;
    solver.compute(m);
    if (solver.info() != Eigen::Success)
      throw LinalgError("solve_sparse: LU factorization failed");
    x = solver.solve(b);
    x += solver.solve(Vector(b - m * x));
  }
  const double rel = (m * x - b).norm() / bnorm;
  detail::require(rel <= 1e-10,
                  "solve_sparse: residual " + std::to_string(rel) + " exceeds contract");
  return x;
}

// --- generic scalar P1 problem ----------------------------------------------
//
//   find u:  sum_T  int_T grad(u)^T C_T grad(phi) + m_T u phi
//          = sum_T  int_T load phi + grad_load . grad(phi)
// with essential values from `dirichlet` (zero if absent).

struct P1Problem {
  std::function<Eigen::Matrix2d(int)> stiffness;
  std::function<Complex(int)> mass;
  std::function<Complex(int, const Eigen::Vector2d&)> load;
  std::function<Vector2c(int, const Eigen::Vector2d&)> grad_load;
  std::function<Complex(const Eigen::Vector2d&)> dirichlet;
  int quad_degree = 6;
  bool hermitian = true;
};

inline Vector p1_solve(const Mesh2D& mesh, const P1Space& space, const P1Problem& prob) {
  Vector full = Vector::Zero(mesh.n_vertices());
  if (prob.dirichlet)
    for (int v : space.constrained_vertices()) full[v] = prob.dirichlet(mesh.vertices[v]);

  const TriangleRule& rule = triangle_rule(prob.quad_degree);
  std::vector<Eigen::Triplet<Complex>> triplets;
  Vector rhs = Vector::Zero(space.n_dofs());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    const Eigen::Matrix2d c = prob.stiffness(t);
    const Complex m = prob.mass(t);

    Eigen::Matrix3cd local = Eigen::Matrix3cd::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        local(i, j) = g.area * (g.grad[j].dot(c * g.grad[i])) +
                      m * (g.area / 12.0) * (i == j ? 2.0 : 1.0);
      }

    Eigen::Vector3cd local_rhs = Eigen::Vector3cd::Zero();
    if (prob.load || prob.grad_load) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
        const double wq = rule.w[q] * 2.0 * g.area;
        const double lambda[3] = {1.0 - rule.xi[q] - rule.eta[q], rule.xi[q],
                                  rule.eta[q]};
        if (prob.load) {
          const Complex f = prob.load(t, x);
          for (int i = 0; i < 3; ++i) local_rhs[i] += wq * f * lambda[i];
        }
        if (prob.grad_load) {
          const Vector2c gl = prob.grad_load(t, x);
          for (int i = 0; i < 3; ++i)
            local_rhs[i] += wq * cdot(gl, g.grad[i]);
        }
      }
    }

    for (int i = 0; i < 3; ++i) {
      const int di = space.dof(tri.v[i]);
      if (di < 0) continue;
      rhs[di] += local_rhs[i];
      for (int j = 0; j < 3; ++j) {
        const int dj = space.dof(tri.v[j]);
        if (dj >= 0) triplets.emplace_back(di, dj, local(i, j));
        else rhs[di] -= local(i, j) * full[tri.v[j]];
      }
    }
  }

  if (space.n_dofs() > 0) {
    SparseMatrix sys(space.n_dofs(), space.n_dofs());
    sys.setFromTriplets(triplets.begin(), triplets.end());
    const Vector sol = solve_sparse(sys, rhs, prob.hermitian);
    for (int v = 0; v < mesh.n_vertices(); ++v)
      if (space.dof(v) >= 0) full[v] = sol[space.dof(v)];
  }
  return full;
}

// --- generic RT0 problem ------------------------------------------------------
//
//   find p:  sum_T  int_T psi^T C_T psi' + d_T div(p) div(psi)
//          = sum_T  int_T div_load div(psi) + vec_load . psi
// with zero flux on the constrained edges.

struct RT0Problem {
  std::function<Eigen::Matrix2d(int)> mass;
  std::function<Complex(int)> mass_factor;  // optional complex multiplier of mass
  std::function<Complex(int)> divdiv;
  std::function<Complex(int, const Eigen::Vector2d&)> div_load;
  std::function<Vector2c(int, const Eigen::Vector2d&)> vec_load;
  int quad_degree = 4;
  bool hermitian = true;
};

inline Vector rt0_solve(const Mesh2D& mesh, const EdgeTable& edges, const RT0Space& space,
                        const RT0Problem& prob) {
  const TriangleRule& rule = triangle_rule(std::max(prob.quad_degree, 2));
  std::vector<Eigen::Triplet<Complex>> triplets;
  Vector rhs = Vector::Zero(space.n_dofs());
  for (int t = 0; t < mesh.n_triangles(); ++t) {
    const ElementGeometry g = element_geometry(mesh, t);
    const Eigen::Matrix2d c = prob.mass(t);
    const Complex d = prob.divdiv(t);

    // Basis fields with global orientation: chi_i(x) = s_i (x - P_i)/(2|T|),
    // div chi_i = s_i / |T|.
    Eigen::Matrix3cd local = Eigen::Matrix3cd::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
      const double wq = rule.w[q] * 2.0 * g.area;
      Eigen::Vector2d chi[3];
      for (int i = 0; i < 3; ++i)
        chi[i] = edges.tri_sign(t, i) * (x - g.p[i]) / (2.0 * g.area);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) local(i, j) += wq * chi[j].dot(c * chi[i]);
    }
    if (prob.mass_factor) local *= prob.mass_factor(t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        local(i, j) += d * g.area * (edges.tri_sign(t, i) / g.area) *
                       (edges.tri_sign(t, j) / g.area);

    Eigen::Vector3cd local_rhs = Eigen::Vector3cd::Zero();
    if (prob.div_load || prob.vec_load) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const Eigen::Vector2d x = g.point(rule.xi[q], rule.eta[q]);
        const double wq = rule.w[q] * 2.0 * g.area;
        for (int i = 0; i < 3; ++i) {
          const double s = edges.tri_sign(t, i);
          if (prob.div_load) local_rhs[i] += wq * prob.div_load(t, x) * (s / g.area);
          if (prob.vec_load) {
            const Eigen::Vector2d chi = s * (x - g.p[i]) / (2.0 * g.area);
            local_rhs[i] += wq * cdot(prob.vec_load(t, x), chi);
          }
        }
      }
    }

    for (int i = 0; i < 3; ++i) {
      const int di = space.dof(edges.tri_edge(t, i));
      if (di < 0) continue;
      rhs[di] += local_rhs[i];
      for (int j = 0; j < 3; ++j) {
        const int dj = space.dof(edges.tri_edge(t, j));
        if (dj >= 0) triplets.emplace_back(di, dj, local(i, j));
      }
    }
  }

  Vector full = Vector::Zero(edges.n_edges());
  if (space.n_dofs() > 0) {
    SparseMatrix sys(space.n_dofs(), space.n_dofs());
    sys.setFromTriplets(triplets.begin(), triplets.end());
    const Vector sol = solve_sparse(sys, rhs, prob.hermitian);
    for (int e = 0; e < edges.n_edges(); ++e)
      if (space.dof(e) >= 0) full[e] = sol[space.dof(e)];
  }
  return full;
}

}  // namespace errest
