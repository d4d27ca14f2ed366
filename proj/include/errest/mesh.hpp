#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace errest {

enum class BoundaryTag { Dirichlet, Neumann, Robin };

inline char boundary_tag_letter(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::Dirichlet: return 'D';
    case BoundaryTag::Neumann: return 'N';
    case BoundaryTag::Robin: return 'R';
  }
  return '?';
}

class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::Dirichlet;
};

/// Triangle with positively oriented vertices; the refinement edge for
/// newest-vertex bisection is (v[0], v[1]), the peak vertex is v[2].
struct Triangle {
  std::array<int, 3> v{0, 0, 0};
};

using TagPredicate = std::function<BoundaryTag(double x, double y)>;

/// Conforming triangulation of a polygon with tagged boundary edges.
/// Meshes are immutable after construction; refinement returns a new mesh.
class Mesh2D {
public:
  std::vector<Eigen::Vector2d> vertices;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d& p0 = vertices[tri.v[0]];
    const Eigen::Vector2d& p1 = vertices[tri.v[1]];
    const Eigen::Vector2d& p2 = vertices[tri.v[2]];
    return 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                  (p2.x() - p0.x()) * (p1.y() - p0.y()));
  }

  double total_area() const {
    double sum = 0.0, comp = 0.0;
    for (int t = 0; t < n_triangles(); ++t) {
      const double y = signed_area(t) - comp;
      const double s = sum + y;
      comp = (s - sum) - y;
      sum = s;
    }
    return sum;
  }

  double min_angle() const {
    double worst = M_PI;
    for (const auto& tri : triangles)
      for (int i = 0; i < 3; ++i) {
        const Eigen::Vector2d a = vertices[tri.v[(i + 1) % 3]] - vertices[tri.v[i]];
        const Eigen::Vector2d b = vertices[tri.v[(i + 2) % 3]] - vertices[tri.v[i]];
        worst = std::min(worst, std::acos(a.dot(b) / (a.norm() * b.norm())));
      }
    return worst;
  }

  /// Checks orientation, conformity, and that the tagged boundary edges are
  /// exactly the topological boundary. Throws MeshError on violation.
  void validate() const {
    for (int t = 0; t < n_triangles(); ++t)
      if (!(signed_area(t) > 0.0))
        throw MeshError("triangle " + std::to_string(t) + " is not positively oriented");

    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : triangles)
      for (int i = 0; i < 3; ++i) {
        const int a = tri.v[i], b = tri.v[(i + 1) % 3];
        ++edge_count[{std::min(a, b), std::max(a, b)}];
      }
    std::set<std::pair<int, int>> topological;
    for (const auto& [edge, count] : edge_count) {
      if (count > 2)
        throw MeshError("edge shared by more than two triangles");
      if (count == 1) topological.insert(edge);
    }
    std::set<std::pair<int, int>> tagged;
    for (const auto& be : boundary) {
      const auto key = std::make_pair(std::min(be.a, be.b), std::max(be.a, be.b));
      if (!tagged.insert(key).second)
        throw MeshError("duplicate boundary edge (tags must partition the boundary)");
      if (!topological.count(key))
        throw MeshError("tagged edge is not on the topological boundary");
    }
    if (tagged.size() != topological.size())
      throw MeshError("boundary edges do not cover the topological boundary");
  }
};

/// Structured triangulation of the unit square; each of the nx*ny cells is
/// split along its diagonal, which becomes the refinement edge. Boundary tags
/// are assigned by the predicate evaluated at edge midpoints.
inline Mesh2D build_rectangle(int nx, int ny, const TagPredicate& tag) {
  if (nx < 1 || ny < 1) throw MeshError("build_rectangle: nx, ny must be >= 1");
  Mesh2D mesh;
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.emplace_back(double(i) / nx, double(j) / ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1),
                d = vid(i, j + 1);
      mesh.triangles.push_back({{a, c, d}});
      mesh.triangles.push_back({{c, a, b}});
    }
  auto add_edge = [&](int a, int b) {
    const Eigen::Vector2d mid = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    mesh.boundary.push_back({a, b, tag(mid.x(), mid.y())});
  };
  for (int i = 0; i < nx; ++i) {
    add_edge(vid(i, 0), vid(i + 1, 0));
    add_edge(vid(i + 1, ny), vid(i, ny));
  }
  for (int j = 0; j < ny; ++j) {
    add_edge(vid(nx, j), vid(nx, j + 1));
    add_edge(vid(0, j + 1), vid(0, j));
  }
  return mesh;
}

inline TagPredicate all_dirichlet() {
  return [](double, double) { return BoundaryTag::Dirichlet; };
}
inline TagPredicate all_neumann() {
  return [](double, double) { return BoundaryTag::Neumann; };
}

/// Newest-vertex bisection of the marked triangles with conformity closure.
/// Every marked triangle is strictly subdivided; child boundary edges inherit
/// the parent tag.
inline Mesh2D bisect(const Mesh2D& mesh, const std::vector<int>& marked) {
  for (int id : marked)
    if (id < 0 || id >= mesh.n_triangles())
      throw MeshError("bisect: invalid triangle id " + std::to_string(id));

  std::map<std::pair<int, int>, int> edge_id;
  auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  auto edge_of = [&](const Triangle& t, int i) {
    return key(t.v[i], t.v[(i + 1) % 3]);
  };
  for (const auto& t : mesh.triangles)
    for (int i = 0; i < 3; ++i)
      edge_id.try_emplace(edge_of(t, i), static_cast<int>(edge_id.size()));

  std::vector<bool> edge_marked(edge_id.size(), false);
  for (int id : marked) edge_marked[edge_id[edge_of(mesh.triangles[id], 0)]] = true;

  // Closure: an element with any marked edge must have its refinement edge
  // marked as well; iterate to the fixed point.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& t : mesh.triangles) {
      const int e0 = edge_id[edge_of(t, 0)];
      if (edge_marked[e0]) continue;
      if (edge_marked[edge_id[edge_of(t, 1)]] || edge_marked[edge_id[edge_of(t, 2)]]) {
        edge_marked[e0] = true;
        changed = true;
      }
    }
  }

  Mesh2D out;
  out.vertices = mesh.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid_of = [&](int a, int b) -> int {
    const auto k = key(a, b);
    auto it = midpoint.find(k);
    if (it != midpoint.end()) return it->second;
    out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    const int id = static_cast<int>(out.vertices.size()) - 1;
    midpoint.emplace(k, id);
    return id;
  };

  // Edges created by bisection (those touching a midpoint) are never marked.
  auto is_marked = [&](int a, int b) {
    const auto it = edge_id.find(key(a, b));
    return it != edge_id.end() && edge_marked[it->second];
  };

  // Bisection through the refinement edge (t0,t1) with midpoint m produces
  // children (t2,t0,m) and (t1,t2,m); the new vertex is the peak of both.
  std::function<void(const Triangle&)> subdivide = [&](const Triangle& t) {
    if (!is_marked(t.v[0], t.v[1])) {
      out.triangles.push_back(t);
      return;
    }
    const int m = mid_of(t.v[0], t.v[1]);
    subdivide({{t.v[2], t.v[0], m}});
    subdivide({{t.v[1], t.v[2], m}});
  };
  for (const auto& t : mesh.triangles) subdivide(t);

  for (const auto& be : mesh.boundary) {
    const auto it = midpoint.find(key(be.a, be.b));
    if (it == midpoint.end()) {
      out.boundary.push_back(be);
    } else {
      out.boundary.push_back({be.a, it->second, be.tag});
      out.boundary.push_back({it->second, be.b, be.tag});
    }
  }
  return out;
}

inline Mesh2D uniform_refine(const Mesh2D& mesh) {
  std::vector<int> all(mesh.n_triangles());
  for (int i = 0; i < mesh.n_triangles(); ++i) all[i] = i;
  return bisect(mesh, all);
}

// --- plain-text mesh format ------------------------------------------------
//
//   ERRESTMESH 1
//   VERTICES <n>
//   <x> <y>                 (n lines, ASCII decimal, %.17g round-trips)
//   TRIANGLES <m>
//   <v0> <v1> <v2>          (m lines; refinement edge is (v0, v1))
//   BOUNDARY <k>
//   <a> <b> <D|N|R>         (k lines)
//
// The exact grammar is documented in docs/mesh_format.md.

inline void save_mesh(const Mesh2D& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("save_mesh: cannot open " + path);
  out << "ERRESTMESH 1\n";
  out << "VERTICES " << mesh.n_vertices() << "\n";
  char buf[64];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x(), v.y());
    out << buf;
  }
  out << "TRIANGLES " << mesh.n_triangles() << "\n";
  for (const auto& t : mesh.triangles)
    out << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
  out << "BOUNDARY " << mesh.boundary.size() << "\n";
  for (const auto& be : mesh.boundary)
    out << be.a << " " << be.b << " " << boundary_tag_letter(be.tag) << "\n";
  if (!out) throw MeshError("save_mesh: write failed for " + path);
}

namespace detail {

class LineReader {
public:
  explicit LineReader(std::istream& in) : in_(in) {}
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++lineno_;
    return true;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw MeshError("mesh parse error at line " + std::to_string(lineno_) + ": " + what);
  }
  std::string expect() {
    std::string line;
    if (!next(line)) fail("unexpected end of file");
    return line;
  }

private:
  std::istream& in_;
  int lineno_ = 0;
};

}  // namespace detail

inline Mesh2D load_mesh(std::istream& in) {
  detail::LineReader reader(in);
  {
    std::istringstream hdr(reader.expect());
    std::string magic;
    int version = 0;
    if (!(hdr >> magic >> version) || magic != "ERRESTMESH")
      reader.fail("expected 'ERRESTMESH <version>' header");
    if (version != 1) reader.fail("unsupported format version");
  }
  Mesh2D mesh;
  auto read_count = [&](const char* section) {
    std::istringstream ss(reader.expect());
    std::string word;
    long count = -1;
    if (!(ss >> word >> count) || word != section || count < 0)
      reader.fail(std::string("expected '") + section + " <count>'");
    return count;
  };
  const long nv = read_count("VERTICES");
  for (long i = 0; i < nv; ++i) {
    std::istringstream ss(reader.expect());
    double x, y;
    if (!(ss >> x >> y)) reader.fail("expected vertex coordinates");
    mesh.vertices.emplace_back(x, y);
  }
  const long nt = read_count("TRIANGLES");
  for (long i = 0; i < nt; ++i) {
    std::istringstream ss(reader.expect());
    Triangle t;
    if (!(ss >> t.v[0] >> t.v[1] >> t.v[2])) reader.fail("expected three vertex ids");
    for (int k = 0; k < 3; ++k)
      if (t.v[k] < 0 || t.v[k] >= mesh.n_vertices()) reader.fail("vertex id out of range");
    mesh.triangles.push_back(t);
  }
  const long nb = read_count("BOUNDARY");
  for (long i = 0; i < nb; ++i) {
    std::istringstream ss(reader.expect());
    BoundaryEdge be;
    std::string tag;
    if (!(ss >> be.a >> be.b >> tag)) reader.fail("expected boundary edge record");
    if (be.a < 0 || be.a >= mesh.n_vertices() || be.b < 0 || be.b >= mesh.n_vertices())
      reader.fail("vertex id out of range");
    if (tag == "D") be.tag = BoundaryTag::Dirichlet;
    else if (tag == "N") be.tag = BoundaryTag::Neumann;
    else if (tag == "R") be.tag = BoundaryTag::Robin;
    else reader.fail("unknown boundary tag '" + tag + "'");
    mesh.boundary.push_back(be);
  }
  mesh.validate();
  return mesh;
}

inline Mesh2D load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("load_mesh: cannot open " + path);
  return load_mesh(in);
}

}  // namespace errest
