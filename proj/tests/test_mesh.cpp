#include "errest/mesh.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

using namespace errest;

TEST_CASE("unit square construction counts") {
  Mesh2D m1 = build_rectangle(1, 1, all_dirichlet());
  m1.validate();
  CHECK(m1.n_vertices() == 4);
  CHECK(m1.n_triangles() == 2);
  CHECK(m1.boundary.size() == 4);

  Mesh2D m2 = build_rectangle(2, 2, all_dirichlet());
  m2.validate();
  CHECK(m2.n_vertices() == 9);
  CHECK(m2.n_triangles() == 8);
}

TEST_CASE("mesh area sums to one") {
  for (auto [nx, ny] : {std::pair{1, 1}, {3, 2}, {7, 5}, {16, 16}}) {
    Mesh2D m = build_rectangle(nx, ny, all_neumann());
    CHECK(std::abs(m.total_area() - 1.0) <= 1e-14);
  }
}

TEST_CASE("boundary tags follow the predicate") {
  auto tag = [](double x, double) {
    return x > 0.999 ? BoundaryTag::Robin
                     : (x < 0.001 ? BoundaryTag::Dirichlet : BoundaryTag::Neumann);
  };
  Mesh2D m = build_rectangle(4, 4, tag);
  m.validate();
  int robin = 0, dirichlet = 0;
  for (const auto& be : m.boundary) {
    if (be.tag == BoundaryTag::Robin) ++robin;
    if (be.tag == BoundaryTag::Dirichlet) ++dirichlet;
  }
  CHECK(robin == 4);
  CHECK(dirichlet == 4);
}

TEST_CASE("bisect with empty marking returns an identical mesh") {
  Mesh2D m = build_rectangle(2, 3, all_dirichlet());
  Mesh2D r = bisect(m, {});
  CHECK(r.n_vertices() == m.n_vertices());
  CHECK(r.n_triangles() == m.n_triangles());
  CHECK(r.boundary.size() == m.boundary.size());
  for (int t = 0; t < m.n_triangles(); ++t) CHECK(r.triangles[t].v == m.triangles[t].v);
}

TEST_CASE("single marked triangle refines conformally and preserves area") {
  Mesh2D m = build_rectangle(1, 1, all_dirichlet());
  Mesh2D r = bisect(m, {0});
  r.validate();
  CHECK(std::abs(r.total_area() - 1.0) <= 1e-14);
  CHECK(r.n_triangles() > m.n_triangles());
  // The marked triangle must be strictly subdivided: no triangle of r has
  // the same vertex set as triangle 0 of m.
  std::set<int> orig(m.triangles[0].v.begin(), m.triangles[0].v.end());
  for (const auto& t : r.triangles) {
    std::set<int> cur(t.v.begin(), t.v.end());
    CHECK(cur != orig);
  }
}

TEST_CASE("repeated uniform bisection keeps shape regularity") {
  Mesh2D m = build_rectangle(2, 2, all_dirichlet());
  const double initial_angle = m.min_angle();
  int prev = m.n_triangles();
  for (int k = 0; k < 5; ++k) {
    m = uniform_refine(m);
    m.validate();
    CHECK(std::abs(m.total_area() - 1.0) <= 1e-13);
    // Newest-vertex bisection: bounded growth, angles bounded below.
    CHECK(m.n_triangles() <= 4 * prev);
    CHECK(m.n_triangles() >= 2 * prev);
    prev = m.n_triangles();
    CHECK(m.min_angle() >= 0.5 * initial_angle - 1e-12);
  }
}

TEST_CASE("random adaptive refinements keep all invariants") {
  std::mt19937 rng(2024);
  Mesh2D m = build_rectangle(2, 2, [](double x, double) {
    return x < 0.5 ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
  });
  for (int k = 0; k < 8; ++k) {
    std::vector<int> marked;
    for (int t = 0; t < m.n_triangles(); ++t)
      if (rng() % 4 == 0) marked.push_back(t);
    Mesh2D r = bisect(m, marked);
    r.validate();
    CHECK(std::abs(r.total_area() - 1.0) <= 1e-13);
    // Tag preservation: the set of tags present on each side is unchanged.
    for (const auto& be : r.boundary) {
      const bool left = r.vertices[be.a].x() < 0.5 && r.vertices[be.b].x() < 0.5;
      const Eigen::Vector2d mid = 0.5 * (r.vertices[be.a] + r.vertices[be.b]);
      if (mid.x() < 0.5 - 1e-12 && left) CHECK(be.tag == BoundaryTag::Dirichlet);
      if (mid.x() > 0.5 + 1e-12) CHECK(be.tag == BoundaryTag::Neumann);
    }
    m = r;
  }
}

TEST_CASE("mesh save/load round trip is exact") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "errest_mesh_test";
  fs::create_directories(dir);
  std::mt19937 rng(7);
  Mesh2D meshes[3] = {build_rectangle(1, 1, all_dirichlet()),
                      build_rectangle(3, 2, all_neumann()),
                      uniform_refine(build_rectangle(2, 2, all_dirichlet()))};
  // Perturb interior coordinates to exercise full-precision round trips.
  for (auto& v : meshes[2].vertices)
    if (v.x() > 0.01 && v.x() < 0.99 && v.y() > 0.01 && v.y() < 0.99)
      v += Eigen::Vector2d(1e-7 * (rng() % 97), 1e-7 * (rng() % 89));
  int idx = 0;
  for (const auto& m : meshes) {
    const std::string path = (dir / ("mesh" + std::to_string(idx++) + ".txt")).string();
    save_mesh(m, path);
    Mesh2D loaded = load_mesh(path);
    REQUIRE(loaded.n_vertices() == m.n_vertices());
    REQUIRE(loaded.n_triangles() == m.n_triangles());
    REQUIRE(loaded.boundary.size() == m.boundary.size());
    for (int i = 0; i < m.n_vertices(); ++i) {
      CHECK(loaded.vertices[i].x() == m.vertices[i].x());
      CHECK(loaded.vertices[i].y() == m.vertices[i].y());
    }
    for (int t = 0; t < m.n_triangles(); ++t)
      CHECK(loaded.triangles[t].v == m.triangles[t].v);
    for (std::size_t b = 0; b < m.boundary.size(); ++b) {
      CHECK(loaded.boundary[b].a == m.boundary[b].a);
      CHECK(loaded.boundary[b].b == m.boundary[b].b);
      CHECK(loaded.boundary[b].tag == m.boundary[b].tag);
    }
  }
}

TEST_CASE("malformed mesh files are rejected with a line number") {
  {
    std::istringstream empty("");
    CHECK_THROWS_AS(load_mesh(empty), MeshError);
  }
  {
    std::istringstream bad_header("NOTAMESH 1\n");
    CHECK_THROWS_WITH(load_mesh(bad_header),
                      Catch::Matchers::ContainsSubstring("line 1"));
  }
  {
    std::istringstream bad_vertex("ERRESTMESH 1\nVERTICES 1\nfoo bar\n");
    CHECK_THROWS_WITH(load_mesh(bad_vertex),
                      Catch::Matchers::ContainsSubstring("line 3"));
  }
  {
    std::istringstream bad_count("ERRESTMESH 1\nVERTICES -3\n");
    CHECK_THROWS_AS(load_mesh(bad_count), MeshError);
  }
}

TEST_CASE("fuzzed headers never crash") {
  std::mt19937 rng(99);
  const std::string alphabet = "ERSTMVH 0123456789\nABCX-";
  for (int trial = 0; trial < 300; ++trial) {
    std::string data;
    const int len = 1 + rng() % 60;
    for (int i = 0; i < len; ++i) data += alphabet[rng() % alphabet.size()];
    std::istringstream in(data);
    try {
      (void)load_mesh(in);
    } catch (const MeshError&) {
      // rejected is fine; crashing is not
    }
  }
  SUCCEED();
}
