#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/space_form.hpp"

namespace mcflab {

using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
using FaceMatrix = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Closed oriented triangle mesh immersed in the ambient chart. Vertices are
// rows of V (4d chart coordinates, w = 0 in the flat chart); faces are
// counter-clockwise as seen from the outward side.
struct SurfaceMesh {
  VertexMatrix V;
  FaceMatrix F;

  int num_vertices() const { return static_cast<int>(V.rows()); }
  int num_faces() const { return static_cast<int>(F.rows()); }
  Vec4 vertex(int i) const { return V.row(i).transpose(); }
};

struct EdgeInfo {
  int v0 = -1, v1 = -1;  // v0 < v1
  int f0 = -1, f1 = -1;  // incident faces; f1 == -1 on a boundary edge
};

struct MeshTopology {
  std::vector<std::vector<int>> neighbors;  // 1-ring vertex ids, ascending
  std::vector<std::vector<int>> vfaces;     // incident face ids, ascending
  std::vector<EdgeInfo> edges;
  bool closed = true;
  bool consistent_orientation = true;

  int euler_characteristic(int nv, int nf) const {
    return nv - static_cast<int>(edges.size()) + nf;
  }
};

inline MeshTopology build_topology(const SurfaceMesh& mesh) {
  const int nv = mesh.num_vertices();
  const int nf = mesh.num_faces();
  MeshTopology topo;
  topo.neighbors.resize(nv);
  topo.vfaces.resize(nv);

  std::map<std::pair<int, int>, int> edge_of;
  std::map<std::pair<int, int>, int> directed_count;
  for (int f = 0; f < nf; ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = mesh.F(f, c);
      const int b = mesh.F(f, (c + 1) % 3);
      if (a < 0 || a >= nv || b < 0 || b >= nv || a == b) {
        throw std::invalid_argument("build_topology: invalid face " +
                                    std::to_string(f));
      }
      topo.vfaces[a].push_back(f);
      const auto key = std::minmax(a, b);
      auto it = edge_of.find(key);
      if (it == edge_of.end()) {
        EdgeInfo e;
        e.v0 = key.first;
        e.v1 = key.second;
        e.f0 = f;
        edge_of.emplace(key, static_cast<int>(topo.edges.size()));
        topo.edges.push_back(e);
        topo.neighbors[a].push_back(b);
        topo.neighbors[b].push_back(a);
      } else {
        EdgeInfo& e = topo.edges[it->second];
        if (e.f1 != -1) {
          throw std::invalid_argument("build_topology: non-manifold edge");
        }
        e.f1 = f;
      }
      ++directed_count[{a, b}];
    }
  }
  for (auto& nb : topo.neighbors) std::sort(nb.begin(), nb.end());
  for (auto& vf : topo.vfaces) std::sort(vf.begin(), vf.end());
  for (const auto& e : topo.edges) {
    if (e.f1 == -1) topo.closed = false;
  }
  // Consistent orientation: each directed edge appears exactly once.
  for (const auto& [k, c] : directed_count) {
    if (c != 1) topo.consistent_orientation = false;
  }
  return topo;
}

inline double face_area(const SurfaceMesh& mesh, const SpaceForm& space, int f) {
  const Vec4 a = mesh.vertex(mesh.F(f, 0));
  const Vec4 u = mesh.vertex(mesh.F(f, 1)) - a;
  const Vec4 v = mesh.vertex(mesh.F(f, 2)) - a;
  const double uu = space.dot(u, u), vv = space.dot(v, v), uv = space.dot(u, v);
  const double g = uu * vv - uv * uv;  // Gram determinant, > 0 for spacelike faces
  return 0.5 * std::sqrt(std::max(0.0, g));
}

inline double total_area(const SurfaceMesh& mesh, const SpaceForm& space) {
  double a = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) a += face_area(mesh, space, f);
  return a;
}

// Checks the mesh invariants: closed, consistently oriented, positive face
// areas, no isolated vertices, and chart constraint satisfied on curved
// ambients.
inline void validate_mesh(const SurfaceMesh& mesh, const SpaceForm& space,
                          double constraint_rel_tol = 1e-10) {
  if (mesh.num_vertices() < 4 || mesh.num_faces() < 4) {
    throw std::invalid_argument("validate_mesh: too few vertices/faces");
  }
  const MeshTopology topo = build_topology(mesh);
  if (!topo.closed) throw std::invalid_argument("validate_mesh: mesh not closed");
  if (!topo.consistent_orientation) {
    throw std::invalid_argument("validate_mesh: inconsistent face orientation");
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (topo.neighbors[v].empty()) {
      throw std::invalid_argument("validate_mesh: isolated vertex " +
                                  std::to_string(v));
    }
  }
  double scale2 = 0.0;
  for (const auto& e : topo.edges) {
    const Vec4 d = mesh.vertex(e.v1) - mesh.vertex(e.v0);
    scale2 = std::max(scale2, std::abs(space.dot(d, d)));
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (!(face_area(mesh, space, f) > 1e-14 * scale2)) {
      throw std::invalid_argument("validate_mesh: degenerate face " +
                                  std::to_string(f));
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    if (space.constraint_residual(mesh.vertex(v)) > constraint_rel_tol) {
      throw std::invalid_argument(
          "validate_mesh: vertex off the ambient constraint: " +
          std::to_string(v));
    }
  }
}

inline void flip_orientation(SurfaceMesh& mesh) {
  for (int f = 0; f < mesh.num_faces(); ++f) {
    std::swap(mesh.F(f, 1), mesh.F(f, 2));
  }
}

// Enclosed chart volume by the divergence theorem (flat chart; the standard
// signed-tetrahedron sum). Positive for outward orientation.
inline double enclosed_volume_flat(const SurfaceMesh& mesh) {
  double v6 = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Eigen::Vector3d a = mesh.vertex(mesh.F(f, 0)).head<3>();
    const Eigen::Vector3d b = mesh.vertex(mesh.F(f, 1)).head<3>();
    const Eigen::Vector3d c = mesh.vertex(mesh.F(f, 2)).head<3>();
    v6 += a.dot(b.cross(c));
  }
  return v6 / 6.0;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace detail {

inline void icosahedron(std::vector<Eigen::Vector3d>& verts,
                        std::vector<std::array<int, 3>>& faces) {
  const double t = 0.5 * (1.0 + std::sqrt(5.0));
  const std::array<std::array<double, 3>, 12> raw = {{{-1, t, 0},
                                                      {1, t, 0},
                                                      {-1, -t, 0},
                                                      {1, -t, 0},
                                                      {0, -1, t},
                                                      {0, 1, t},
                                                      {0, -1, -t},
                                                      {0, 1, -t},
                                                      {t, 0, -1},
                                                      {t, 0, 1},
                                                      {-t, 0, -1},
                                                      {-t, 0, 1}}};
  verts.clear();
  for (const auto& p : raw) {
    verts.push_back(Eigen::Vector3d(p[0], p[1], p[2]).normalized());
  }
  faces = {{{0, 11, 5}}, {{0, 5, 1}},  {{0, 1, 7}},   {{0, 7, 10}},
           {{0, 10, 11}}, {{1, 5, 9}},  {{5, 11, 4}},  {{11, 10, 2}},
           {{10, 7, 6}},  {{7, 1, 8}},  {{3, 9, 4}},   {{3, 4, 2}},
           {{3, 2, 6}},   {{3, 6, 8}},  {{3, 8, 9}},   {{4, 9, 5}},
           {{2, 4, 11}},  {{6, 2, 10}}, {{8, 6, 7}},   {{9, 8, 1}}};
}

// Unit-sphere directions of a subdivided icosahedron, deterministic ordering.
inline void icosphere_directions(int level,
                                 std::vector<Eigen::Vector3d>& verts,
                                 std::vector<std::array<int, 3>>& faces) {
  icosahedron(verts, faces);
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces.swap(next);
  }
}

}  // namespace detail

// Round sphere of the given radius about the chart origin (flat ambient).
inline SurfaceMesh icosphere(int level, double radius = 1.0) {
  if (level < 0 || level > 8) throw std::invalid_argument("icosphere: level 0..8");
  if (!(radius > 0.0)) throw std::invalid_argument("icosphere: radius > 0");
  std::vector<Eigen::Vector3d> dirs;
  std::vector<std::array<int, 3>> faces;
  detail::icosphere_directions(level, dirs, faces);
  SurfaceMesh mesh;
  mesh.V.resize(static_cast<int>(dirs.size()), 4);
  for (int i = 0; i < static_cast<int>(dirs.size()); ++i) {
    mesh.V.row(i) << radius * dirs[i][0], radius * dirs[i][1],
        radius * dirs[i][2], 0.0;
  }
  mesh.F.resize(static_cast<int>(faces.size()), 3);
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    mesh.F.row(f) << faces[f][0], faces[f][1], faces[f][2];
  }
  return mesh;
}

// Geodesic sphere of intrinsic radius rho0 about the chart pole
// (0, 0, 0, R). In the flat ambient this is icosphere(level, rho0).
inline SurfaceMesh geodesic_sphere(const SpaceForm& space, double rho0,
                                   int level) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("geodesic_sphere: rho0 > 0");
  if (space.kind() == AmbientKind::Euclidean) return icosphere(level, rho0);
  const double R = space.radius();
  if (space.kind() == AmbientKind::Sphere && !(rho0 < 0.5 * M_PI * R)) {
    throw std::invalid_argument(
        "geodesic_sphere: rho0 < pi R / 2 required on the sphere ambient");
  }
  std::vector<Eigen::Vector3d> dirs;
  std::vector<std::array<int, 3>> faces;
  detail::icosphere_directions(level, dirs, faces);
  const double sn = space.kind() == AmbientKind::Sphere
                        ? R * std::sin(rho0 / R)
                        : R * std::sinh(rho0 / R);
  const double w = space.kind() == AmbientKind::Sphere ? R * std::cos(rho0 / R)
                                                       : R * std::cosh(rho0 / R);
  SurfaceMesh mesh;
  mesh.V.resize(static_cast<int>(dirs.size()), 4);
  for (int i = 0; i < static_cast<int>(dirs.size()); ++i) {
    mesh.V.row(i) << sn * dirs[i][0], sn * dirs[i][1], sn * dirs[i][2], w;
  }
  mesh.F.resize(static_cast<int>(faces.size()), 3);
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    mesh.F.row(f) << faces[f][0], faces[f][1], faces[f][2];
  }
  return mesh;
}

// Rotationally symmetric dumbbell about the z axis (flat ambient): two bells
// of radius `bell_radius` with a waist of radius `neck_radius`. Used as the
// neckpinch demonstration surface.
inline SurfaceMesh dumbbell(double bell_radius, double neck_radius,
                            double half_length, int rings, int segments) {
  if (!(bell_radius > 0) || !(neck_radius > 0) || !(half_length > 0) ||
      neck_radius >= bell_radius) {
    throw std::invalid_argument("dumbbell: need 0 < neck_radius < bell_radius");
  }
  if (rings < 8 || segments < 8) {
    throw std::invalid_argument("dumbbell: rings, segments >= 8");
  }
  const double sigma = 0.45 * half_length;
  auto profile = [&](double z) {
    const double envelope = std::sqrt(std::max(0.0, 1.0 - (z / half_length) *
                                                          (z / half_length)));
    const double waist =
        1.0 - (1.0 - neck_radius / bell_radius) * std::exp(-(z * z) / (sigma * sigma));
    return bell_radius * envelope * waist;
  };

  SurfaceMesh mesh;
  const int nv = rings * segments + 2;
  mesh.V.resize(nv, 4);
  int row = 0;
  mesh.V.row(row++) << 0, 0, -half_length, 0;  // south pole
  for (int j = 1; j <= rings; ++j) {
    const double theta = M_PI * j / (rings + 1);
    const double z = -half_length * std::cos(theta);
    const double r = profile(z);
    for (int k = 0; k < segments; ++k) {
      const double phi = 2.0 * M_PI * k / segments;
      mesh.V.row(row++) << r * std::cos(phi), r * std::sin(phi), z, 0.0;
    }
  }
  mesh.V.row(row++) << 0, 0, half_length, 0;  // north pole
  const int north = nv - 1;

  std::vector<std::array<int, 3>> faces;
  auto ring_vertex = [&](int j, int k) { return 1 + j * segments + (k % segments); };
  for (int k = 0; k < segments; ++k) {
    faces.push_back({0, ring_vertex(0, k + 1), ring_vertex(0, k)});
  }
  for (int j = 0; j + 1 < rings; ++j) {
    for (int k = 0; k < segments; ++k) {
      const int a = ring_vertex(j, k), b = ring_vertex(j, k + 1);
      const int c = ring_vertex(j + 1, k), d = ring_vertex(j + 1, k + 1);
      faces.push_back({a, b, d});
      faces.push_back({a, d, c});
    }
  }
  for (int k = 0; k < segments; ++k) {
    faces.push_back({north, ring_vertex(rings - 1, k), ring_vertex(rings - 1, k + 1)});
  }
  mesh.F.resize(static_cast<int>(faces.size()), 3);
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    mesh.F.row(f) << faces[f][0], faces[f][1], faces[f][2];
  }
  if (enclosed_volume_flat(mesh) < 0.0) flip_orientation(mesh);
  return mesh;
}

// ---------------------------------------------------------------------------
// OFF / OBJ input, OFF output
// ---------------------------------------------------------------------------

inline SurfaceMesh load_off(std::istream& in) {
  std::string header;
  std::vector<std::string> tokens;
  std::string line;
  auto next_tokens = [&]() -> std::vector<std::string>& {
    tokens.clear();
    while (tokens.empty() && std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string t;
      while (ls >> t) tokens.push_back(t);
    }
    return tokens;
  };
  next_tokens();
  if (tokens.empty()) throw std::invalid_argument("OFF: empty file");
  int coord_dim = 3;
  if (tokens[0] == "OFF") {
    coord_dim = 3;
    tokens.erase(tokens.begin());
  } else if (tokens[0] == "4OFF") {
    coord_dim = 4;
    tokens.erase(tokens.begin());
  } else {
    throw std::invalid_argument("OFF: missing header");
  }
  if (tokens.empty()) next_tokens();
  if (tokens.size() < 3) throw std::invalid_argument("OFF: missing counts");
  const int nv = std::stoi(tokens[0]);
  const int nf = std::stoi(tokens[1]);
  SurfaceMesh mesh;
  mesh.V.setZero(nv, 4);
  for (int i = 0; i < nv; ++i) {
    next_tokens();
    if (static_cast<int>(tokens.size()) < coord_dim) {
      throw std::invalid_argument("OFF: truncated vertex " + std::to_string(i));
    }
    for (int c = 0; c < coord_dim; ++c) mesh.V(i, c) = std::stod(tokens[c]);
  }
  mesh.F.resize(nf, 3);
  for (int f = 0; f < nf; ++f) {
    next_tokens();
    if (tokens.size() < 4 || std::stoi(tokens[0]) != 3) {
      throw std::invalid_argument("OFF: only triangle faces are supported");
    }
    for (int c = 0; c < 3; ++c) mesh.F(f, c) = std::stoi(tokens[c + 1]);
  }
  return mesh;
}

inline SurfaceMesh load_obj(std::istream& in) {
  std::vector<Eigen::Vector4d> verts;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector4d p = Eigen::Vector4d::Zero();
      ls >> p[0] >> p[1] >> p[2];
      double w;
      if (ls >> w) p[3] = w;
      verts.push_back(p);
    } else if (tag == "f") {
      std::array<int, 3> f{};
      for (int c = 0; c < 3; ++c) {
        std::string ref;
        if (!(ls >> ref)) throw std::invalid_argument("OBJ: short face");
        f[c] = std::stoi(ref.substr(0, ref.find('/'))) - 1;
      }
      std::string extra;
      if (ls >> extra) throw std::invalid_argument("OBJ: only triangles supported");
      faces.push_back(f);
    }
  }
  SurfaceMesh mesh;
  mesh.V.resize(static_cast<int>(verts.size()), 4);
  for (int i = 0; i < static_cast<int>(verts.size()); ++i) {
    mesh.V.row(i) = verts[i].transpose();
  }
  mesh.F.resize(static_cast<int>(faces.size()), 3);
  for (int f = 0; f < static_cast<int>(faces.size()); ++f) {
    mesh.F.row(f) << faces[f][0], faces[f][1], faces[f][2];
  }
  return mesh;
}

inline SurfaceMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_mesh: cannot open " + path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".obj") {
    return load_obj(in);
  }
  return load_off(in);
}

inline void save_off(const SurfaceMesh& mesh, const SpaceForm& space,
                     std::ostream& out) {
  const bool four = space.curved();
  out << (four ? "4OFF" : "OFF") << "\n";
  out << mesh.num_vertices() << " " << mesh.num_faces() << " 0\n";
  char buf[128];
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    if (four) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", mesh.V(i, 0),
                    mesh.V(i, 1), mesh.V(i, 2), mesh.V(i, 3));
    } else {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", mesh.V(i, 0),
                    mesh.V(i, 1), mesh.V(i, 2));
    }
    out << buf;
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out << "3 " << mesh.F(f, 0) << " " << mesh.F(f, 1) << " " << mesh.F(f, 2)
        << "\n";
  }
}

}  // namespace mcflab
