#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "mcflab/curvature.hpp"
#include "mcflab/mesh.hpp"
#include "mcflab/space_form.hpp"

namespace mcflab {

struct RemeshOptions {
  double min_angle_deg = 20.0;
  double max_edge_ratio = 4.0;  // global longest / shortest
  int max_passes = 6;
  double target_edge = 0.0;  // 0: median of the input edge lengths
  double smoothing = 0.5;
};

struct RemeshResult {
  SurfaceMesh mesh;
  bool changed = false;
  bool satisfied = true;  // quality bounds hold on the output
};

namespace detail {

struct EditMesh {
  std::vector<Vec4> V;
  std::vector<std::array<int, 3>> F;

  static EditMesh from(const SurfaceMesh& m) {
    EditMesh e;
    e.V.reserve(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) e.V.push_back(m.vertex(v));
    e.F.reserve(m.num_faces());
    for (int f = 0; f < m.num_faces(); ++f) {
      e.F.push_back({m.F(f, 0), m.F(f, 1), m.F(f, 2)});
    }
    return e;
  }
  SurfaceMesh to() const {
    SurfaceMesh m;
    m.V.resize(static_cast<int>(V.size()), 4);
    for (size_t v = 0; v < V.size(); ++v) m.V.row(static_cast<int>(v)) = V[v].transpose();
    m.F.resize(static_cast<int>(F.size()), 3);
    for (size_t f = 0; f < F.size(); ++f) {
      m.F.row(static_cast<int>(f)) << F[f][0], F[f][1], F[f][2];
    }
    return m;
  }
};

inline double edge_len(const EditMesh& m, const SpaceForm& space, int a, int b) {
  const Vec4 d = m.V[a] - m.V[b];
  return space.norm(d);
}

inline double tri_min_angle(const EditMesh& m, const SpaceForm& space,
                            const std::array<int, 3>& f) {
  double worst = M_PI;
  for (int c = 0; c < 3; ++c) {
    const Vec4 u = m.V[f[(c + 1) % 3]] - m.V[f[c]];
    const Vec4 v = m.V[f[(c + 2) % 3]] - m.V[f[c]];
    const double uu = space.dot(u, u), vv = space.dot(v, v), uv = space.dot(u, v);
    const double cross = std::sqrt(std::max(0.0, uu * vv - uv * uv));
    worst = std::min(worst, std::atan2(cross, uv));
  }
  return worst;
}

struct Quality {
  double min_angle;
  double edge_ratio;
};

inline Quality measure(const EditMesh& m, const SpaceForm& space) {
  Quality q{M_PI, 1.0};
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& f : m.F) {
    q.min_angle = std::min(q.min_angle, tri_min_angle(m, space, f));
    for (int c = 0; c < 3; ++c) {
      const double l = edge_len(m, space, f[c], f[(c + 1) % 3]);
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
  }
  q.edge_ratio = hi / lo;
  return q;
}

// edge -> the two adjacent faces
inline std::map<std::pair<int, int>, std::vector<int>> edge_faces(const EditMesh& m) {
  std::map<std::pair<int, int>, std::vector<int>> ef;
  for (size_t f = 0; f < m.F.size(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const auto key = std::minmax(m.F[f][c], m.F[f][(c + 1) % 3]);
      ef[key].push_back(static_cast<int>(f));
    }
  }
  return ef;
}

inline Vec4 midpoint(const EditMesh& m, const SpaceForm& space, int a, int b) {
  Vec4 mid = 0.5 * (m.V[a] + m.V[b]);
  return space.curved() ? space.project(mid) : mid;
}

inline int split_long_edges(EditMesh& m, const SpaceForm& space, double lmax) {
  int done = 0;
  auto ef = edge_faces(m);
  std::set<int> dirty;
  for (const auto& [key, fs] : ef) {
    if (fs.size() != 2) continue;
    if (dirty.count(fs[0]) || dirty.count(fs[1])) continue;
    if (edge_len(m, space, key.first, key.second) <= lmax) continue;
    const int mid = static_cast<int>(m.V.size());
    m.V.push_back(midpoint(m, space, key.first, key.second));
    for (int fi : fs) {
      auto face = m.F[fi];
      // rotate so the split edge is (face[0], face[1])
      while (!((face[0] == key.first && face[1] == key.second) ||
               (face[0] == key.second && face[1] == key.first))) {
        std::rotate(face.begin(), face.begin() + 1, face.end());
      }
      m.F[fi] = {face[0], mid, face[2]};
      m.F.push_back({mid, face[1], face[2]});
      dirty.insert(fi);
      dirty.insert(static_cast<int>(m.F.size()) - 1);
    }
    ++done;
  }
  return done;
}

inline std::vector<std::set<int>> vertex_links(const EditMesh& m) {
  std::vector<std::set<int>> link(m.V.size());
  for (const auto& f : m.F) {
    for (int c = 0; c < 3; ++c) {
      link[f[c]].insert(f[(c + 1) % 3]);
      link[f[c]].insert(f[(c + 2) % 3]);
    }
  }
  return link;
}

inline bool collapse_one_short_edge(EditMesh& m, const SpaceForm& space,
                                    double lmin, double lmax) {
  const auto link = vertex_links(m);
  auto ef = edge_faces(m);
  for (const auto& [key, fs] : ef) {
    const auto [a, b] = key;
    if (fs.size() != 2) continue;
    if (edge_len(m, space, a, b) >= lmin) continue;
    // link condition: shared link must be exactly the two opposite vertices
    std::vector<int> shared;
    std::set_intersection(link[a].begin(), link[a].end(), link[b].begin(),
                          link[b].end(), std::back_inserter(shared));
    if (shared.size() != 2) continue;
    const Vec4 target = midpoint(m, space, a, b);
    // reject if the collapse would create an overlong edge
    bool ok = true;
    for (int u : link[b]) {
      if (u == a) continue;
      if ((space.norm(m.V[u] - target)) > lmax) ok = false;
    }
    for (int u : link[a]) {
      if (u == b) continue;
      if ((space.norm(m.V[u] - target)) > lmax) ok = false;
    }
    if (!ok) continue;

    m.V[a] = target;
    std::vector<std::array<int, 3>> kept;
    kept.reserve(m.F.size());
    for (auto f : m.F) {
      for (int c = 0; c < 3; ++c) {
        if (f[c] == b) f[c] = a;
      }
      if (f[0] != f[1] && f[1] != f[2] && f[2] != f[0]) kept.push_back(f);
    }
    m.F.swap(kept);
    // drop the dead vertex, remapping indices
    const int last = static_cast<int>(m.V.size()) - 1;
    if (b != last) {
      m.V[b] = m.V[last];
      for (auto& f : m.F) {
        for (int c = 0; c < 3; ++c) {
          if (f[c] == last) f[c] = b;
        }
      }
    }
    m.V.pop_back();
    return true;
  }
  return false;
}

// Flip an interior edge when it raises the minimum of the incident angles.
inline int flip_edges(EditMesh& m, const SpaceForm& space) {
  int done = 0;
  auto ef = edge_faces(m);
  std::set<std::pair<int, int>> existing;
  for (const auto& [key, fs] : ef) existing.insert(key);
  std::set<int> dirty;
  for (const auto& [key, fs] : ef) {
    if (fs.size() != 2 || dirty.count(fs[0]) || dirty.count(fs[1])) continue;
    const auto [a, b] = key;
    auto f1 = m.F[fs[0]], f2 = m.F[fs[1]];
    while (!((f1[0] == a && f1[1] == b) || (f1[0] == b && f1[1] == a))) {
      std::rotate(f1.begin(), f1.begin() + 1, f1.end());
    }
    while (!((f2[0] == a && f2[1] == b) || (f2[0] == b && f2[1] == a))) {
      std::rotate(f2.begin(), f2.begin() + 1, f2.end());
    }
    if (f1[0] != f2[1] || f1[1] != f2[0]) continue;  // orientation mismatch
    const int c = f1[2], d = f2[2];
    if (existing.count(std::minmax(c, d))) continue;
    const double before = std::min(tri_min_angle(m, space, f1),
                                   tri_min_angle(m, space, f2));
    const std::array<int, 3> g1 = {f1[0], d, c};
    const std::array<int, 3> g2 = {d, f1[1], c};
    const double after = std::min(tri_min_angle(m, space, g1),
                                  tri_min_angle(m, space, g2));
    if (after <= before + 1e-12) continue;
    m.F[fs[0]] = g1;
    m.F[fs[1]] = g2;
    dirty.insert(fs[0]);
    dirty.insert(fs[1]);
    existing.insert(std::minmax(c, d));
    ++done;
  }
  return done;
}

inline void tangential_smooth(EditMesh& m, const SpaceForm& space, double w) {
  const auto mesh = m.to();
  const auto field = compute_curvature(mesh, space);
  const auto topo = build_topology(mesh);
  std::vector<Vec4> out = m.V;
  for (size_t v = 0; v < m.V.size(); ++v) {
    Vec4 centroid = Vec4::Zero();
    double wsum = 0.0;
    for (int u : topo.neighbors[v]) {
      centroid += field.dmu[u] * m.V[u];
      wsum += field.dmu[u];
    }
    if (wsum <= 0.0) continue;
    centroid /= wsum;
    Vec4 d = centroid - m.V[v];
    d = space.tangent_project(m.V[v], d);
    const Vec4 nu = field.normal.row(static_cast<int>(v)).transpose();
    d -= space.dot(d, nu) * nu;
    Vec4 moved = m.V[v] + w * d;
    out[v] = space.curved() ? space.project(moved) : moved;
  }
  m.V.swap(out);
}

}  // namespace detail

// Incremental quality remeshing: split / collapse / flip plus tangential
// smoothing until the angle and edge-ratio bounds hold. Topology (Euler
// characteristic) is preserved by construction of the three operations.
inline RemeshResult remesh(const SurfaceMesh& input, const SpaceForm& space,
                           const RemeshOptions& opts = {}) {
  auto m = detail::EditMesh::from(input);
  const double min_angle = opts.min_angle_deg * M_PI / 180.0;

  auto q0 = detail::measure(m, space);
  if (q0.min_angle >= min_angle && q0.edge_ratio <= opts.max_edge_ratio) {
    return {input, false, true};  // already good: no-op
  }

  double target = opts.target_edge;
  if (target <= 0.0) {
    std::vector<double> lens;
    for (const auto& f : m.F) {
      for (int c = 0; c < 3; ++c) {
        lens.push_back(detail::edge_len(m, space, f[c], f[(c + 1) % 3]));
      }
    }
    std::nth_element(lens.begin(), lens.begin() + lens.size() / 2, lens.end());
    target = lens[lens.size() / 2];
  }
  const double lmax = 4.0 / 3.0 * target;
  const double lmin = 4.0 / 5.0 * target;

  for (int pass = 0; pass < opts.max_passes; ++pass) {
    detail::split_long_edges(m, space, lmax);
    while (detail::collapse_one_short_edge(m, space, lmin, lmax)) {
    }
    detail::flip_edges(m, space);
    detail::tangential_smooth(m, space, opts.smoothing);
    const auto q = detail::measure(m, space);
    if (q.min_angle >= min_angle && q.edge_ratio <= opts.max_edge_ratio) break;
  }

  RemeshResult res;
  res.mesh = m.to();
  res.changed = true;
  const auto q = detail::measure(m, space);
  res.satisfied =
      q.min_angle >= min_angle && q.edge_ratio <= opts.max_edge_ratio;
  const auto t_in = build_topology(input);
  const auto t_out = build_topology(res.mesh);
  if (t_in.euler_characteristic(input.num_vertices(), input.num_faces()) !=
      t_out.euler_characteristic(res.mesh.num_vertices(), res.mesh.num_faces())) {
    throw std::logic_error("remesh: Euler characteristic changed");
  }
  return res;
}

}  // namespace mcflab
