#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/mesh.hpp"
#include "mcflab/numerics.hpp"
#include "mcflab/space_form.hpp"

namespace mcflab {

struct DegenerateStencilError : std::runtime_error {
  explicit DegenerateStencilError(int v, int count)
      : std::runtime_error("degenerate quadric stencil at vertex " +
                           std::to_string(v) + " (" + std::to_string(count) +
                           " neighbors, need >= 5)"),
        vertex(v) {}
  int vertex;
};

// Connectivity-dependent data reused across steps while the mesh topology is
// unchanged: two-ring stencils and the cotangent-matrix sparsity pattern with
// per-face scatter offsets.
struct GeometryCache {
  MeshTopology topo;
  std::vector<std::vector<int>> stencils;  // two-ring, ascending, self excluded
  Eigen::SparseMatrix<double> pattern;     // compressed Laplacian pattern
  std::vector<int> face_scatter;           // 12 nnz offsets per face
};

inline GeometryCache build_geometry_cache(const SurfaceMesh& mesh) {
  GeometryCache cache;
  cache.topo = build_topology(mesh);
  const int nv = mesh.num_vertices();
  cache.stencils.resize(nv);
  std::vector<int> scratch;
  for (int v = 0; v < nv; ++v) {
    scratch.clear();
    for (int u : cache.topo.neighbors[v]) {
      scratch.push_back(u);
      for (int w : cache.topo.neighbors[u]) {
        if (w != v) scratch.push_back(w);
      }
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    cache.stencils[v] = scratch;
  }

  // Sparsity pattern of the symmetric graph Laplacian.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_faces() * 12);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = mesh.F(f, c), b = mesh.F(f, (c + 1) % 3);
      trip.emplace_back(a, b, 0.0);
      trip.emplace_back(b, a, 0.0);
      trip.emplace_back(a, a, 0.0);
      trip.emplace_back(b, b, 0.0);
    }
  }
  cache.pattern.resize(nv, nv);
  cache.pattern.setFromTriplets(trip.begin(), trip.end());
  cache.pattern.makeCompressed();

  auto nnz_offset = [&](int row, int col) {
    const int start = cache.pattern.outerIndexPtr()[col];
    const int end = cache.pattern.outerIndexPtr()[col + 1];
    const int* inner = cache.pattern.innerIndexPtr();
    const int* it = std::lower_bound(inner + start, inner + end, row);
    return static_cast<int>(it - inner);
  };
  cache.face_scatter.reserve(mesh.num_faces() * 12);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = mesh.F(f, c), b = mesh.F(f, (c + 1) % 3);
      cache.face_scatter.push_back(nnz_offset(a, b));
      cache.face_scatter.push_back(nnz_offset(b, a));
      cache.face_scatter.push_back(nnz_offset(a, a));
      cache.face_scatter.push_back(nnz_offset(b, b));
    }
  }
  return cache;
}

// Per-vertex extrinsic geometry of the immersed surface, plus the cotangent
// operator reused by the flow integrator.
//
// h is stored in the orthonormal vertex frame (e1, e2), so trace(h) = H and
// |A|^2 = h11^2 + 2 h12^2 + h22^2 hold exactly in the stored representation.
// H comes from the cotangent Laplacian (most robust estimate); the quadric
// fit supplies the traceless part of h, with the trace gap between the two
// estimates kept as a consistency diagnostic.
struct CurvatureField {
  VertexMatrix normal;                              // outward unit normal
  Eigen::Matrix<double, Eigen::Dynamic, 8, Eigen::RowMajor> frame;  // e1, e2
  Eigen::VectorXd H;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> h;  // h11, h12, h22
  Eigen::VectorXd A2;                               // |A|^2 = h_ik h^ik
  Eigen::VectorXd Abar;                             // |H| |A|
  Eigen::VectorXd h_min_eig;
  Eigen::VectorXd dmu;                              // mixed Voronoi area
  Eigen::VectorXd gauss_discrete;                   // angle defect / area
  Eigen::VectorXd fit_H;                            // raw quadric-fit trace

  Eigen::SparseMatrix<double> cot_matrix;  // symmetric: W_ii = sum_j w_ij
  double area = 0.0;
  double min_edge = 0.0;
  double min_angle = 0.0;  // radians
  double max_consistency_gap = 0.0;

  int num_vertices() const { return static_cast<int>(H.size()); }
  double max_A2() const { return A2.size() ? A2.maxCoeff() : 0.0; }
  double max_Abar() const { return Abar.size() ? Abar.maxCoeff() : 0.0; }
  double min_h_eigenvalue() const {
    return h_min_eig.size() ? h_min_eig.minCoeff() : 0.0;
  }
  // Coefficient of variation of H over vertices (area weighted).
  double H_variation() const {
    const double a = dmu.sum();
    const double mean = H.dot(dmu) / a;
    const double var = (H.array() - mean).square().matrix().dot(dmu) / a;
    return std::abs(mean) > 0 ? std::sqrt(var) / std::abs(mean)
                              : std::sqrt(var);
  }
};

struct CurvatureOptions {
  int min_stencil = 5;
  double consistency_tol = 0.05;  // diagnostic threshold, not an error
};

namespace detail {

// Accumulates cotangent weights, mixed Voronoi areas and angle defects in the
// ambient chart metric (chordal approximation on curved ambients).
struct CotanAccum {
  Eigen::VectorXd vertex_area;
  Eigen::VectorXd angle_sum;
  double min_edge = std::numeric_limits<double>::infinity();
  double min_angle = std::numeric_limits<double>::infinity();
  double total_area = 0.0;
};

// Fills the cached Laplacian pattern in place and returns the per-vertex data.
inline CotanAccum cotan_accumulate(const SurfaceMesh& mesh,
                                   const SpaceForm& space,
                                   const GeometryCache& cache,
                                   Eigen::SparseMatrix<double>& W) {
  const int nv = mesh.num_vertices();
  CotanAccum acc;
  acc.vertex_area = Eigen::VectorXd::Zero(nv);
  acc.angle_sum = Eigen::VectorXd::Zero(nv);
  W = cache.pattern;
  double* vals = W.valuePtr();
  std::fill(vals, vals + W.nonZeros(), 0.0);
  const int* scatter = cache.face_scatter.data();

  for (int f = 0; f < mesh.num_faces(); ++f) {
    const int i0 = mesh.F(f, 0), i1 = mesh.F(f, 1), i2 = mesh.F(f, 2);
    const Vec4 p0 = mesh.vertex(i0), p1 = mesh.vertex(i1), p2 = mesh.vertex(i2);
    const Vec4 e01 = p1 - p0, e12 = p2 - p1, e20 = p0 - p2;
    const double l01 = space.dot(e01, e01);
    const double l12 = space.dot(e12, e12);
    const double l20 = space.dot(e20, e20);
    const double area = face_area(mesh, space, f);
    if (!(area > 0.0)) {
      throw std::invalid_argument("cotan: degenerate face " + std::to_string(f));
    }
    acc.total_area += area;
    acc.min_edge = std::min(acc.min_edge,
                            std::sqrt(std::min({l01, l12, l20})));

    // corner cotangents: cot at vertex k opposite to edge e
    const double d0 = space.dot(e01, -e20);  // angle at vertex 0
    const double d1 = space.dot(-e01, e12);  // angle at vertex 1
    const double d2 = space.dot(-e12, e20);  // angle at vertex 2
    const double twoA = 2.0 * area;
    const double cot0 = d0 / twoA, cot1 = d1 / twoA, cot2 = d2 / twoA;
    const double a0 = std::atan2(twoA, d0);
    const double a1 = std::atan2(twoA, d1);
    const double a2 = std::atan2(twoA, d2);
    acc.angle_sum[i0] += a0;
    acc.angle_sum[i1] += a1;
    acc.angle_sum[i2] += a2;
    acc.min_angle = std::min({acc.min_angle, a0, a1, a2});

    // w_ij = (cot of the angles opposite to ij) / 2, assembled into the
    // symmetric graph Laplacian W (W x)_i = sum_j w_ij (x_i - x_j).
    const int* s = scatter + 12 * f;
    const double w01 = 0.5 * cot2, w12 = 0.5 * cot0, w20 = 0.5 * cot1;
    vals[s[0]] -= w01;
    vals[s[1]] -= w01;
    vals[s[2]] += w01;
    vals[s[3]] += w01;
    vals[s[4]] -= w12;
    vals[s[5]] -= w12;
    vals[s[6]] += w12;
    vals[s[7]] += w12;
    vals[s[8]] -= w20;
    vals[s[9]] -= w20;
    vals[s[10]] += w20;
    vals[s[11]] += w20;

    // mixed Voronoi area (Meyer et al.): circumcentric pieces for non-obtuse
    // triangles, area/2 at the obtuse corner and area/4 elsewhere otherwise.
    if (d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0) {
      acc.vertex_area[i0] += 0.125 * (l01 * cot2 + l20 * cot1);
      acc.vertex_area[i1] += 0.125 * (l01 * cot2 + l12 * cot0);
      acc.vertex_area[i2] += 0.125 * (l20 * cot1 + l12 * cot0);
    } else {
      acc.vertex_area[i0] += (d0 < 0.0) ? 0.5 * area : 0.25 * area;
      acc.vertex_area[i1] += (d1 < 0.0) ? 0.5 * area : 0.25 * area;
      acc.vertex_area[i2] += (d2 < 0.0) ? 0.5 * area : 0.25 * area;
    }
  }
  return acc;
}

}  // namespace detail

inline CurvatureField compute_curvature(const SurfaceMesh& mesh,
                                        const SpaceForm& space,
                                        const GeometryCache* cache = nullptr,
                                        const CurvatureOptions& opts = {}) {
  GeometryCache local;
  if (!cache) {
    local = build_geometry_cache(mesh);
    cache = &local;
  }
  const MeshTopology& topo = cache->topo;
  const int nv = mesh.num_vertices();
  for (int v = 0; v < nv; ++v) {
    if (topo.neighbors[v].empty()) {
      throw std::invalid_argument("compute_curvature: isolated vertex " +
                                  std::to_string(v));
    }
  }

  CurvatureField field;
  auto acc = detail::cotan_accumulate(mesh, space, *cache, field.cot_matrix);
  field.dmu = acc.vertex_area;
  field.area = acc.total_area;
  field.min_edge = acc.min_edge;
  field.min_angle = acc.min_angle;

  // Outward vertex normals: area-weighted face normals, projected to the
  // ambient tangent space at the vertex and normalized in the chart metric.
  field.normal.setZero(nv, 4);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Vec4 p0 = mesh.vertex(mesh.F(f, 0));
    const Vec4 p1 = mesh.vertex(mesh.F(f, 1));
    const Vec4 p2 = mesh.vertex(mesh.F(f, 2));
    Vec4 centroid = (p0 + p1 + p2) / 3.0;
    if (space.curved()) centroid = space.project(centroid);
    const Vec4 m = space.chart_normal(centroid);
    const Vec4 n2A = ambient_cross(space, m, p1 - p0, p2 - p0);
    for (int c = 0; c < 3; ++c) {
      field.normal.row(mesh.F(f, c)) += n2A.transpose();
    }
  }
  for (int v = 0; v < nv; ++v) {
    Vec4 n = space.tangent_project(mesh.vertex(v), field.normal.row(v).transpose());
    const double len = space.norm(n);
    if (!(len > 0.0)) {
      throw std::runtime_error("compute_curvature: vanishing normal at vertex " +
                               std::to_string(v));
    }
    field.normal.row(v) = (n / len).transpose();
  }

  // Mean curvature from the Laplace-Beltrami identity Lap F = -H nu; the
  // contraction with nu discards the chart-constraint component on curved
  // ambients.
  field.H.resize(nv);
  {
    VertexMatrix WF = field.cot_matrix * mesh.V;
    for (int v = 0; v < nv; ++v) {
      // (Lap F)_v = -(W F)_v / dmu_v
      const Vec4 lap = -WF.row(v).transpose() / field.dmu[v];
      field.H[v] = -space.dot(lap, field.normal.row(v).transpose());
    }
  }

  // Deterministic orthonormal tangent frames: e1 follows the lowest-index
  // neighbor edge.
  field.frame.resize(nv, 8);
  for (int v = 0; v < nv; ++v) {
    const Vec4 p = mesh.vertex(v);
    const Vec4 nu = field.normal.row(v).transpose();
    Vec4 e1 = Vec4::Zero();
    for (int u : topo.neighbors[v]) {
      Vec4 d = space.tangent_project(p, mesh.vertex(u) - p);
      d -= space.dot(d, nu) * nu;
      if (space.dot(d, d) > 0.0) {
        e1 = d / space.norm(d);
        break;
      }
    }
    if (space.dot(e1, e1) == 0.0) {
      throw std::runtime_error("compute_curvature: no tangent frame at vertex " +
                               std::to_string(v));
    }
    const Vec4 m = space.chart_normal(p);
    Vec4 e2 = ambient_cross(space, m, nu, e1);
    e2 /= space.norm(e2);
    field.frame.row(v).head<4>() = e1.transpose();
    field.frame.row(v).tail<4>() = e2.transpose();
  }

  // Second fundamental form by an osculating-quadric fit over the two-ring in
  // the tangent frame: c = h11 a^2 / 2 + h12 a b + h22 b^2 / 2 + t1 a + t2 b,
  // displacements scale-normalized for conditioning.
  field.h.resize(nv, 3);
  field.fit_H.resize(nv);
  field.A2.resize(nv);
  field.Abar.resize(nv);
  field.h_min_eig.resize(nv);
  field.gauss_discrete.resize(nv);
  double max_gap = 0.0;
  const double rms_H = std::sqrt(field.H.array().square().matrix().dot(field.dmu) /
                                 field.area);
  for (int v = 0; v < nv; ++v) {
    const auto& stencil = cache->stencils[v];
    if (static_cast<int>(stencil.size()) < opts.min_stencil) {
      throw DegenerateStencilError(v, static_cast<int>(stencil.size()));
    }
    const Vec4 p = mesh.vertex(v);
    const Vec4 nu = field.normal.row(v).transpose();
    const Vec4 e1 = field.frame.row(v).head<4>().transpose();
    const Vec4 e2 = field.frame.row(v).tail<4>().transpose();

    double scale = 0.0;
    for (int u : stencil) {
      const Vec4 d = mesh.vertex(u) - p;
      scale += space.norm(d);
    }
    scale /= static_cast<double>(stencil.size());

    double nm[15] = {0};  // lower triangle of the 5x5 normal matrix
    double rhs[5] = {0};
    for (int u : stencil) {
      const Vec4 d = mesh.vertex(u) - p;
      const double a = space.dot(d, e1) / scale;
      const double b = space.dot(d, e2) / scale;
      const double c = space.dot(d, nu) / scale;
      const double r0 = 0.5 * a * a, r1 = a * b, r2 = 0.5 * b * b, r3 = a,
                   r4 = b;
      nm[0] += r0 * r0;
      nm[1] += r1 * r0;
      nm[2] += r1 * r1;
      nm[3] += r2 * r0;
      nm[4] += r2 * r1;
      nm[5] += r2 * r2;
      nm[6] += r3 * r0;
      nm[7] += r3 * r1;
      nm[8] += r3 * r2;
      nm[9] += r3 * r3;
      nm[10] += r4 * r0;
      nm[11] += r4 * r1;
      nm[12] += r4 * r2;
      nm[13] += r4 * r3;
      nm[14] += r4 * r4;
      rhs[0] += r0 * c;
      rhs[1] += r1 * c;
      rhs[2] += r2 * c;
      rhs[3] += r3 * c;
      rhs[4] += r4 * c;
    }
    // In-place 5x5 Cholesky of the normal matrix (SPD for a full stencil).
    double L[5][5];
    {
      int k = 0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j <= i; ++j) L[i][j] = nm[k++];
      }
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j <= i; ++j) {
          double s = L[i][j];
          for (int t = 0; t < j; ++t) s -= L[i][t] * L[j][t];
          if (i == j) {
            if (!(s > 0.0)) throw DegenerateStencilError(v, static_cast<int>(stencil.size()));
            L[i][i] = std::sqrt(s);
          } else {
            L[i][j] = s / L[j][j];
          }
        }
      }
    }
    double sol[5];
    for (int i = 0; i < 5; ++i) {
      double s = rhs[i];
      for (int t = 0; t < i; ++t) s -= L[i][t] * sol[t];
      sol[i] = s / L[i][i];
    }
    for (int i = 4; i >= 0; --i) {
      double s = sol[i];
      for (int t = i + 1; t < 5; ++t) s -= L[t][i] * sol[t];
      sol[i] = s / L[i][i];
    }
    // The fitted quadric is the height graph along +nu; the shape-operator
    // sign convention (spheres convex with outward nu) is its negative.
    const double h11f = -sol[0] / scale;
    const double h12f = -sol[1] / scale;
    const double h22f = -sol[2] / scale;
    field.fit_H[v] = h11f + h22f;

    const double gap = std::abs(field.fit_H[v] - field.H[v]) /
                       std::max({std::abs(field.H[v]), std::abs(field.fit_H[v]),
                                 rms_H, 1e-300});
    max_gap = std::max(max_gap, gap);

    // Keep the fitted traceless part, set the trace from the cotangent H.
    const double shift = 0.5 * (field.H[v] - field.fit_H[v]);
    const double h11 = h11f + shift;
    const double h22 = h22f + shift;
    field.h(v, 0) = h11;
    field.h(v, 1) = h12f;
    field.h(v, 2) = h22;
    field.A2[v] = h11 * h11 + 2.0 * h12f * h12f + h22 * h22;
    field.Abar[v] = std::abs(field.H[v]) * std::sqrt(field.A2[v]);
    field.h_min_eig[v] = sym2x2_eigenvalues(h11, h12f, h22)[0];
    field.gauss_discrete[v] = (2.0 * M_PI - acc.angle_sum[v]) / field.dmu[v];

    if (!std::isfinite(field.A2[v]) || !std::isfinite(field.H[v])) {
      throw std::runtime_error("compute_curvature: non-finite curvature at vertex " +
                               std::to_string(v));
    }
  }
  field.max_consistency_gap = max_gap;
  return field;
}

// Integral of a per-vertex scalar against the area measure.
inline double integrate(const CurvatureField& field,
                        const Eigen::VectorXd& values) {
  if (values.size() != field.dmu.size()) {
    throw std::invalid_argument("integrate: length mismatch");
  }
  KahanSum sum;
  for (int v = 0; v < values.size(); ++v) {
    if (!std::isfinite(values[v])) {
      throw std::invalid_argument("integrate: non-finite input at vertex " +
                                  std::to_string(v));
    }
    sum.add(values[v] * field.dmu[v]);
  }
  return sum.value();
}

// Residuals of the structure equations relating intrinsic curvature, h and
// the ambient curvature:
//   gauss_res  : || K_discrete - (K_ambient + det h) ||_{L2(dmu)}
//   codazzi_res: || antisym grad h - ambient term ||_{L2(dmu)}  (term = 0 here)
struct StructureResiduals {
  double gauss_res = 0.0;
  double codazzi_res = 0.0;
};

inline StructureResiduals gauss_codazzi_residual(const SurfaceMesh& mesh,
                                                 const CurvatureField& field,
                                                 const SpaceForm& space,
                                                 const GeometryCache* cache = nullptr) {
  if (field.num_vertices() != mesh.num_vertices()) {
    throw std::invalid_argument("gauss_codazzi_residual: field/mesh mismatch");
  }
  GeometryCache local;
  if (!cache) {
    local = build_geometry_cache(mesh);
    cache = &local;
  }
  const int nv = mesh.num_vertices();
  const double K = space.curvature();
  KahanSum gauss_sq, codazzi_sq;

  for (int v = 0; v < nv; ++v) {
    const double det_h =
        field.h(v, 0) * field.h(v, 2) - field.h(v, 1) * field.h(v, 1);
    const double gr = field.gauss_discrete[v] - (K + det_h);
    gauss_sq.add(gr * gr * field.dmu[v]);

    // Covariant derivative of h at v: parallel-transport neighbor tensors
    // into the vertex frame, then fit the linear variation over the stencil.
    const Vec4 p = mesh.vertex(v);
    const Vec4 nu = field.normal.row(v).transpose();
    const Vec4 e1 = field.frame.row(v).head<4>().transpose();
    const Vec4 e2 = field.frame.row(v).tail<4>().transpose();
    Eigen::Matrix2d AtA = Eigen::Matrix2d::Zero();
    Eigen::Matrix<double, 2, 3> Aty = Eigen::Matrix<double, 2, 3>::Zero();
    for (int u : cache->topo.neighbors[v]) {
      const Vec4 d = mesh.vertex(u) - p;
      const double a = space.dot(d, e1);
      const double b = space.dot(d, e2);
      const Vec4 nu_u = field.normal.row(u).transpose();
      const Vec4 f1 = field.frame.row(u).head<4>().transpose();
      const Vec4 f2 = field.frame.row(u).tail<4>().transpose();
      // Minimal rotation mapping nu_u to nu in the chart metric.
      const double c = space.dot(nu_u, nu);
      auto rotate = [&](const Vec4& x) -> Vec4 {
        if (c <= -0.5) return x;  // fold-over; skip the correction
        return x - (space.dot(nu_u, x) + space.dot(nu, x)) / (1.0 + c) * (nu_u + nu) +
               2.0 * space.dot(nu_u, x) * nu;
      };
      const Vec4 t1 = rotate(f1), t2 = rotate(f2);
      const Eigen::Matrix2d B =
          (Eigen::Matrix2d() << space.dot(e1, t1), space.dot(e1, t2),
           space.dot(e2, t1), space.dot(e2, t2))
              .finished();
      Eigen::Matrix2d hu;
      hu << field.h(u, 0), field.h(u, 1), field.h(u, 1), field.h(u, 2);
      const Eigen::Matrix2d ht = B * hu * B.transpose();
      const Eigen::Vector3d dh(ht(0, 0) - field.h(v, 0),
                               ht(0, 1) - field.h(v, 1),
                               ht(1, 1) - field.h(v, 2));
      const Eigen::Vector2d x(a, b);
      AtA += x * x.transpose();
      Aty += x * dh.transpose();
    }
    const Eigen::Matrix<double, 2, 3> grad = AtA.ldlt().solve(Aty);
    // grad(k, comp): nabla_k h_comp with comp in {11, 12, 22}
    const double c112 = grad(1, 0) - grad(0, 1);  // nabla_2 h11 - nabla_1 h12
    const double c212 = grad(1, 1) - grad(0, 2);  // nabla_2 h12 - nabla_1 h22
    // Space forms have R_{0ijk} = 0, so the Codazzi right side vanishes.
    codazzi_sq.add((c112 * c112 + c212 * c212) * field.dmu[v]);
  }
  StructureResiduals res;
  res.gauss_res = std::sqrt(std::max(0.0, gauss_sq.value()));
  res.codazzi_res = std::sqrt(std::max(0.0, codazzi_sq.value()));
  return res;
}

}  // namespace mcflab
