#include <catch2/catch_amalgamated.hpp>
#include <Eigen/Geometry>
#include <cmath>

#include "mcflab/curvature.hpp"
#include "mcflab/mesh.hpp"

using namespace mcflab;

TEST_CASE("unit icosphere curvature: H ~ 2, |A|^2 ~ 2, outward normals") {
  const auto space = SpaceForm::euclidean();
  const auto mesh = icosphere(4);
  const auto field = compute_curvature(mesh, space);

  REQUIRE(field.H.minCoeff() > 1.98);
  REQUIRE(field.H.maxCoeff() < 2.02);
  REQUIRE(field.A2.minCoeff() > 2.0 * 0.98);
  REQUIRE(field.A2.maxCoeff() < 2.0 * 1.02);
  for (int v = 0; v < mesh.num_vertices(); v += 97) {
    const Vec4 n = field.normal.row(v).transpose();
    const Vec4 p = mesh.vertex(v);
    REQUIRE(space.dot(n, p) == Catch::Approx(1.0).epsilon(2e-3));
  }
  REQUIRE(field.max_consistency_gap < 0.05);
}

TEST_CASE("stored h has exact trace identity and Cauchy-Schwarz bound") {
  const auto space = SpaceForm::euclidean();
  const auto mesh = icosphere(3);
  const auto field = compute_curvature(mesh, space);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    REQUIRE(field.h(v, 0) + field.h(v, 2) ==
            Catch::Approx(field.H[v]).margin(1e-12));
    REQUIRE(field.A2[v] >= field.H[v] * field.H[v] / 2.0 - 1e-9);
  }
}

TEST_CASE("area weights sum to the total area") {
  const auto space = SpaceForm::euclidean();
  const auto mesh = icosphere(3);
  const auto field = compute_curvature(mesh, space);
  REQUIRE(field.dmu.sum() == Catch::Approx(field.area).epsilon(1e-10));
  REQUIRE(field.area == Catch::Approx(total_area(mesh, space)).epsilon(1e-12));
}

TEST_CASE("integrate: constants, powers, error paths") {
  const auto space = SpaceForm::euclidean();
  const auto mesh = icosphere(4);
  const auto field = compute_curvature(mesh, space);
  const int nv = mesh.num_vertices();

  REQUIRE(integrate(field, Eigen::VectorXd::Ones(nv)) ==
          Catch::Approx(4.0 * M_PI).epsilon(5e-3));
  REQUIRE(integrate(field, Eigen::VectorXd::Zero(nv)) == 0.0);
  const Eigen::VectorXd a4 = field.A2.array().square();
  REQUIRE(integrate(field, a4) == Catch::Approx(16.0 * M_PI).epsilon(1e-2));

  REQUIRE_THROWS_AS(integrate(field, Eigen::VectorXd::Ones(nv - 1)),
                    std::invalid_argument);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(nv);
  bad[3] = std::nan("");
  REQUIRE_THROWS_AS(integrate(field, bad), std::invalid_argument);
}

TEST_CASE("geodesic sphere in S^3 has H = 2 cot(rho)") {
  const auto space = SpaceForm::sphere(1.0);
  const auto mesh = geodesic_sphere(space, M_PI / 3.0, 4);
  const auto field = compute_curvature(mesh, space);
  const double expected = 2.0 / std::tan(M_PI / 3.0);  // ~1.1547
  REQUIRE(field.H.mean() == Catch::Approx(expected).epsilon(1e-2));
  REQUIRE(field.H.minCoeff() > expected * 0.97);
  REQUIRE(field.H.maxCoeff() < expected * 1.03);
}

TEST_CASE("geodesic sphere in H^3 has H = 2 coth(rho)") {
  const auto space = SpaceForm::hyperbolic(-1.0);
  const double rho = std::acosh(2.0);
  const auto mesh = geodesic_sphere(space, rho, 4);
  const auto field = compute_curvature(mesh, space);
  const double expected = 2.0 / std::tanh(rho);
  REQUIRE(field.H.mean() == Catch::Approx(expected).epsilon(1e-2));
}

TEST_CASE("gauss identity on spheres, flat and curved") {
  const auto flat = SpaceForm::euclidean();
  const auto m1 = icosphere(4);
  const auto f1 = compute_curvature(m1, flat);
  // intrinsic curvature of the unit round sphere is 1 = 0 + det h
  REQUIRE(f1.gauss_discrete.mean() == Catch::Approx(1.0).epsilon(5e-3));

  const auto sph = SpaceForm::sphere(1.0);
  const auto m2 = geodesic_sphere(sph, M_PI / 3.0, 4);
  const auto f2 = compute_curvature(m2, sph);
  const double cot = 1.0 / std::tan(M_PI / 3.0);
  REQUIRE(f2.gauss_discrete.mean() ==
          Catch::Approx(1.0 + cot * cot).epsilon(1e-2));
}

TEST_CASE("gauss and codazzi residuals shrink under refinement") {
  const auto space = SpaceForm::euclidean();
  double prev_gauss = -1.0, prev_codazzi = -1.0;
  for (int level : {3, 4, 5}) {
    const auto mesh = icosphere(level);
    const auto cache = build_geometry_cache(mesh);
    const auto field = compute_curvature(mesh, space, &cache);
    const auto res = gauss_codazzi_residual(mesh, field, space, &cache);
    if (prev_gauss > 0.0) {
      REQUIRE(res.gauss_res < prev_gauss / 3.0);
      REQUIRE(res.codazzi_res < prev_codazzi / 1.5);
    }
    prev_gauss = res.gauss_res;
    prev_codazzi = res.codazzi_res;
  }
}

TEST_CASE("H error against the round sphere shrinks by >= 3 per level") {
  const auto space = SpaceForm::euclidean();
  double prev = -1.0;
  for (int level : {3, 4, 5}) {
    const auto mesh = icosphere(level);
    const auto field = compute_curvature(mesh, space);
    const double err = (field.H.array() - 2.0).abs().maxCoeff();
    if (prev > 0.0) REQUIRE(err < prev / 3.0);
    prev = err;
  }
}

TEST_CASE("orientation flip negates nu and H, preserves |A|^2 and dmu") {
  const auto space = SpaceForm::euclidean();
  auto mesh = icosphere(3);
  const auto f0 = compute_curvature(mesh, space);
  flip_orientation(mesh);
  const auto f1 = compute_curvature(mesh, space);
  REQUIRE((f0.H + f1.H).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((f0.normal + f1.normal).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((f0.A2 - f1.A2).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((f0.dmu - f1.dmu).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rigid ambient isometries leave the field invariant") {
  const auto space = SpaceForm::euclidean();
  auto mesh = icosphere(3);
  const auto f0 = compute_curvature(mesh, space);

  const Eigen::Matrix3d R =
      Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, -0.5).normalized())
          .toRotationMatrix();
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    mesh.V.row(v).head<3>() = (R * mesh.V.row(v).head<3>().transpose()).transpose();
  }
  const auto f1 = compute_curvature(mesh, space);
  REQUIRE((f0.H - f1.H).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((f0.A2 - f1.A2).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((f0.dmu - f1.dmu).cwiseAbs().maxCoeff() < 1e-9);

  // ambient-sphere rotation in the (x, w) plane
  const auto sph = SpaceForm::sphere(1.0);
  auto gs = geodesic_sphere(sph, 0.8, 3);
  const auto g0 = compute_curvature(gs, sph);
  const double th = 0.4;
  for (int v = 0; v < gs.num_vertices(); ++v) {
    const double x = gs.V(v, 0), w = gs.V(v, 3);
    gs.V(v, 0) = std::cos(th) * x - std::sin(th) * w;
    gs.V(v, 3) = std::sin(th) * x + std::cos(th) * w;
  }
  const auto g1 = compute_curvature(gs, sph);
  REQUIRE((g0.H - g1.H).cwiseAbs().maxCoeff() < 1e-9);
  REQUIRE((g0.A2 - g1.A2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("degenerate stencil raises a typed error naming the vertex") {
  SurfaceMesh tet;  // tetrahedron: every stencil has only 3 vertices
  tet.V.setZero(4, 4);
  tet.V << 1, 1, 1, 0, 1, -1, -1, 0, -1, 1, -1, 0, -1, -1, 1, 0;
  tet.F.resize(4, 3);
  tet.F << 0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3;
  try {
    compute_curvature(tet, SpaceForm::euclidean());
    FAIL("expected DegenerateStencilError");
  } catch (const DegenerateStencilError& e) {
    REQUIRE(e.vertex >= 0);
    REQUIRE(std::string(e.what()).find("vertex") != std::string::npos);
  }
}
