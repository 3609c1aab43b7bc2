#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "mcflab/mesh.hpp"

using namespace mcflab;

TEST_CASE("icosphere counts, closure and orientation") {
  for (int level : {0, 2, 4}) {
    const auto mesh = icosphere(level);
    REQUIRE(mesh.num_vertices() == 10 * (1 << (2 * level)) + 2);
    REQUIRE(mesh.num_faces() == 20 * (1 << (2 * level)));
    const auto topo = build_topology(mesh);
    REQUIRE(topo.closed);
    REQUIRE(topo.consistent_orientation);
    REQUIRE(topo.euler_characteristic(mesh.num_vertices(), mesh.num_faces()) == 2);
  }
}

TEST_CASE("icosphere metric quantities converge to the round sphere") {
  const auto mesh = icosphere(4);
  const auto space = SpaceForm::euclidean();
  REQUIRE(total_area(mesh, space) == Catch::Approx(4.0 * M_PI).epsilon(5e-3));
  REQUIRE(enclosed_volume_flat(mesh) ==
          Catch::Approx(4.0 / 3.0 * M_PI).epsilon(8e-3));
  REQUIRE_NOTHROW(validate_mesh(mesh, space));
}

TEST_CASE("orientation flip negates the enclosed volume") {
  auto mesh = icosphere(2);
  const double v = enclosed_volume_flat(mesh);
  flip_orientation(mesh);
  REQUIRE(enclosed_volume_flat(mesh) == Catch::Approx(-v));
  const auto topo = build_topology(mesh);
  REQUIRE(topo.consistent_orientation);
}

TEST_CASE("geodesic spheres satisfy the chart constraints") {
  const auto sph = SpaceForm::sphere(1.0);
  const auto ms = geodesic_sphere(sph, M_PI / 3.0, 3);
  REQUIRE_NOTHROW(validate_mesh(ms, sph));
  // area of a geodesic sphere of radius rho in S^3: 4 pi sin(rho)^2
  REQUIRE(total_area(ms, sph) ==
          Catch::Approx(4.0 * M_PI * 0.75).epsilon(1e-2));

  const auto hyp = SpaceForm::hyperbolic(-1.0);
  const double rho = std::acosh(2.0);
  const auto mh = geodesic_sphere(hyp, rho, 3);
  REQUIRE_NOTHROW(validate_mesh(mh, hyp));
  REQUIRE(total_area(mh, hyp) ==
          Catch::Approx(4.0 * M_PI * std::sinh(rho) * std::sinh(rho))
              .epsilon(1e-2));

  REQUIRE_THROWS_AS(geodesic_sphere(sph, 2.0, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(geodesic_sphere(hyp, -0.1, 2), std::invalid_argument);
}

TEST_CASE("dumbbell is a closed genus-0 surface") {
  const auto mesh = dumbbell(1.0, 0.3, 2.5, 24, 24);
  const auto topo = build_topology(mesh);
  REQUIRE(topo.closed);
  REQUIRE(topo.consistent_orientation);
  REQUIRE(topo.euler_characteristic(mesh.num_vertices(), mesh.num_faces()) == 2);
  REQUIRE(enclosed_volume_flat(mesh) > 0.0);
  REQUIRE_NOTHROW(validate_mesh(mesh, SpaceForm::euclidean()));
}

TEST_CASE("validate_mesh rejects broken meshes") {
  SurfaceMesh open_mesh;  // single triangle
  open_mesh.V.setZero(3, 4);
  open_mesh.V << 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0;
  open_mesh.F.resize(1, 3);
  open_mesh.F << 0, 1, 2;
  REQUIRE_THROWS_AS(validate_mesh(open_mesh, SpaceForm::euclidean()),
                    std::invalid_argument);

  auto mesh = icosphere(1);
  std::swap(mesh.F(0, 0), mesh.F(0, 1));  // break orientation consistency
  REQUIRE_THROWS_AS(validate_mesh(mesh, SpaceForm::euclidean()),
                    std::invalid_argument);

  auto off_constraint = geodesic_sphere(SpaceForm::sphere(1.0), 0.7, 2);
  off_constraint.V(5, 0) += 1e-3;
  REQUIRE_THROWS_AS(validate_mesh(off_constraint, SpaceForm::sphere(1.0)),
                    std::invalid_argument);
}

TEST_CASE("off round trip") {
  const auto mesh = icosphere(2, 0.75);
  std::stringstream ss;
  save_off(mesh, SpaceForm::euclidean(), ss);
  const auto back = load_off(ss);
  REQUIRE(back.num_vertices() == mesh.num_vertices());
  REQUIRE(back.num_faces() == mesh.num_faces());
  REQUIRE((back.V - mesh.V).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.F - mesh.F).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("4off keeps curved-chart coordinates") {
  const auto sph = SpaceForm::sphere(1.0);
  const auto mesh = geodesic_sphere(sph, 0.9, 2);
  std::stringstream ss;
  save_off(mesh, sph, ss);
  const auto back = load_off(ss);
  REQUIRE((back.V - mesh.V).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("obj input") {
  std::stringstream ss;
  ss << "# comment\n";
  ss << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n";
  ss << "f 1 2 3\nf 1 4 2\nf 2 4 3\nf 1 3 4\n";
  const auto mesh = load_obj(ss);
  REQUIRE(mesh.num_vertices() == 4);
  REQUIRE(mesh.num_faces() == 4);
  const auto topo = build_topology(mesh);
  REQUIRE(topo.closed);
}
