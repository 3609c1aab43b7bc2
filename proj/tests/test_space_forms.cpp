#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mcflab/space_form.hpp"

using namespace mcflab;

TEST_CASE("curvature components of the three space forms") {
  const auto flat = SpaceForm::euclidean();
  const auto sph = SpaceForm::sphere(1.0);
  const auto hyp = SpaceForm::hyperbolic(-1.0);

  for (int a = 0; a <= 2; ++a) {
    for (int b = 0; b <= 2; ++b) {
      for (int c = 0; c <= 2; ++c) {
        for (int d = 0; d <= 2; ++d) {
          REQUIRE(flat.riem(a, b, c, d) == 0.0);
        }
      }
    }
  }
  REQUIRE(sph.riem(0, 1, 0, 1) == Catch::Approx(1.0));
  REQUIRE(hyp.riem(0, 1, 1, 0) == Catch::Approx(1.0));
  REQUIRE_THROWS_AS(sph.riem(0, 1, 0, 3), std::out_of_range);
}

TEST_CASE("algebraic curvature symmetries hold exhaustively for n <= 3") {
  for (double K : {1.0, -1.0}) {
    for (int dim : {3, 4}) {
      const auto space = K > 0 ? SpaceForm::sphere(K, dim)
                               : SpaceForm::hyperbolic(K, dim);
      const int n = space.hypersurface_dim();
      for (int a = 0; a <= n; ++a) {
        for (int b = 0; b <= n; ++b) {
          for (int c = 0; c <= n; ++c) {
            for (int d = 0; d <= n; ++d) {
              const double r = space.riem(a, b, c, d);
              REQUIRE(r == -space.riem(b, a, c, d));
              REQUIRE(r == -space.riem(a, b, d, c));
              REQUIRE(r == space.riem(c, d, a, b));
              REQUIRE(r + space.riem(a, c, d, b) + space.riem(a, d, b, c) ==
                      Catch::Approx(0.0).margin(1e-15));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("normal Ricci curvature equals n K and the frame sum") {
  REQUIRE(SpaceForm::euclidean().ric_normal(2) == 0.0);
  REQUIRE(SpaceForm::sphere(1.0).ric_normal(2) == Catch::Approx(2.0));
  REQUIRE(SpaceForm::hyperbolic(-1.0, 4).ric_normal(3) == Catch::Approx(-3.0));

  for (double K : {0.0, 1.0, -0.5}) {
    const auto space = K == 0.0 ? SpaceForm::euclidean()
                                : (K > 0 ? SpaceForm::sphere(K)
                                         : SpaceForm::hyperbolic(K));
    double sum = 0.0;
    for (int l = 1; l <= 2; ++l) sum += space.riem(0, l, 0, l);
    REQUIRE(space.ric_normal(2) == Catch::Approx(sum));
  }
  REQUIRE_THROWS_AS(SpaceForm::sphere(1.0).ric_normal(3), std::invalid_argument);
}

TEST_CASE("sectional bound follows the sign conventions") {
  auto [b2e, ime] = SpaceForm::euclidean().sectional_bound();
  REQUIRE(b2e == 0.0);
  REQUIRE(ime);
  auto [b2s, ims] = SpaceForm::sphere(1.0).sectional_bound();
  REQUIRE(b2s == 1.0);
  REQUIRE_FALSE(ims);
  auto [b2h, imh] = SpaceForm::hyperbolic(-1.0).sectional_bound();
  REQUIRE(b2h == -1.0);
  REQUIRE(imh);
}

TEST_CASE("model ball volumes") {
  REQUIRE(model_ball_volume(0.0, 1.0, 2) == Catch::Approx(M_PI).epsilon(1e-12));
  REQUIRE(model_ball_volume(0.0, 2.0, 3) ==
          Catch::Approx(4.0 / 3.0 * M_PI * 8.0).epsilon(1e-12));
  REQUIRE(model_ball_volume(-1.0, 1.0, 2) ==
          Catch::Approx(2.0 * M_PI * (std::cosh(1.0) - 1.0)).epsilon(1e-10));
  REQUIRE_THROWS_AS(model_ball_volume(0.0, -1.0, 2), std::invalid_argument);
}

TEST_CASE("model ball volume is monotone in radius and curvature relaxation") {
  for (int n : {2, 3}) {
    double prev = 0.0;
    for (double R : {0.25, 0.5, 1.0, 1.5, 2.0}) {
      const double v = model_ball_volume(0.5, R, n);
      REQUIRE(v > prev);
      prev = v;
    }
    for (double R : {0.5, 1.0, 2.0}) {
      double prev_k = 0.0;
      for (double K : {1.0, 0.5, 0.0, -0.5, -1.0}) {  // decreasing K
        const double v = model_ball_volume(K, R, n);
        REQUIRE(v >= prev_k - 1e-12);
        prev_k = v;
      }
    }
  }
}

TEST_CASE("chart projections and tangent algebra") {
  const auto sph = SpaceForm::sphere(1.0);
  const Vec4 p = sph.project(Vec4(0.3, -0.2, 0.4, 0.7));
  REQUIRE(sph.constraint_residual(p) < 1e-14);
  const Vec4 v = sph.tangent_project(p, Vec4(1.0, 2.0, -1.0, 0.5));
  REQUIRE(std::abs(sph.dot(v, sph.chart_normal(p))) < 1e-13);

  const auto hyp = SpaceForm::hyperbolic(-1.0);
  const Vec4 q = hyp.project(Vec4(0.3, -0.2, 0.4, 1.5));
  REQUIRE(hyp.constraint_residual(q) < 1e-14);
  const Vec4 m = hyp.chart_normal(q);
  REQUIRE(hyp.dot(m, m) == Catch::Approx(-1.0).epsilon(1e-12));
  const Vec4 w = hyp.tangent_project(q, Vec4(0.1, 0.7, -0.3, 0.2));
  REQUIRE(std::abs(hyp.dot(w, m)) < 1e-13);
  // tangent vectors on the upper sheet are spacelike
  REQUIRE(hyp.dot(w, w) > 0.0);
}

TEST_CASE("ambient cross product reduces to the 3d cross in the flat chart") {
  const auto flat = SpaceForm::euclidean();
  const Vec4 m(0, 0, 0, 1);
  const Vec4 u(1, 0, 0, 0), v(0, 1, 0, 0);
  const Vec4 n = ambient_cross(flat, m, u, v);
  REQUIRE(n[0] == 0.0);
  REQUIRE(n[1] == 0.0);
  REQUIRE(n[2] == Catch::Approx(1.0));
  REQUIRE(n[3] == 0.0);
}

TEST_CASE("ambient cross is metric-orthogonal to its inputs") {
  const auto hyp = SpaceForm::hyperbolic(-1.0);
  const Vec4 q = hyp.project(Vec4(0.4, 0.1, -0.2, 1.2));
  const Vec4 m = hyp.chart_normal(q);
  Vec4 u = hyp.tangent_project(q, Vec4(1, 0, 0, 0));
  Vec4 v = hyp.tangent_project(q, Vec4(0, 1, 0.3, 0));
  const Vec4 n = ambient_cross(hyp, m, u, v);
  REQUIRE(std::abs(hyp.dot(n, m)) < 1e-12);
  REQUIRE(std::abs(hyp.dot(n, u)) < 1e-12);
  REQUIRE(std::abs(hyp.dot(n, v)) < 1e-12);
  REQUIRE(hyp.dot(n, n) > 0.0);  // spacelike normal
}

TEST_CASE("ambient distances") {
  const auto flat = SpaceForm::euclidean();
  REQUIRE(flat.distance(Vec4(1, 0, 0, 0), Vec4(0, 1, 0, 0)) ==
          Catch::Approx(std::sqrt(2.0)));
  const auto sph = SpaceForm::sphere(1.0);
  REQUIRE(sph.distance(Vec4(1, 0, 0, 0), Vec4(0, 1, 0, 0)) ==
          Catch::Approx(M_PI / 2.0));
  const auto hyp = SpaceForm::hyperbolic(-1.0);
  const Vec4 a(0, 0, 0, 1);
  const double rho = 0.8;
  const Vec4 b(std::sinh(rho), 0, 0, std::cosh(rho));
  REQUIRE(hyp.distance(a, b) == Catch::Approx(rho).epsilon(1e-12));
}

TEST_CASE("ambient parabolic constant and injectivity radius") {
  REQUIRE(SpaceForm::euclidean().parabolic_ambient_constant() == 0.0);
  REQUIRE(SpaceForm::sphere(1.0).parabolic_ambient_constant() ==
          Catch::Approx(12.0));
  REQUIRE(std::isinf(SpaceForm::euclidean().injectivity_radius()));
  REQUIRE(SpaceForm::sphere(4.0).injectivity_radius() ==
          Catch::Approx(M_PI / 2.0));
}

TEST_CASE("constructor guards") {
  REQUIRE_THROWS_AS(SpaceForm::sphere(-1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(SpaceForm::hyperbolic(1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(SpaceForm::euclidean(2), std::invalid_argument);
}
