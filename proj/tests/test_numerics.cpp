#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "mcflab/numerics.hpp"

using namespace mcflab;

TEST_CASE("kahan sum tracks small increments") {
  KahanSum s;
  for (int i = 0; i < 1000000; ++i) s.add(1e-10);
  REQUIRE(s.value() == Catch::Approx(1e-4).epsilon(1e-13));
}

TEST_CASE("time accumulator is exact for dyadic steps") {
  TimeAccumulator t;
  const double dt = std::ldexp(1.0, -60);
  for (int i = 0; i < 4096; ++i) t.add(dt);
  REQUIRE(t.to_double() == dt * 4096);
}

TEST_CASE("time accumulator stays strictly monotone below double resolution") {
  TimeAccumulator t;
  t.add(0.25);
  TimeAccumulator prev = t;
  // Increments of 1e-40 are invisible to double at 0.25 but must still order.
  for (int i = 0; i < 50; ++i) {
    t.add(1e-40);
    REQUIRE(prev < t);
    prev = t;
  }
  REQUIRE(t.to_double() == Catch::Approx(0.25));
}

TEST_CASE("time accumulator matches plain summation in the normal regime") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 1e-3);
  TimeAccumulator t;
  long double ref = 0.0L;
  for (int i = 0; i < 10000; ++i) {
    const double dt = u(rng);
    t.add(dt);
    ref += dt;
  }
  REQUIRE(t.to_double() == Catch::Approx(static_cast<double>(ref)).epsilon(1e-14));
}

TEST_CASE("time accumulator rejects bad input") {
  TimeAccumulator t;
  REQUIRE_THROWS_AS(t.add(-1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(t.add(std::nan("")), std::invalid_argument);
}

TEST_CASE("symmetric 2x2 eigenvalues") {
  auto e = sym2x2_eigenvalues(-1.0, 0.0, 3.0);
  REQUIRE(e[0] == Catch::Approx(-1.0));
  REQUIRE(e[1] == Catch::Approx(3.0));
  e = sym2x2_eigenvalues(2.0, 1.0, 2.0);
  REQUIRE(e[0] == Catch::Approx(1.0));
  REQUIRE(e[1] == Catch::Approx(3.0));
}

TEST_CASE("adaptive quadrature") {
  const double v = integrate_adaptive([](double x) { return std::sin(x); }, 0.0,
                                      M_PI, 1e-13);
  REQUIRE(v == Catch::Approx(2.0).epsilon(1e-11));
  const double w = integrate_adaptive([](double x) { return 1.0 / x; }, 1.0,
                                      std::exp(1.0), 1e-13);
  REQUIRE(w == Catch::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("smootherstep ramp") {
  REQUIRE(smootherstep(-1.0) == 0.0);
  REQUIRE(smootherstep(2.0) == 1.0);
  REQUIRE(smootherstep(0.5) == Catch::Approx(0.5));
  REQUIRE(smootherstep_deriv(0.0) == 0.0);
  REQUIRE(smootherstep_deriv(1.0) == 0.0);
}
