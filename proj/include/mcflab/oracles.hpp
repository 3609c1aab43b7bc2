#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcflab/flow.hpp"
#include "mcflab/numerics.hpp"
#include "mcflab/space_form.hpp"

namespace mcflab {

enum class SolutionKind {
  EuclideanSphere,
  SphericalGeodesicSphere,
  HyperbolicGeodesicSphere
};

// Umbilic shrinking-sphere solutions of the flow in the three space forms.
// All evaluators are defined on [0, T_exact).
class ExactSolution {
 public:
  SolutionKind kind;
  int n = 2;
  double K = 0.0;
  double initial_radius = 1.0;  // r0, or geodesic rho0 on curved ambients
  double T_exact = 0.0;

  // geodesic radius at time t
  double radius(double t) const {
    check_t(t);
    switch (kind) {
      case SolutionKind::EuclideanSphere:
        return std::sqrt(initial_radius * initial_radius - 2.0 * n * t);
      case SolutionKind::SphericalGeodesicSphere: {
        const double s = std::sqrt(K);
        const double c = std::cos(s * initial_radius) * std::exp(n * K * t);
        return std::acos(std::min(1.0, c)) / s;
      }
      case SolutionKind::HyperbolicGeodesicSphere: {
        const double s = std::sqrt(-K);
        const double c = std::cosh(s * initial_radius) * std::exp(n * K * t);
        return std::acosh(std::max(1.0, c)) / s;
      }
    }
    throw std::logic_error("unreachable");
  }

  // common principal curvature (umbilic)
  double principal_curvature(double t) const {
    const double rho = radius(t);
    switch (kind) {
      case SolutionKind::EuclideanSphere:
        return 1.0 / rho;
      case SolutionKind::SphericalGeodesicSphere: {
        const double s = std::sqrt(K);
        return s / std::tan(s * rho);
      }
      case SolutionKind::HyperbolicGeodesicSphere: {
        const double s = std::sqrt(-K);
        return s / std::tanh(s * rho);
      }
    }
    throw std::logic_error("unreachable");
  }

  double H(double t) const { return n * principal_curvature(t); }
  double A2(double t) const {
    const double k = principal_curvature(t);
    return n * k * k;
  }
  double area(double t) const {
    const double rho = radius(t);
    double sn = rho;
    if (kind == SolutionKind::SphericalGeodesicSphere) {
      const double s = std::sqrt(K);
      sn = std::sin(s * rho) / s;
    } else if (kind == SolutionKind::HyperbolicGeodesicSphere) {
      const double s = std::sqrt(-K);
      sn = std::sinh(s * rho) / s;
    }
    return unit_sphere_area(n + 1) * std::pow(sn, n);
  }

 private:
  void check_t(double t) const {
    if (!(t >= 0.0) || !(t < T_exact)) {
      throw std::domain_error("ExactSolution: t outside [0, T)");
    }
  }
};

inline ExactSolution euclidean_sphere(double r0, int n) {
  if (!(r0 > 0.0)) throw std::invalid_argument("euclidean_sphere: r0 > 0");
  ExactSolution sol;
  sol.kind = SolutionKind::EuclideanSphere;
  sol.n = n;
  sol.K = 0.0;
  sol.initial_radius = r0;
  sol.T_exact = r0 * r0 / (2.0 * n);
  return sol;
}

inline ExactSolution spaceform_geodesic_sphere(double K, double rho0, int n) {
  if (K == 0.0) return euclidean_sphere(rho0, n);
  ExactSolution sol;
  sol.n = n;
  sol.K = K;
  sol.initial_radius = rho0;
  if (K > 0.0) {
    const double s = std::sqrt(K);
    if (!(rho0 > 0.0) || !(rho0 < 0.5 * M_PI / s)) {
      throw std::invalid_argument("geodesic sphere: need 0 < rho0 < pi/(2 sqrt(K))");
    }
    sol.kind = SolutionKind::SphericalGeodesicSphere;
    sol.T_exact = std::log(1.0 / std::cos(s * rho0)) / (n * K);
  } else {
    if (!(rho0 > 0.0)) throw std::invalid_argument("geodesic sphere: rho0 > 0");
    const double s = std::sqrt(-K);
    sol.kind = SolutionKind::HyperbolicGeodesicSphere;
    sol.T_exact = std::log(std::cosh(s * rho0)) / (n * (-K));
  }
  return sol;
}

// Space-time integrals on exact solutions, reduced to 1-d integrals in time
// through the spatially constant curvature.
struct OracleQuantity {
  enum class Type { APow, Subcritical, HPow };
  Type type = Type::APow;
  double alpha = 4.0;
  double a = 1.0;
  double b = 1.0;

  static OracleQuantity A_pow(double alpha) {
    OracleQuantity q;
    q.type = Type::APow;
    q.alpha = alpha;
    return q;
  }
  static OracleQuantity H_pow(double alpha) {
    OracleQuantity q;
    q.type = Type::HPow;
    q.alpha = alpha;
    return q;
  }
  static OracleQuantity subcritical(double a, double b) {
    if (a < 1.0 || b < 1.0) {
      throw std::invalid_argument("subcritical oracle: a >= 1, b >= 1");
    }
    OracleQuantity q;
    q.type = Type::Subcritical;
    q.a = a;
    q.b = b;
    return q;
  }
};

inline double oracle_integrand(const ExactSolution& sol,
                               const OracleQuantity& q, double s) {
  const double absA = std::sqrt(sol.A2(s));
  const double area = sol.area(s);
  switch (q.type) {
    case OracleQuantity::Type::APow:
      return std::pow(absA, q.alpha) * area;
    case OracleQuantity::Type::HPow:
      return std::pow(std::abs(sol.H(s)), q.alpha) * area;
    case OracleQuantity::Type::Subcritical:
      return std::pow(absA, sol.n + 2) /
             std::log(q.a + std::pow(absA, q.b)) * area;
  }
  throw std::logic_error("unreachable");
}

inline double oracle_integral_quadrature(const ExactSolution& sol,
                                         const OracleQuantity& q, double t,
                                         double tol = 1e-10) {
  if (!(t >= 0.0) || !(t < sol.T_exact)) {
    throw std::domain_error("oracle_integral: t outside [0, T)");
  }
  if (t == 0.0) return 0.0;
  return integrate_adaptive([&](double s) { return oracle_integrand(sol, q, s); },
                            0.0, t, tol);
}

// Closed forms exist on the flat ambient for the pure powers:
// int |A|^alpha area dt = n^{alpha/2} sigma_n * int r^{n-alpha} dt with
// int r^{n-alpha} dt = (r0^m - r^m)/(m n) for m = n - alpha + 2 (log for m=0).
inline double oracle_integral(const ExactSolution& sol, const OracleQuantity& q,
                              double t, double tol = 1e-10) {
  if (!(t >= 0.0) || !(t < sol.T_exact)) {
    throw std::domain_error("oracle_integral: t outside [0, T)");
  }
  if (t == 0.0) return 0.0;
  if (sol.kind == SolutionKind::EuclideanSphere &&
      q.type != OracleQuantity::Type::Subcritical) {
    const int n = sol.n;
    const double alpha = q.alpha;
    const double base = q.type == OracleQuantity::Type::APow
                            ? std::pow(double(n), 0.5 * alpha)
                            : std::pow(double(n), alpha);
    const double C = base * unit_sphere_area(n + 1);
    const double r0 = sol.initial_radius;
    const double r = sol.radius(t);
    const double m = n - alpha + 2.0;
    if (std::abs(m) < 1e-12) {
      return C * std::log(r0 / r) / n;
    }
    return C * (std::pow(r0, m) - std::pow(r, m)) / (m * n);
  }
  return oracle_integral_quadrature(sol, q, t, tol);
}

// ---------------------------------------------------------------------------
// Run-versus-oracle comparison
// ---------------------------------------------------------------------------

struct CompareReport {
  double radius_max_rel_err = 0.0;
  double supA_max_rel_err = 0.0;
  std::vector<double> acc_A_rel_err;   // per ledger alpha entry
  std::vector<double> sub_rel_err;     // per ledger (a,b) entry
  double T_est_rel_err = std::numeric_limits<double>::quiet_NaN();
  double t_overlap_end = 0.0;
};

// Geodesic radius inferred from the mesh area (the area of a geodesic sphere
// is monotone in rho below the injectivity radius).
inline double radius_from_area(const ExactSolution& sol, double area) {
  const double sn = std::pow(area / unit_sphere_area(sol.n + 1), 1.0 / sol.n);
  switch (sol.kind) {
    case SolutionKind::EuclideanSphere:
      return sn;
    case SolutionKind::SphericalGeodesicSphere: {
      const double s = std::sqrt(sol.K);
      return std::asin(std::min(1.0, s * sn)) / s;
    }
    case SolutionKind::HyperbolicGeodesicSphere: {
      const double s = std::sqrt(-sol.K);
      return std::asinh(s * sn) / s;
    }
  }
  throw std::logic_error("unreachable");
}

inline CompareReport compare(const FlowRun& run, const ExactSolution& sol,
                             double window_fraction = 0.999) {
  const bool ambient_matches =
      (sol.kind == SolutionKind::EuclideanSphere &&
       run.ambient == AmbientKind::Euclidean) ||
      (sol.kind == SolutionKind::SphericalGeodesicSphere &&
       run.ambient == AmbientKind::Sphere) ||
      (sol.kind == SolutionKind::HyperbolicGeodesicSphere &&
       run.ambient == AmbientKind::Hyperbolic);
  if (!ambient_matches || run.n != sol.n) {
    throw std::invalid_argument("compare: run and solution are incompatible");
  }
  CompareReport rep;
  rep.t_overlap_end = std::min(run.t_end(), window_fraction * sol.T_exact);
  rep.acc_A_rel_err.assign(run.ledger.alpha_list.size(), 0.0);
  rep.sub_rel_err.assign(run.ledger.subcritical.size(), 0.0);

  for (const auto& snap : run.snaps) {
    if (snap.t > rep.t_overlap_end) break;
    const double rho_exact = sol.radius(snap.t);
    const double rho_run = radius_from_area(sol, snap.area);
    rep.radius_max_rel_err =
        std::max(rep.radius_max_rel_err,
                 std::abs(rho_run - rho_exact) / std::abs(rho_exact));
    const double supA_exact = std::sqrt(sol.A2(snap.t));
    rep.supA_max_rel_err =
        std::max(rep.supA_max_rel_err,
                 std::abs(snap.sup_A - supA_exact) / supA_exact);
    if (snap.t > 0.0) {
      for (size_t i = 0; i < run.ledger.alpha_list.size(); ++i) {
        const double ref = oracle_integral(
            sol, OracleQuantity::A_pow(run.ledger.alpha_list[i]), snap.t);
        if (ref > 0.0) {
          rep.acc_A_rel_err[i] = std::max(
              rep.acc_A_rel_err[i], std::abs(snap.acc_A_alpha[i] - ref) / ref);
        }
      }
      for (size_t i = 0; i < run.ledger.subcritical.size(); ++i) {
        const auto [a, b] = run.ledger.subcritical[i];
        const double ref =
            oracle_integral(sol, OracleQuantity::subcritical(a, b), snap.t);
        if (ref > 0.0 && !std::isnan(snap.acc_sub_ab[i])) {
          rep.sub_rel_err[i] = std::max(
              rep.sub_rel_err[i], std::abs(snap.acc_sub_ab[i] - ref) / ref);
        }
      }
    }
  }
  if (std::isfinite(run.T_est)) {
    rep.T_est_rel_err = std::abs(run.T_est - sol.T_exact) / sol.T_exact;
  }
  return rep;
}

// CSV table of the solution curves and running integrals, for the CLI.
inline std::string oracle_table_csv(const ExactSolution& sol, int samples) {
  std::string out =
      "# exact solution curves; t, radius, H, A2, area, accA_n2, accA_n3, "
      "acc_subcritical_a1_b1\n";
  char buf[256];
  const auto q1 = OracleQuantity::A_pow(sol.n + 2);
  const auto q2 = OracleQuantity::A_pow(sol.n + 3);
  const auto q3 = OracleQuantity::subcritical(1.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    const double t = sol.T_exact * (static_cast<double>(i) / samples) * 0.999;
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t,
                  sol.radius(t), sol.H(t), sol.A2(t), sol.area(t),
                  oracle_integral(sol, q1, t), oracle_integral(sol, q2, t),
                  oracle_integral(sol, q3, t));
    out += buf;
  }
  return out;
}

}  // namespace mcflab
