#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mcflab/numerics.hpp"

namespace mcflab {

using Vec4 = Eigen::Vector4d;

enum class AmbientKind { Euclidean, Sphere, Hyperbolic };

inline std::string to_string(AmbientKind k) {
  switch (k) {
    case AmbientKind::Euclidean: return "euclidean";
    case AmbientKind::Sphere: return "sphere";
    case AmbientKind::Hyperbolic: return "hyperbolic";
  }
  return "?";
}

// Volume of the unit n-ball.
inline double unit_ball_volume(int n) {
  if (n < 1) throw std::invalid_argument("unit_ball_volume: n >= 1 required");
  static double cache[64] = {0};
  if (n < 64 && cache[n] != 0.0) return cache[n];
  const double v = std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
  if (n < 64) cache[n] = v;
  return v;
}

// Area of the unit (n-1)-sphere in R^n.
inline double unit_sphere_area(int n) {
  if (n < 1) throw std::invalid_argument("unit_sphere_area: n >= 1 required");
  return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

// Volume of the geodesic ball of radius R in the n-dimensional simply
// connected space form of constant curvature K. Curved cases are evaluated
// by quadrature of the sin/sinh area profile.
inline double model_ball_volume(double K, double R, int n) {
  if (!(R > 0.0)) throw std::invalid_argument("model_ball_volume: R > 0 required");
  if (n < 1) throw std::invalid_argument("model_ball_volume: n >= 1 required");
  if (K == 0.0) return unit_ball_volume(n) * std::pow(R, n);
  const double s = std::sqrt(std::abs(K));
  double upper = R;
  if (K > 0.0) upper = std::min(R, M_PI / s);  // ball saturates at the diameter
  const double area = unit_sphere_area(n);
  auto profile = [&](double r) {
    const double sn = (K > 0.0) ? std::sin(s * r) / s : std::sinh(s * r) / s;
    return std::pow(sn, n - 1);
  };
  return area * integrate_adaptive(profile, 0.0, upper, 1e-13);
}

// Constant-curvature ambient geometry. Meshes live in a flat 4d chart:
//   euclidean : (x, y, z, 0)
//   sphere    : |x|^2 = R^2 in R^4, R = 1/sqrt(K)
//   hyperbolic: x.x + y.y + z.z - w.w = -R^2, w > 0 (Minkowski chart)
// All curvature data is position independent (parallel curvature tensor holds
// by construction).
class SpaceForm {
 public:
  static SpaceForm euclidean(int ambient_dim = 3) {
    return SpaceForm(AmbientKind::Euclidean, 0.0, ambient_dim);
  }
  static SpaceForm sphere(double K, int ambient_dim = 3) {
    if (!(K > 0.0)) throw std::invalid_argument("sphere ambient requires K > 0");
    return SpaceForm(AmbientKind::Sphere, K, ambient_dim);
  }
  static SpaceForm hyperbolic(double K, int ambient_dim = 3) {
    if (!(K < 0.0)) throw std::invalid_argument("hyperbolic ambient requires K < 0");
    return SpaceForm(AmbientKind::Hyperbolic, K, ambient_dim);
  }
  static SpaceForm make(AmbientKind kind, double K, int ambient_dim = 3) {
    switch (kind) {
      case AmbientKind::Euclidean: return euclidean(ambient_dim);
      case AmbientKind::Sphere: return sphere(K, ambient_dim);
      case AmbientKind::Hyperbolic: return hyperbolic(K, ambient_dim);
    }
    throw std::invalid_argument("unknown ambient kind");
  }

  AmbientKind kind() const { return kind_; }
  double curvature() const { return K_; }
  int dim() const { return dim_; }                    // ambient dimension n+1
  int hypersurface_dim() const { return dim_ - 1; }   // n
  bool curved() const { return kind_ != AmbientKind::Euclidean; }
  // Radius of the model quadric in the chart (curved ambients only).
  double radius() const {
    if (!curved()) throw std::logic_error("radius(): flat ambient");
    return 1.0 / std::sqrt(std::abs(K_));
  }

  // Chart inner product: Euclidean/Sphere use the flat R^4 metric, the
  // hyperboloid chart uses Minkowski signature (+,+,+,-).
  double metric_sign_w() const {
    return kind_ == AmbientKind::Hyperbolic ? -1.0 : 1.0;
  }
  double dot(const Vec4& u, const Vec4& v) const {
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2] +
           metric_sign_w() * u[3] * v[3];
  }
  double norm(const Vec4& u) const { return std::sqrt(std::abs(dot(u, u))); }

  // Unit constraint normal of the chart quadric at x (the w-axis for the
  // flat chart). Timelike for the hyperboloid: dot(m, m) = -1.
  Vec4 chart_normal(const Vec4& x) const {
    require_chart();
    switch (kind_) {
      case AmbientKind::Euclidean: return Vec4(0, 0, 0, 1);
      default: return x / radius();
    }
  }
  double chart_normal_sq() const {
    return kind_ == AmbientKind::Hyperbolic ? -1.0 : 1.0;
  }

  // Projection onto the chart constraint.
  Vec4 project(const Vec4& x) const {
    require_chart();
    switch (kind_) {
      case AmbientKind::Euclidean: {
        Vec4 y = x;
        y[3] = 0.0;
        return y;
      }
      case AmbientKind::Sphere: {
        const double r = x.norm();
        if (r == 0.0) throw std::domain_error("project: zero vector on sphere chart");
        return x * (radius() / r);
      }
      case AmbientKind::Hyperbolic: {
        const double q = -dot(x, x);
        if (!(q > 0.0) || !(x[3] > 0.0)) {
          throw std::domain_error("project: point off the upper hyperboloid sheet");
        }
        return x * (radius() / std::sqrt(q));
      }
    }
    throw std::logic_error("unreachable");
  }

  double constraint_residual(const Vec4& x) const {
    if (!curved()) return std::abs(x[3]);
    const double R2 = radius() * radius();
    const double target = kind_ == AmbientKind::Sphere ? R2 : -R2;
    return std::abs(dot(x, x) - target) / R2;
  }

  // Removes the constraint-normal component: the tangential part of v at x.
  Vec4 tangent_project(const Vec4& x, const Vec4& v) const {
    const Vec4 m = chart_normal(x);
    return v - (dot(v, m) / chart_normal_sq()) * m;
  }

  // Ambient geodesic distance between chart points.
  double distance(const Vec4& x, const Vec4& y) const {
    switch (kind_) {
      case AmbientKind::Euclidean: return (x - y).head<3>().norm();
      case AmbientKind::Sphere: {
        const double R = radius();
        const double c = std::clamp(x.dot(y) / (R * R), -1.0, 1.0);
        return R * std::acos(c);
      }
      case AmbientKind::Hyperbolic: {
        const double R = radius();
        const double c = std::max(1.0, -dot(x, y) / (R * R));
        return R * std::acosh(c);
      }
    }
    throw std::logic_error("unreachable");
  }

  // Curvature components in an orthonormal adapted frame, indices 0..n:
  // R_{abcd} = K (delta_ac delta_bd - delta_ad delta_bc).
  double riem(int a, int b, int c, int d) const {
    const int n = hypersurface_dim();
    for (int idx : {a, b, c, d}) {
      if (idx < 0 || idx > n) {
        throw std::out_of_range("riem: frame index outside 0..n");
      }
    }
    auto kron = [](int i, int j) { return i == j ? 1.0 : 0.0; };
    return K_ * (kron(a, c) * kron(b, d) - kron(a, d) * kron(b, c));
  }

  // Ric(nu, nu) = sum_l R_{0l0l} = n K for the normal direction.
  double ric_normal(int n) const {
    if (n != hypersurface_dim()) {
      throw std::invalid_argument("ric_normal: n must equal ambient_dim - 1");
    }
    return n * K_;
  }

  // Upper sectional bound K_N <= b^2; second member reports whether b is a
  // pure imaginary number (flat and negatively curved ambients).
  std::pair<double, bool> sectional_bound() const {
    return {K_, kind_ != AmbientKind::Sphere};
  }

  // Ambient injectivity radius as seen by submanifolds: infinite for the two
  // simply connected nonpositively curved charts, pi/b on the sphere.
  double injectivity_radius() const {
    if (kind_ == AmbientKind::Sphere) return M_PI / std::sqrt(K_);
    return std::numeric_limits<double>::infinity();
  }

  // Parabolic bound on the |A|^2 evolution: (d/dt - Lap)|A|^2 <= 2|A|^4 + C|A|^2
  // with C = 6 n |K| collecting every ambient curvature term of the space form.
  double parabolic_ambient_constant() const {
    return 6.0 * hypersurface_dim() * std::abs(K_);
  }

 private:
  SpaceForm(AmbientKind kind, double K, int ambient_dim)
      : kind_(kind), K_(K), dim_(ambient_dim) {
    if (ambient_dim < 3) throw std::invalid_argument("ambient_dim >= 3 required");
  }

  // Chart operations (project, distance, normals) assume the 4d chart of a
  // 3-dimensional ambient; curvature formulas work for any dimension.
  void require_chart() const {
    if (curved() && dim_ != 3) {
      throw std::logic_error("chart operations require ambient_dim == 3");
    }
  }

  AmbientKind kind_;
  double K_;
  int dim_;
};

// Vector orthogonal (in the chart metric) to m, u and v, oriented so that for
// the flat chart with m = e_w it reduces to the 3d cross product u x v.
// Covariant components N_d = -eps_{abcd} m^a u^b v^c; the w index is raised
// with the chart metric. Metric-orthogonality <N, m> = <N, u> = <N, v> = 0
// holds because each pairing is a determinant with a repeated row.
inline Vec4 ambient_cross(const SpaceForm& space, const Vec4& m, const Vec4& u,
                          const Vec4& v) {
  auto minor3 = [&](int c0, int c1, int c2) {
    return m[c0] * (u[c1] * v[c2] - u[c2] * v[c1]) -
           m[c1] * (u[c0] * v[c2] - u[c2] * v[c0]) +
           m[c2] * (u[c0] * v[c1] - u[c1] * v[c0]);
  };
  Vec4 out;
  out[0] = minor3(1, 2, 3);
  out[1] = -minor3(0, 2, 3);
  out[2] = minor3(0, 1, 3);
  out[3] = -minor3(0, 1, 2) * space.metric_sign_w();
  return out;
}

}  // namespace mcflab
