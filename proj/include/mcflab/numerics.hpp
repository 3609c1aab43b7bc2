#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>

namespace mcflab {

// Compensated (Neumaier) summation. Used for all long-running accumulations
// so that ledger integrals stay monotone and reproducible.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Exact fixed-point accumulator for flow time t = sum of positive dt.
//
// Near a curvature blow-up the adaptive step collapses geometrically
// (dt ~ min_edge^2 ~ (T - t)) and a plain double freezes at t + dt == t long
// before the integral ledgers stop gaining information. Time is therefore
// accumulated in 256-bit fixed point with resolution 2^-192, which keeps
// snapshot times strictly increasing for every dt >= ~1e-57.
class TimeAccumulator {
 public:
  TimeAccumulator() : limbs_{0, 0, 0, 0} {}

  // Adds dt >= 0. Contributions below the resolution are truncated, never
  // negative-rounded, so the accumulator is exactly monotone.
  void add(double dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
      throw std::invalid_argument("TimeAccumulator: dt must be finite and >= 0");
    }
    if (dt == 0.0) return;
    int exp = 0;
    const double m = std::frexp(dt, &exp);  // dt = m * 2^exp, m in [0.5, 1)
    std::uint64_t mant = static_cast<std::uint64_t>(std::ldexp(m, 53));
    // Bit position of the mantissa's least significant bit relative to 2^-192.
    long long shift = static_cast<long long>(exp) - 53 + kFracBits;
    if (shift < 0) {
      if (shift <= -53) return;  // entirely below resolution
      mant >>= static_cast<unsigned>(-shift);
      shift = 0;
      if (mant == 0) return;
    }
    const unsigned limb = static_cast<unsigned>(shift / 64);
    const unsigned off = static_cast<unsigned>(shift % 64);
    if (limb >= 4) throw std::overflow_error("TimeAccumulator overflow");
    add_at(limb, off == 0 ? mant : (mant << off));
    if (off != 0 && limb + 1 < 4) {
      const std::uint64_t hi = mant >> (64 - off);
      if (hi) add_at(limb + 1, hi);
    } else if (off != 0 && (mant >> (64 - off)) != 0) {
      throw std::overflow_error("TimeAccumulator overflow");
    }
  }

  double to_double() const {
    double v = 0.0;
    for (int i = 3; i >= 0; --i) {
      v += std::ldexp(static_cast<double>(limbs_[i]), 64 * i - kFracBits);
    }
    return v;
  }

  bool operator<(const TimeAccumulator& o) const {
    for (int i = 3; i >= 0; --i) {
      if (limbs_[i] != o.limbs_[i]) return limbs_[i] < o.limbs_[i];
    }
    return false;
  }
  bool operator==(const TimeAccumulator& o) const { return limbs_ == o.limbs_; }

  std::array<std::uint64_t, 4> limbs() const { return limbs_; }

 private:
  static constexpr int kFracBits = 192;

  void add_at(unsigned limb, std::uint64_t v) {
    for (unsigned i = limb; i < 4 && v != 0; ++i) {
      const std::uint64_t old = limbs_[i];
      limbs_[i] = old + v;
      v = (limbs_[i] < old) ? 1 : 0;  // carry
    }
    if (v != 0) throw std::overflow_error("TimeAccumulator overflow");
  }

  std::array<std::uint64_t, 4> limbs_;
};

// Eigenvalues of the symmetric 2x2 matrix [[a, b], [b, c]], ascending.
inline std::array<double, 2> sym2x2_eigenvalues(double a, double b, double c) {
  const double mean = 0.5 * (a + c);
  const double disc = std::hypot(0.5 * (a - c), b);
  return {mean - disc, mean + disc};
}

// Adaptive Simpson quadrature on [a, b].
namespace detail {
inline double simpson_rec(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f,
                                 double a, double b, double tol = 1e-12,
                                 int max_depth = 48) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// C2 ramp: 0 at u<=0, 1 at u>=1 (quintic smootherstep).
inline double smootherstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
inline double smootherstep_deriv(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

inline bool approx_rel(double a, double b, double rel_tol,
                       double abs_floor = 1e-300) {
  return std::abs(a - b) <= rel_tol * std::max({std::abs(a), std::abs(b),
                                               abs_floor});
}

// pow with a fast path for small integer exponents (ledger hot loop).
inline double pow_fast(double x, double e) {
  const int ie = static_cast<int>(e);
  if (e == ie && ie >= 0 && ie <= 16) {
    double r = 1.0, base = x;
    int k = ie;
    while (k) {
      if (k & 1) r *= base;
      base *= base;
      k >>= 1;
    }
    return r;
  }
  return std::pow(x, e);
}

}  // namespace mcflab
