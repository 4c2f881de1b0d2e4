#pragma once

#include <cmath>
#include <cstddef>

namespace genop::weak {

// Wendland C4 kernel on the scaled radius r = |x - x_j| / R,
//   phi(r) = (1-r)^6 (35 r^2 + 18 r + 3) / 3,  r < 1,
// zero outside the unit ball. phi(0)=1, phi'(0)=0, and two continuous
// derivatives everywhere, which is more regularity than the weak form needs.
// Valid as a positive-definite kernel for d <= 3.
struct WendlandC4 {
  static double value(double r) {
    if (r >= 1.0) return 0.0;
    double u = 1.0 - r;
    double u2 = u * u;
    double u6 = u2 * u2 * u2;
    return u6 * (35.0 * r * r + 18.0 * r + 3.0) / 3.0;
  }

  // d phi / d r = -56 r (5r + 1) (1-r)^5 / 3
  static double deriv(double r) {
    if (r >= 1.0) return 0.0;
    double u = 1.0 - r;
    double u2 = u * u;
    double u5 = u2 * u2 * u;
    return -56.0 * r * (5.0 * r + 1.0) * u5 / 3.0;
  }
};

struct KernelEval {
  double value;
  double radial_deriv;
};

inline KernelEval wendland_eval(double r) { return {WendlandC4::value(r), WendlandC4::deriv(r)}; }

// Weight function w_j(x) = phi(|x-c|/R) and its spatial gradient
//   grad w_j = phi'(r)/R * (x-c)/|x-c|   (zero at the center).
template <std::size_t Dim>
struct WeightAt {
  double w;
  double grad[Dim];
};

template <std::size_t Dim>
inline WeightAt<Dim> csrbf_weight(const double* x, const double* center, double radius) {
  WeightAt<Dim> out{};
  double d2 = 0.0;
  for (std::size_t k = 0; k < Dim; ++k) {
    double e = x[k] - center[k];
    out.grad[k] = e;
    d2 += e * e;
  }
  double dist = std::sqrt(d2);
  double r = dist / radius;
  out.w = WendlandC4::value(r);
  if (dist > 0.0 && r < 1.0) {
    double s = WendlandC4::deriv(r) / (radius * dist);
    for (std::size_t k = 0; k < Dim; ++k) out.grad[k] *= s;
  } else {
    for (std::size_t k = 0; k < Dim; ++k) out.grad[k] = 0.0;
  }
  return out;
}

} // namespace genop::weak
