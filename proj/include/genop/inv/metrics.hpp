#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace genop::inv {

// |pred - truth|_2 / |truth|_2
inline double metric_rel_l2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("metric_rel_l2: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("metric_rel_l2: zero-norm truth");
  return std::sqrt(num / den);
}

// Cross-correlation indicator in its Cauchy-Schwarz-normalized form,
//   I = sum a^2 a~^2 / (sqrt(sum a^4) sqrt(sum a~^4)),
// which equals 1 exactly for identical fields and is symmetric. (The
// unnormalized denominator sqrt(sum a^2) sqrt(sum a~^2) is not 1 at a perfect
// match for two-valued fields, so the normalized variant is reported.)
inline double metric_icorr(std::span<const double> a, std::span<const double> a_rec) {
  if (a.size() != a_rec.size()) throw std::invalid_argument("metric_icorr: length mismatch");
  double num = 0.0, d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double p = a[i] * a[i], q = a_rec[i] * a_rec[i];
    num += p * q;
    d1 += p * p;
    d2 += q * q;
  }
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw std::invalid_argument("metric_icorr: zero field");
  return num / (std::sqrt(d1) * std::sqrt(d2));
}

} // namespace genop::inv
