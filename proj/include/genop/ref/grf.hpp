#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genop/core/rng.hpp"
#include "genop/core/tensor.hpp"

namespace genop::ref {

// Values of a scalar field on a rectilinear grid (or a single axis).
struct GridField {
  std::vector<std::vector<double>> axes;  // axis coordinates, outer index first
  std::vector<double> values;             // row-major over axes

  std::size_t dim() const { return axes.size(); }
  std::size_t n(std::size_t k) const { return axes[k].size(); }
  std::size_t size() const { return values.size(); }

  double& at(std::size_t i, std::size_t j) { return values[i * n(1) + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n(1) + j]; }

  void validate() const {
    std::size_t c = 1;
    for (const auto& a : axes) c *= a.size();
    if (c != values.size()) throw std::invalid_argument("GridField: size mismatch");
  }

  static std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
  }

  // Bilinear (2-D) / linear (1-D) interpolation, clamped to the grid box.
  double interp(const double* x) const {
    if (dim() == 1) {
      auto [i, t] = locate(axes[0], x[0]);
      return (1.0 - t) * values[i] + t * values[i + 1];
    }
    auto [i, tx] = locate(axes[0], x[0]);
    auto [j, ty] = locate(axes[1], x[1]);
    double v00 = at(i, j), v01 = at(i, j + 1), v10 = at(i + 1, j), v11 = at(i + 1, j + 1);
    return (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11);
  }

 private:
  static std::pair<std::size_t, double> locate(const std::vector<double>& ax, double x) {
    std::size_t n = ax.size();
    if (x <= ax.front()) return {0, 0.0};
    if (x >= ax.back()) return {n - 2, 1.0};
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      std::size_t mid = (lo + hi) / 2;
      if (ax[mid] <= x) lo = mid; else hi = mid;
    }
    double t = (x - ax[lo]) / (ax[lo + 1] - ax[lo]);
    return {lo, t};
  }
};

// Gaussian random field with covariance c^2 (-Laplacian + tau^2 I)^-power,
// synthesized in a Laplacian eigenbasis. Cosine (Neumann) modes on [0,1]^2 for
// coefficient fields; sine (Dirichlet) modes on [-1,1] so sampled initial
// conditions vanish at the boundary.
struct GrfSpec {
  enum class Basis { Cosine2d, Sine1d };
  Basis basis = Basis::Cosine2d;
  double tau2 = 9.0;
  double power = 2.0;
  double amplitude = 1.0;
  std::size_t modes = 16;  // per axis (Cosine2d: k in 0..modes-1; Sine1d: 1..modes)
  double mean = 0.0;
  bool cutoff = false;
  double cutoff_hi = 10.0, cutoff_lo = 5.0;

  void validate() const {
    if (modes < 1) throw std::invalid_argument("GrfSpec: needs at least one mode");
    if (power <= 0.0 || tau2 <= 0.0) throw std::invalid_argument("GrfSpec: bad covariance");
  }
};

// One spectral draw; evaluable at arbitrary points, which keeps sensor values
// and reference-solver grids consistent with the same underlying field.
struct GrfDraw {
  GrfSpec spec;
  std::vector<double> xi;  // i.i.d. standard normals, fixed mode order

  // raw (pre-cutoff) field value
  double raw(const double* x) const {
    double acc = spec.mean;
    if (spec.basis == GrfSpec::Basis::Cosine2d) {
      std::size_t idx = 0;
      for (std::size_t k1 = 0; k1 < spec.modes; ++k1)
        for (std::size_t k2 = 0; k2 < spec.modes; ++k2, ++idx) {
          double eig = M_PI * M_PI * static_cast<double>(k1 * k1 + k2 * k2);
          double lam = std::pow(eig + spec.tau2, -spec.power);
          double c1 = k1 == 0 ? 1.0 : std::sqrt(2.0);
          double c2 = k2 == 0 ? 1.0 : std::sqrt(2.0);
          double phi = c1 * std::cos(static_cast<double>(k1) * M_PI * x[0]) * c2 *
                       std::cos(static_cast<double>(k2) * M_PI * x[1]);
          acc += spec.amplitude * std::sqrt(lam) * xi[idx] * phi;
        }
    } else {
      for (std::size_t k = 1; k <= spec.modes; ++k) {
        double eig = 0.25 * M_PI * M_PI * static_cast<double>(k * k);
        double lam = std::pow(eig + spec.tau2, -spec.power);
        double phi = std::sin(static_cast<double>(k) * M_PI * 0.5 * (x[0] + 1.0));
        acc += spec.amplitude * std::sqrt(lam) * xi[k - 1] * phi;
      }
    }
    return acc;
  }

  double value(const double* x) const {
    double v = raw(x);
    if (spec.cutoff) return v > 0.0 ? spec.cutoff_hi : spec.cutoff_lo;
    return v;
  }
};

inline GrfDraw grf_draw(const GrfSpec& spec, Rng& rng) {
  spec.validate();
  GrfDraw d;
  d.spec = spec;
  std::size_t count = spec.basis == GrfSpec::Basis::Cosine2d ? spec.modes * spec.modes : spec.modes;
  d.xi.resize(count);
  for (double& v : d.xi) v = rng.normal();
  return d;
}

inline GridField grf_on_grid(const GrfDraw& draw, std::vector<std::vector<double>> axes) {
  GridField f;
  f.axes = std::move(axes);
  if (f.dim() == 1) {
    f.values.resize(f.n(0));
    for (std::size_t i = 0; i < f.n(0); ++i) {
      double x[2] = {f.axes[0][i], 0.0};
      f.values[i] = draw.value(x);
    }
  } else {
    f.values.resize(f.n(0) * f.n(1));
    for (std::size_t i = 0; i < f.n(0); ++i)
      for (std::size_t j = 0; j < f.n(1); ++j) {
        double x[2] = {f.axes[0][i], f.axes[1][j]};
        f.at(i, j) = draw.value(x);
      }
  }
  return f;
}

inline GridField sample_grf(const GrfSpec& spec, std::vector<std::vector<double>> axes, Rng& rng) {
  return grf_on_grid(grf_draw(spec, rng), std::move(axes));
}

// Truncated spectral sum for the pointwise variance of the (pre-cutoff) field.
inline double grf_variance(const GrfSpec& spec, const double* x) {
  double acc = 0.0;
  if (spec.basis == GrfSpec::Basis::Cosine2d) {
    for (std::size_t k1 = 0; k1 < spec.modes; ++k1)
      for (std::size_t k2 = 0; k2 < spec.modes; ++k2) {
        double eig = M_PI * M_PI * static_cast<double>(k1 * k1 + k2 * k2);
        double lam = std::pow(eig + spec.tau2, -spec.power);
        double c1 = k1 == 0 ? 1.0 : std::sqrt(2.0);
        double c2 = k2 == 0 ? 1.0 : std::sqrt(2.0);
        double phi = c1 * std::cos(static_cast<double>(k1) * M_PI * x[0]) * c2 *
                     std::cos(static_cast<double>(k2) * M_PI * x[1]);
        acc += lam * phi * phi;
      }
  } else {
    for (std::size_t k = 1; k <= spec.modes; ++k) {
      double eig = 0.25 * M_PI * M_PI * static_cast<double>(k * k);
      double lam = std::pow(eig + spec.tau2, -spec.power);
      double phi = std::sin(static_cast<double>(k) * M_PI * 0.5 * (x[0] + 1.0));
      acc += lam * phi * phi;
    }
  }
  return spec.amplitude * spec.amplitude * acc;
}

// a(x) = 2.1 + sin(k1 x1) + cos(k2 x2); bounded below by 0.1.
inline GridField sample_continuous_a(double k1, double k2,
                                     std::vector<std::vector<double>> axes) {
  GridField f;
  f.axes = std::move(axes);
  f.values.resize(f.n(0) * f.n(1));
  for (std::size_t i = 0; i < f.n(0); ++i)
    for (std::size_t j = 0; j < f.n(1); ++j)
      f.at(i, j) = 2.1 + std::sin(k1 * f.axes[0][i]) + std::cos(k2 * f.axes[1][j]);
  return f;
}

inline double continuous_a_value(double k1, double k2, double x1, double x2) {
  return 2.1 + std::sin(k1 * x1) + std::cos(k2 * x2);
}

} // namespace genop::ref
