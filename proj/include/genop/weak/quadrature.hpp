#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace genop::weak {

// Gauss-Legendre nodes/weights on [-1,1], Newton iteration on the recurrence.
inline void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  std::size_t m = (n + 1) / 2;
  for (std::size_t i = 1; i <= m; ++i) {
    double z = std::cos(M_PI * (static_cast<double>(i) - 0.25) /
                        (static_cast<double>(n) + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / static_cast<double>(j);
      }
      pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) < 1e-15) break;
    }
    nodes[i - 1] = -z;
    nodes[n - i] = z;
    weights[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
    weights[n - i] = weights[i - 1];
  }
}

// Quadrature over the closed unit ball. Nodes are unit-ball coordinates; the
// weights sum to the unit-ball volume (2 in 1-D, pi in 2-D). 2-D uses a
// Gauss-Legendre radial rule times equispaced angles, which integrates odd
// integrands about the center exactly; 1-D is Gauss-Legendre on [-1,1].
struct BallQuadrature {
  std::size_t dim = 2;
  std::vector<double> nodes;    // dim-interleaved, size = dim * count()
  std::vector<double> weights;  // size = count()

  std::size_t count() const { return weights.size(); }
  const double* node(std::size_t i) const { return &nodes[i * dim]; }

  static double unit_ball_volume(std::size_t dim) {
    switch (dim) {
      case 1: return 2.0;
      case 2: return M_PI;
      case 3: return 4.0 * M_PI / 3.0;
      default: throw std::invalid_argument("unit_ball_volume: dim must be 1..3");
    }
  }

  static BallQuadrature interval(std::size_t n) {
    BallQuadrature q;
    q.dim = 1;
    gauss_legendre(n, q.nodes, q.weights);
    return q;
  }

  static BallQuadrature disk(std::size_t n_rho, std::size_t n_theta) {
    if (n_rho == 0 || n_theta < 2)
      throw std::invalid_argument("disk rule: need n_rho >= 1, n_theta >= 2");
    std::vector<double> rn, rw;
    gauss_legendre(n_rho, rn, rw);
    BallQuadrature q;
    q.dim = 2;
    double wtheta = 2.0 * M_PI / static_cast<double>(n_theta);
    for (std::size_t i = 0; i < n_rho; ++i) {
      double rho = 0.5 * (rn[i] + 1.0);   // map [-1,1] -> [0,1]
      double wrho = 0.5 * rw[i];
      for (std::size_t m = 0; m < n_theta; ++m) {
        double th = wtheta * static_cast<double>(m);
        q.nodes.push_back(rho * std::cos(th));
        q.nodes.push_back(rho * std::sin(th));
        q.weights.push_back(wrho * rho * wtheta);  // polar Jacobian
      }
    }
    return q;
  }

  // Square-ish factorization of n_int for the disk rule (25 -> 5x5, 10 -> 2x5).
  static BallQuadrature for_dim(std::size_t dim, std::size_t n_int) {
    if (dim == 1) return interval(n_int);
    if (dim == 2) {
      std::size_t n_rho = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_int))));
      while (n_rho > 1 && n_int % n_rho != 0) --n_rho;
      std::size_t n_theta = n_int / n_rho;
      if (n_theta < 2) { n_rho = 1; n_theta = n_int; }
      if (n_theta < 2) throw std::invalid_argument("disk rule: n_int too small");
      return disk(n_rho, n_theta);
    }
    throw std::invalid_argument("BallQuadrature: dim must be 1 or 2");
  }
};

// Ball average (1/|B|) * integral over B(center,R) of f, via the unit-ball rule:
//   (1/V_d) * sum_i w_i f(center + R*xi_i).
template <std::size_t Dim, typename F>
inline double quad_ball_avg(F&& f, const double* center, double radius, const BallQuadrature& q) {
  if (q.dim != Dim) throw std::invalid_argument("quad_ball_avg: dimension mismatch");
  double acc = 0.0;
  double x[Dim];
  for (std::size_t i = 0; i < q.count(); ++i) {
    const double* xi = q.node(i);
    for (std::size_t k = 0; k < Dim; ++k) x[k] = center[k] + radius * xi[k];
    double v = f(x);
    if (!std::isfinite(v)) throw std::runtime_error("quad_ball_avg: non-finite integrand");
    acc += q.weights[i] * v;
  }
  return acc / BallQuadrature::unit_ball_volume(Dim);
}

// Plain integral over the physical ball (volume-scaled ball average).
template <std::size_t Dim, typename F>
inline double quad_ball(F&& f, const double* center, double radius, const BallQuadrature& q) {
  double vol = BallQuadrature::unit_ball_volume(Dim) * std::pow(radius, static_cast<double>(Dim));
  return quad_ball_avg<Dim>(std::forward<F>(f), center, radius, q) * vol;
}

} // namespace genop::weak
