#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "genop/core/rng.hpp"
#include "genop/core/tensor.hpp"
#include "genop/ref/grf.hpp"

namespace genop::inv {

struct Observations {
  Tensor points;               // [K, dim]
  std::vector<double> values;  // K
  double snr_db = std::numeric_limits<double>::infinity();
  double sigma = 0.0;

  std::size_t count() const { return values.size(); }
};

// Additive i.i.d. Gaussian noise with sigma^2 = mean(u^2) * 10^(-snr/10).
// snr_db = +inf means a clean copy.
inline std::vector<double> add_noise(const std::vector<double>& u_clean, double snr_db, Rng& rng,
                                     double* sigma_out = nullptr) {
  if (std::isinf(snr_db)) {
    if (sigma_out) *sigma_out = 0.0;
    return u_clean;
  }
  double power = 0.0;
  for (double v : u_clean) power += v * v;
  power /= static_cast<double>(u_clean.size());
  if (!(power > 0.0)) throw std::invalid_argument("add_noise: zero-power signal, SNR undefined");
  double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
  if (sigma_out) *sigma_out = sigma;
  std::vector<double> out(u_clean.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u_clean[i] + sigma * rng.normal();
  return out;
}

// K observation sites drawn uniformly from the grid nodes of a reference
// solution (interior nodes only, where the lifted solution is informative).
inline Observations observe_from_solution(const ref::GridField& u, std::size_t k, double snr_db,
                                          Rng& rng) {
  std::size_t nx = u.n(0), ny = u.n(1);
  if (nx < 3 || ny < 3) throw std::invalid_argument("observe_from_solution: grid too small");
  Observations obs;
  obs.points = Tensor({k, 2});
  std::vector<double> clean(k);
  for (std::size_t s = 0; s < k; ++s) {
    std::size_t i = 1 + rng.index(nx - 2);
    std::size_t j = 1 + rng.index(ny - 2);
    obs.points(s, 0) = u.axes[0][i];
    obs.points(s, 1) = u.axes[1][j];
    clean[s] = u.at(i, j);
  }
  obs.snr_db = snr_db;
  obs.values = add_noise(clean, snr_db, rng, &obs.sigma);
  return obs;
}

} // namespace genop::inv
