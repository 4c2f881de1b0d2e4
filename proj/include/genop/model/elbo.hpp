#pragma once

#include <cmath>
#include <cstddef>
#include <iostream>
#include <span>
#include <stdexcept>

namespace genop::model {

// Closed-form per-sample bound components. Signs follow the bound being
// maximized (all terms are log-likelihood contributions).

// (M/2) log lambda - (lambda/2) sum r_j^2
inline double elbo_pde(std::span<const double> residuals, double lambda_pde) {
  if (!(lambda_pde > 0.0)) throw std::invalid_argument("elbo_pde: lambda must be positive");
  double sq = 0.0;
  for (double r : residuals) {
    if (!std::isfinite(r)) throw std::invalid_argument("elbo_pde: non-finite residual");
    sq += r * r;
  }
  return 0.5 * static_cast<double>(residuals.size()) * std::log(lambda_pde) -
         0.5 * lambda_pde * sq;
}

// (N/2) log lambda - (lambda/2) |g_hat - u_g|^2 ; omitted entirely when the
// boundary lift enforces the data exactly.
inline double elbo_bc(std::span<const double> u_boundary, std::span<const double> g_hat,
                      double lambda_bc) {
  if (u_boundary.size() != g_hat.size()) throw std::invalid_argument("elbo_bc: length mismatch");
  if (!(lambda_bc > 0.0)) throw std::invalid_argument("elbo_bc: lambda must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < u_boundary.size(); ++i) {
    double d = g_hat[i] - u_boundary[i];
    sq += d * d;
  }
  return 0.5 * static_cast<double>(u_boundary.size()) * std::log(lambda_bc) - 0.5 * lambda_bc * sq;
}

// (d/2) log(lambda/2pi) - (lambda/2) |a_hat - mu|^2
inline double elbo_rec_continuous(std::span<const double> a_hat, std::span<const double> mu,
                                  double lambda_rec) {
  if (a_hat.size() != mu.size()) throw std::invalid_argument("elbo_rec_continuous: length mismatch");
  if (!(lambda_rec > 0.0)) throw std::invalid_argument("elbo_rec_continuous: lambda must be positive");
  double sq = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double d = a_hat[i] - mu[i];
    sq += d * d;
  }
  return 0.5 * static_cast<double>(mu.size()) * std::log(lambda_rec / (2.0 * M_PI)) -
         0.5 * lambda_rec * sq;
}

// sum_j z_j log p_j + (1-z_j) log(1-p_j); probabilities at exactly 0/1 are
// clamped with a warning since the bound would be -inf.
inline double elbo_rec_binary(std::span<const double> z, std::span<const double> p) {
  if (z.size() != p.size()) throw std::invalid_argument("elbo_rec_binary: length mismatch");
  double acc = 0.0;
  bool clamped = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double pi = p[i];
    if (pi <= 0.0 || pi >= 1.0) {
      pi = std::min(std::max(pi, 1e-12), 1.0 - 1e-12);
      clamped = true;
    }
    acc += z[i] * std::log(pi) + (1.0 - z[i]) * std::log(1.0 - pi);
  }
  if (clamped) std::cerr << "[genop] warning: clamped saturated decoder probabilities\n";
  return acc;
}

// Same Gaussian closed form as elbo_bc, applied to labeled solution values.
inline double labeled_data_term(std::span<const double> u_pred, std::span<const double> u_hat,
                                double lambda_data) {
  return elbo_bc(u_pred, u_hat, lambda_data);
}

struct ElboReport {
  double f_pde = 0.0;
  double f_bc = 0.0;   // initial-condition slot for Burgers
  double f_rec = 0.0;
  double f_kl = 0.0;   // constant under the uniform prior + degenerate encoder
  double f_data = 0.0;
  double total = 0.0;
  double sum_r2 = 0.0;  // batch-mean residual energy, for monitoring
  std::size_t epoch = 0;
};

} // namespace genop::model
