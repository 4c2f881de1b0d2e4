#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genop/weak/particles.hpp"
#include "genop/weak/quadrature.hpp"
#include "genop/weak/wendland.hpp"

namespace genop::weak {

// Accessor result: field value and spatial gradient at a point.
template <std::size_t Dim>
struct FieldJet {
  double value = 0.0;
  double grad[Dim] = {};
};

// Rescaled weak residual for -div(a grad u) = f:
//   r_j = (1/|B_j|) int_{B_j} (a grad u . grad w_j - f w_j) dx.
// The weighting function shifts one derivative off the coefficient, so only
// values of a are needed.
template <typename AField, typename UJet>
inline double residual_darcy(AField&& a_at, UJet&& u_at, double f, const Particle& p,
                             const BallQuadrature& q) {
  return quad_ball_avg<2>(
      [&](const double* x) {
        double a = a_at(x);
        if (!(a > 0.0)) throw std::runtime_error("residual_darcy: non-positive coefficient");
        FieldJet<2> u = u_at(x);
        WeightAt<2> w = csrbf_weight<2>(x, p.center, p.radius);
        return a * (u.grad[0] * w.grad[0] + u.grad[1] * w.grad[1]) - f * w.w;
      },
      p.center, p.radius, q);
}

// Nonlinear Poisson variant: coefficient a e^{alpha (u - ubar)}; alpha = 0
// reduces to the linear Darcy residual exactly.
template <typename AField, typename UJet>
inline double residual_nonlinear(AField&& a_at, UJet&& u_at, double alpha, double ubar, double f,
                                 const Particle& p, const BallQuadrature& q) {
  return quad_ball_avg<2>(
      [&](const double* x) {
        double a = a_at(x);
        if (!(a > 0.0)) throw std::runtime_error("residual_nonlinear: non-positive coefficient");
        FieldJet<2> u = u_at(x);
        WeightAt<2> w = csrbf_weight<2>(x, p.center, p.radius);
        double aeff = a * std::exp(alpha * (u.value - ubar));
        return aeff * (u.grad[0] * w.grad[0] + u.grad[1] * w.grad[1]) - f * w.w;
      },
      p.center, p.radius, q);
}

// Burgers residual at the particle's time stamp; the ball is 1-D in space.
// u_at(x, t) must provide (u, u_t, u_x); grad[0] = u_t, grad[1] = u_x.
template <typename UJet>
inline double residual_burgers(UJet&& u_at, double nu, const Particle& p,
                               const BallQuadrature& q) {
  if (p.t < 0.0 || p.t > 1.0) throw std::invalid_argument("residual_burgers: stamp outside horizon");
  return quad_ball_avg<1>(
      [&](const double* x) {
        FieldJet<2> u = u_at(x[0], p.t);
        WeightAt<1> w = csrbf_weight<1>(x, p.center, p.radius);
        return u.grad[0] * w.w + u.value * u.grad[1] * w.w + nu * u.grad[1] * w.grad[0];
      },
      p.center, p.radius, q);
}

enum class ResidualForm { Darcy, NonlinearPoisson, Burgers };

struct NonlinearParams {
  double alpha = 0.05;
  double ubar = 5.0;
};

// Per-particle residual vector, in particle order.
template <typename AField, typename UJet2, typename UJetXT>
inline std::vector<double> assemble_residuals(ResidualForm form, AField&& a_at, UJet2&& u_at,
                                              UJetXT&& u_xt_at, double f, double nu,
                                              const NonlinearParams& nl,
                                              const std::vector<Particle>& particles,
                                              const BallQuadrature& q) {
  std::vector<double> r;
  r.reserve(particles.size());
  for (const Particle& p : particles) {
    switch (form) {
      case ResidualForm::Darcy: r.push_back(residual_darcy(a_at, u_at, f, p, q)); break;
      case ResidualForm::NonlinearPoisson:
        r.push_back(residual_nonlinear(a_at, u_at, nl.alpha, nl.ubar, f, p, q));
        break;
      case ResidualForm::Burgers: r.push_back(residual_burgers(u_xt_at, nu, p, q)); break;
    }
    if (!std::isfinite(r.back())) throw std::runtime_error("assemble_residuals: non-finite residual");
  }
  return r;
}

} // namespace genop::weak
