#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "genop/ref/grf.hpp"

namespace genop::ref {

// Viscous Burgers on [-1,1] x [0,1] with zero Dirichlet boundary data:
// explicit energy-conserving (skew) convection + Crank-Nicolson diffusion.
// The convective CFL is checked against the initial profile (the sup norm is
// non-increasing for this equation); on violation the call refuses and names
// the required number of time levels.
//
// Returns u on an nx x nt grid (t levels include t=0, so a0 is row 0 in time).
inline GridField fd_burgers_solve(const GridField& a0, double nu, std::size_t nx, std::size_t nt,
                                  const std::function<double(double, double)>& forcing = {}) {
  if (!(nu > 0.0)) throw std::invalid_argument("fd_burgers_solve: nu must be positive");
  if (nx < 3 || nt < 2) throw std::invalid_argument("fd_burgers_solve: grid too small");
  double h = 2.0 / static_cast<double>(nx - 1);
  double dt = 1.0 / static_cast<double>(nt - 1);

  std::vector<double> u(nx);
  double umax = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    double x[2] = {-1.0 + h * static_cast<double>(i), 0.0};
    u[i] = a0.interp(x);
    umax = std::max(umax, std::fabs(u[i]));
  }
  u.front() = 0.0;
  u.back() = 0.0;

  double dt_max = 0.5 * h / std::max(umax, 1e-12);
  if (dt > dt_max) {
    std::size_t need = static_cast<std::size_t>(std::ceil(1.0 / dt_max)) + 1;
    throw std::invalid_argument("fd_burgers_solve: CFL violation, need nt >= " +
                                std::to_string(need));
  }

  GridField out;
  out.axes = {GridField::linspace(-1.0, 1.0, nx), GridField::linspace(0.0, 1.0, nt)};
  out.values.assign(nx * nt, 0.0);
  for (std::size_t i = 0; i < nx; ++i) out.at(i, 0) = u[i];

  // Crank-Nicolson factors for the interior tridiagonal solve
  double gamma = 0.5 * nu * dt / (h * h);
  std::size_t m = nx - 2;
  std::vector<double> diag(m, 1.0 + 2.0 * gamma), rhs(m), cp(m), star(nx);

  for (std::size_t step = 1; step < nt; ++step) {
    double t_prev = dt * static_cast<double>(step - 1);
    // skew convection: u u_x ~ (1/3)[u_i D(u)_i + D(u^2)_i]
    star.front() = 0.0;
    star.back() = 0.0;
    for (std::size_t i = 1; i + 1 < nx; ++i) {
      double du = (u[i + 1] - u[i - 1]) / (2.0 * h);
      double du2 = (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) / (2.0 * h);
      double conv = (u[i] * du + du2) / 3.0;
      double g = forcing ? forcing(-1.0 + h * static_cast<double>(i), t_prev) : 0.0;
      star[i] = u[i] + dt * (g - conv);
    }
    // (I - gamma L) u_next = star + gamma L star, Thomas algorithm
    for (std::size_t i = 1; i + 1 < nx; ++i)
      rhs[i - 1] = star[i] + gamma * (star[i + 1] - 2.0 * star[i] + star[i - 1]);
    cp[0] = -gamma / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t k = 1; k < m; ++k) {
      double denom = diag[k] + gamma * cp[k - 1];
      cp[k] = -gamma / denom;
      rhs[k] = (rhs[k] + gamma * rhs[k - 1]) / denom;
    }
    for (std::size_t k = m - 1; k-- > 0;) rhs[k] -= cp[k] * rhs[k + 1];
    for (std::size_t i = 1; i + 1 < nx; ++i) u[i] = rhs[i - 1];
    u.front() = 0.0;
    u.back() = 0.0;
    for (std::size_t i = 0; i < nx; ++i) out.at(i, step) = u[i];
  }
  return out;
}

// Minimum time levels that satisfy the solver's CFL check for a given profile.
inline std::size_t burgers_required_nt(const GridField& a0, std::size_t nx, double safety = 0.5) {
  double h = 2.0 / static_cast<double>(nx - 1);
  double umax = 1e-12;
  for (double v : a0.values) umax = std::max(umax, std::fabs(v));
  double dt_max = safety * h / umax;
  return static_cast<std::size_t>(std::ceil(1.0 / dt_max)) + 2;
}

} // namespace genop::ref
