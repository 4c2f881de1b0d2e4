#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "genop/ref/grf.hpp"

namespace genop::ref {

// Five-point finite-volume discretization of -div(a grad u) = f on an n x n
// uniform grid over [0,1]^2 with zero Dirichlet data. Face transmissibilities
// are harmonic means of the nodal coefficient; the SPD system is solved
// matrix-free with conjugate gradients.
namespace detail {

inline double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

struct FivePoint {
  std::size_t n;      // nodes per axis, boundary included
  double h;
  const std::vector<double>* a;  // nodal coefficient, n*n

  std::size_t interior() const { return (n - 2) * (n - 2); }
  std::size_t node(std::size_t i, std::size_t j) const { return i * n + j; }
  std::size_t unk(std::size_t i, std::size_t j) const { return (i - 1) * (n - 2) + (j - 1); }

  // y = A x over interior unknowns
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const std::vector<double>& av = *a;
    double inv_h2 = 1.0 / (h * h);
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 1; j + 1 < n; ++j) {
        double ac = av[node(i, j)];
        double tw = harmonic(ac, av[node(i - 1, j)]);
        double te = harmonic(ac, av[node(i + 1, j)]);
        double ts = harmonic(ac, av[node(i, j - 1)]);
        double tn = harmonic(ac, av[node(i, j + 1)]);
        double uc = x[unk(i, j)];
        double uw = i > 1 ? x[unk(i - 1, j)] : 0.0;
        double ue = i + 2 < n ? x[unk(i + 1, j)] : 0.0;
        double us = j > 1 ? x[unk(i, j - 1)] : 0.0;
        double un = j + 2 < n ? x[unk(i, j + 1)] : 0.0;
        y[unk(i, j)] =
            inv_h2 * ((tw + te + ts + tn) * uc - tw * uw - te * ue - ts * us - tn * un);
      }
  }
};

inline void cg_solve(const FivePoint& op, const std::vector<double>& b, std::vector<double>& x,
                     double tol, std::size_t max_iter) {
  std::size_t m = b.size();
  x.assign(m, 0.0);
  std::vector<double> r = b, p = b, ap(m);
  double rr = 0.0;
  for (double v : r) rr += v * v;
  double bnorm = std::sqrt(rr);
  if (bnorm == 0.0) return;
  double stop = tol * std::max(bnorm, 1.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    if (std::sqrt(rr) <= stop) return;
    op.apply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < m; ++i) pap += p[i] * ap[i];
    if (!(pap > 0.0)) throw std::runtime_error("fd_darcy: indefinite system (invalid coefficient?)");
    double alpha = rr / pap;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rr_new += r[i] * r[i];
    }
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = r[i] + beta * p[i];
  }
  if (std::sqrt(rr) > stop) throw std::runtime_error("fd_darcy: CG did not converge");
}

inline GridField solve_nodal(const std::vector<double>& a_nodal,
                             const std::function<double(double, double)>& f, std::size_t n) {
  if (n < 3) throw std::invalid_argument("fd_darcy: grid too small");
  for (double v : a_nodal)
    if (!(v > 0.0)) throw std::invalid_argument("fd_darcy: coefficient must be positive");
  FivePoint op;
  op.n = n;
  op.h = 1.0 / static_cast<double>(n - 1);
  op.a = &a_nodal;
  std::vector<double> b(op.interior());
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j)
      b[op.unk(i, j)] = f(static_cast<double>(i) * op.h, static_cast<double>(j) * op.h);
  std::vector<double> x;
  cg_solve(op, b, x, 1e-10, 20 * n * n);
  GridField u;
  u.axes = {GridField::linspace(0.0, 1.0, n), GridField::linspace(0.0, 1.0, n)};
  u.values.assign(n * n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) u.at(i, j) = x[op.unk(i, j)];
  return u;
}

inline std::vector<double> coeff_on_solver_grid(const GridField& a, std::size_t n) {
  std::vector<double> out(n * n);
  double h = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double x[2] = {static_cast<double>(i) * h, static_cast<double>(j) * h};
      out[i * n + j] = a.interp(x);
    }
  return out;
}

} // namespace detail

inline GridField fd_darcy_solve(const GridField& a, const std::function<double(double, double)>& f,
                                std::size_t n) {
  return detail::solve_nodal(detail::coeff_on_solver_grid(a, n), f, n);
}

inline GridField fd_darcy_solve(const GridField& a, double f, std::size_t n) {
  return fd_darcy_solve(a, [f](double, double) { return f; }, n);
}

// Picard iteration with effective coefficient a * exp(alpha (u - ubar)). With
// alpha = 0 each iterate reproduces the linear solve bit-for-bit.
inline GridField fd_darcy_nonlinear_solve(const GridField& a,
                                          const std::function<double(double, double)>& f,
                                          double alpha, double ubar, std::size_t n,
                                          std::size_t max_picard = 100, double tol = 1e-8) {
  std::vector<double> a_nodal = detail::coeff_on_solver_grid(a, n);
  GridField u;
  u.axes = {GridField::linspace(0.0, 1.0, n), GridField::linspace(0.0, 1.0, n)};
  u.values.assign(n * n, 0.0);
  std::vector<double> aeff(n * n);
  for (std::size_t it = 0; it < max_picard; ++it) {
    for (std::size_t k = 0; k < n * n; ++k)
      aeff[k] = a_nodal[k] * std::exp(alpha * (u.values[k] - ubar));
    GridField next = detail::solve_nodal(aeff, f, n);
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) {
      double d = next.values[k] - u.values[k];
      diff += d * d;
      norm += next.values[k] * next.values[k];
    }
    u = std::move(next);
    if (std::sqrt(diff) <= tol * std::max(std::sqrt(norm), 1e-30)) return u;
  }
  throw std::runtime_error("fd_darcy_nonlinear_solve: Picard iteration did not converge");
}

inline GridField fd_darcy_nonlinear_solve(const GridField& a, double f, double alpha, double ubar,
                                          std::size_t n) {
  return fd_darcy_nonlinear_solve(a, [f](double, double) { return f; }, alpha, ubar, n);
}

} // namespace genop::ref
