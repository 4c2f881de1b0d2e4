#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "genop/core/rng.hpp"
#include "genop/weak/quadrature.hpp"

namespace genop::weak {

// Axis-aligned box domain, dim 1 or 2.
struct Domain {
  std::size_t dim = 2;
  double lo[2] = {0.0, 0.0};
  double hi[2] = {1.0, 1.0};

  static Domain unit_square() { return Domain{2, {0.0, 0.0}, {1.0, 1.0}}; }
  static Domain interval(double a, double b) { return Domain{1, {a, 0.0}, {b, 0.0}}; }

  double width(std::size_t k) const { return hi[k] - lo[k]; }
  bool contains(const double* x) const {
    for (std::size_t k = 0; k < dim; ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
};

// One weighting-function site: a ball that fits inside the domain, plus a time
// stamp for space-time (Burgers) residuals.
struct Particle {
  double center[2] = {0.0, 0.0};
  double radius = 0.0;
  double t = 0.0;
};

struct RefineRegion {
  double lo[2], hi[2];
  double quota = 0.0;  // fraction of particles forced inside the region
};

// M centers uniform in the R-shrunk domain; an optional refinement region gets
// a fixed quota of the particles. Time stamps (when horizon > 0) are uniform
// in [0, horizon].
inline std::vector<Particle> sample_particles(const Domain& dom, std::size_t m, double radius,
                                              Rng& rng,
                                              const std::optional<RefineRegion>& refine = {},
                                              double time_horizon = 0.0) {
  for (std::size_t k = 0; k < dom.dim; ++k)
    if (2.0 * radius >= dom.width(k))
      throw std::invalid_argument("sample_particles: radius too large for domain");
  std::vector<Particle> out;
  out.reserve(m);
  std::size_t quota = refine ? static_cast<std::size_t>(refine->quota * static_cast<double>(m)) : 0;
  for (std::size_t j = 0; j < m; ++j) {
    Particle p;
    p.radius = radius;
    bool in_region = j < quota;
    for (std::size_t k = 0; k < dom.dim; ++k) {
      double lo = dom.lo[k] + radius, hi = dom.hi[k] - radius;
      if (in_region) {
        lo = std::max(lo, refine->lo[k]);
        hi = std::min(hi, refine->hi[k]);
        if (lo >= hi) throw std::invalid_argument("sample_particles: refinement region too small");
      }
      p.center[k] = rng.uniform(lo, hi);
    }
    if (time_horizon > 0.0) p.t = rng.uniform(0.0, time_horizon);
    out.push_back(p);
  }
  return out;
}

} // namespace genop::weak
