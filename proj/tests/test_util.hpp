#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "genop/core/tensor.hpp"

namespace testutil {

using genop::Tensor;

// Central finite differences against an analytic gradient over a flat list of
// parameter tensors. eval() must recompute the scalar objective from the
// current parameter values. Relative error uses a floor tied to the largest
// gradient entry so near-zero components do not dominate.
inline double max_rel_grad_err(const std::function<double()>& eval,
                               const std::vector<Tensor*>& params,
                               const std::vector<Tensor>& grads, double h = 1e-5) {
  double gmax = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data) gmax = std::max(gmax, std::fabs(v));
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double keep = p.data[i];
      p.data[i] = keep + h;
      double fp = eval();
      p.data[i] = keep - h;
      double fm = eval();
      p.data[i] = keep;
      double fd = (fp - fm) / (2.0 * h);
      double g = grads[k].data[i];
      double denom = std::max({std::fabs(fd), std::fabs(g), 1e-3 * gmax, 1e-10});
      worst = std::max(worst, std::fabs(g - fd) / denom);
    }
  }
  return worst;
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

} // namespace testutil
