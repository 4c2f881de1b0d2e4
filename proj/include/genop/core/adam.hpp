#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "genop/core/tensor.hpp"

namespace genop {

// Adam with bias correction over a flat list of parameter tensors.
struct AdamState {
  std::uint64_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Tensor> m, v;

  static AdamState like(const std::vector<Tensor*>& params) {
    AdamState s;
    for (const Tensor* p : params) {
      s.m.push_back(Tensor(p->shape));
      s.v.push_back(Tensor(p->shape));
    }
    return s;
  }
};

inline void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      AdamState& st, double lr) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  st.step += 1;
  double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(st.m[k]))
      throw std::invalid_argument("adam_step: shape mismatch at tensor " + std::to_string(k));
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g.data[i];
      st.m[k].data[i] = st.beta1 * st.m[k].data[i] + (1.0 - st.beta1) * gi;
      st.v[k].data[i] = st.beta2 * st.v[k].data[i] + (1.0 - st.beta2) * gi * gi;
      double mhat = st.m[k].data[i] / bc1;
      double vhat = st.v[k].data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

// lr0 * 2^-floor(epoch/period); period defaults to the full-scale halving
// interval and shrinks for desk runs.
inline double lr_schedule(std::uint64_t epoch, double lr0, std::uint64_t period = 2500) {
  if (period == 0) return lr0;
  return lr0 * std::pow(2.0, -static_cast<double>(epoch / period));
}

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_grad_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) sq += g.squared_norm();
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data) v *= s;
  }
  return norm;
}

} // namespace genop
