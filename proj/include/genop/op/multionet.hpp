#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genop/core/graph.hpp"
#include "genop/core/nn.hpp"
#include "genop/core/rng.hpp"

namespace genop::op {

// Paired-layer operator network: branch (latent input) and trunk (coordinate
// input) feature stacks combined as
//   G(beta)(x) = (1/l_b) sum_k w^(k) <b^(k)(beta), t^(k+l_t-l_b)(x)> + b0.
// With one paired layer and unit weight this reduces to the plain two-net
// inner-product architecture.
struct MultiONetSpec {
  MlpSpec branch;  // all layers activated; widths[0] = d_beta
  MlpSpec trunk;   // all layers activated; widths[0] = coordinate dim

  std::size_t paired_layers() const { return branch.layers(); }
  std::size_t trunk_layers() const { return trunk.layers(); }
  std::size_t offset() const { return trunk_layers() - paired_layers(); }

  void validate() const {
    branch.validate();
    trunk.validate();
    if (branch.layers() > trunk.layers())
      throw std::invalid_argument("MultiONetSpec: branch deeper than trunk");
    for (std::size_t k = 1; k <= paired_layers(); ++k)
      if (branch.widths[k] != trunk.widths[k + offset()])
        throw std::invalid_argument("MultiONetSpec: paired layer widths differ");
  }
};

struct MultiONetParams {
  MlpParams branch, trunk;
  Tensor layer_weights;  // [l_b], init 1 (trainable)
  Tensor bias;           // [1]
};

inline MultiONetParams multionet_init(const MultiONetSpec& spec, Rng& rng) {
  spec.validate();
  MultiONetParams p;
  p.branch = mlp_init(spec.branch, rng);
  p.trunk = mlp_init(spec.trunk, rng);
  p.layer_weights = Tensor::full({spec.paired_layers()}, 1.0);
  p.bias = Tensor({1});
  return p;
}

inline double pair_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Combine precomputed feature stacks into [B,Q] outputs.
inline Tensor multionet_combine(const MultiONetSpec& spec, const MultiONetParams& p,
                                const std::vector<Tensor>& branch_feats,
                                const std::vector<Tensor>& trunk_feats) {
  std::size_t lb = spec.paired_layers(), off = spec.offset();
  std::size_t B = branch_feats.front().rows(), Q = trunk_feats.front().rows();
  Tensor out({B, Q});
  for (std::size_t k = 0; k < lb; ++k) {
    const Tensor& bf = branch_feats[k];
    const Tensor& tf = trunk_feats[k + off];
    std::size_t h = bf.cols();
    double wk = p.layer_weights[k];
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < Q; ++j)
        out(i, j) += wk * pair_dot(&bf.data[i * h], &tf.data[j * h], h);
  }
  double inv = 1.0 / static_cast<double>(lb);
  for (double& v : out.data) v = v * inv + p.bias[0];
  return out;
}

// [B, d_beta] x [Q, d] -> [B, Q]
inline Tensor multionet_eval_batch(const MultiONetSpec& spec, const MultiONetParams& p,
                                   const Tensor& betas, const Tensor& coords) {
  auto bf = mlp_features(spec.branch, p.branch, betas);
  auto tf = mlp_features(spec.trunk, p.trunk, coords);
  return multionet_combine(spec, p, bf, tf);
}

inline double multionet_eval(const MultiONetSpec& spec, const MultiONetParams& p,
                             const std::vector<double>& beta, const std::vector<double>& x) {
  Tensor b({1, beta.size()}, beta);
  Tensor c({1, x.size()}, x);
  return multionet_eval_batch(spec, p, b, c)(0, 0);
}

// Classic branch/trunk inner product on the nets' final outputs (the nets may
// carry linear output layers). Accumulation order matches multionet_combine.
inline double deeponet_eval(const MlpSpec& branch_spec, const MlpParams& branch,
                            const MlpSpec& trunk_spec, const MlpParams& trunk, double bias,
                            const std::vector<double>& branch_input, const std::vector<double>& x) {
  Tensor bin({1, branch_input.size()}, branch_input);
  Tensor xin({1, x.size()}, x);
  Tensor bo = mlp_forward(branch_spec, branch, bin);
  Tensor to = mlp_forward(trunk_spec, trunk, xin);
  if (bo.cols() != to.cols()) throw std::invalid_argument("deeponet_eval: output width mismatch");
  return pair_dot(bo.data.data(), to.data.data(), bo.cols()) + bias;
}

// ---- graph-side combine ----

struct MultiONetVars {
  MlpVars branch, trunk;
  Var layer_weights;  // [l_b]
  Var bias;           // [1]
};

inline MultiONetVars multionet_leaf(Graph& g, const MultiONetParams& p) {
  MultiONetVars v;
  v.branch = mlp_leaf(g, p.branch);
  v.trunk = mlp_leaf(g, p.trunk);
  v.layer_weights = g.leaf(p.layer_weights);
  v.bias = g.leaf(p.bias);
  return v;
}

// Pairing of graph-side branch features with trunk features (graph vars or
// constants); with_bias=false is used for tangent channels, whose pairing has
// no bias contribution.
inline Var multionet_combine_g(Graph& g, const MultiONetSpec& spec, const MultiONetVars& v,
                               const std::vector<Var>& branch_feats,
                               const std::vector<Var>& trunk_feats, bool with_bias = true) {
  std::size_t lb = spec.paired_layers(), off = spec.offset();
  Var w_row = g.reshape(v.layer_weights, {1, lb});
  Var acc;
  for (std::size_t k = 0; k < lb; ++k) {
    Var prod = g.matmul_nt(branch_feats[k], trunk_feats[k + off]);
    Var wk = g.slice_cols(w_row, k, k + 1);
    Var term = g.scale_var(prod, wk);
    acc = (k == 0) ? term : g.add(acc, term);
  }
  acc = g.scale(acc, 1.0 / static_cast<double>(lb));
  if (with_bias) acc = g.add_scalar_var(acc, v.bias);
  return acc;
}

} // namespace genop::op
