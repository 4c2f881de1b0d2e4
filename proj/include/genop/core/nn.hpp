#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "genop/core/graph.hpp"
#include "genop/core/rng.hpp"
#include "genop/core/tensor.hpp"

namespace genop {

enum class Act { Identity, Tanh, SiLU, ELU, ReLU, Sigmoid, TanhSin };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Tanh: return "tanh";
    case Act::SiLU: return "silu";
    case Act::ELU: return "elu";
    case Act::ReLU: return "relu";
    case Act::Sigmoid: return "sigmoid";
    case Act::TanhSin: return "tanh_sin";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "tanh") return Act::Tanh;
  if (s == "silu") return Act::SiLU;
  if (s == "elu") return Act::ELU;
  if (s == "relu") return Act::ReLU;
  if (s == "sigmoid") return Act::Sigmoid;
  if (s == "tanh_sin") return Act::TanhSin;
  throw std::invalid_argument("unknown activation: " + s);
}

inline double sigmoid(double x) { return Graph::sigmoid_scalar(x); }

// tanh(sin(pi*x + pi)) + x; the x term keeps the activation unbounded while the
// periodic part vanishes at every integer.
inline double tanh_sin(double x) { return std::tanh(std::sin(M_PI * x + M_PI)) + x; }

inline double tanh_sin_deriv(double x) {
  double t = std::tanh(std::sin(M_PI * x + M_PI));
  return (1.0 - t * t) * M_PI * std::cos(M_PI * x + M_PI) + 1.0;
}

inline double act_eval(Act a, double x) {
  switch (a) {
    case Act::Identity: return x;
    case Act::Tanh: return std::tanh(x);
    case Act::SiLU: return x * sigmoid(x);
    case Act::ELU: return x > 0.0 ? x : std::expm1(x);
    case Act::ReLU: return x > 0.0 ? x : 0.0;
    case Act::Sigmoid: return sigmoid(x);
    case Act::TanhSin: return tanh_sin(x);
  }
  return x;
}

inline double act_deriv(Act a, double x) {
  switch (a) {
    case Act::Identity: return 1.0;
    case Act::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Act::SiLU: {
      double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Act::ELU: return x > 0.0 ? 1.0 : std::exp(x);
    case Act::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Act::Sigmoid: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Act::TanhSin: return tanh_sin_deriv(x);
  }
  return 1.0;
}

// Graph-side activation. act_prime() returns sigma'(z) as graph nodes so that
// tangent propagation stays differentiable with respect to the parameters.
struct ActNodes {
  Var y;
  Var aux;  // activation-specific saved node (sigmoid(z), tanh(sin(..)), ...)
};

inline ActNodes act_apply(Graph& g, Act a, Var z) {
  switch (a) {
    case Act::Identity: return {z, {}};
    case Act::Tanh: {
      Var y = g.tanh_(z);
      return {y, y};
    }
    case Act::SiLU: {
      Var s = g.sigmoid_(z);
      return {g.mul(z, s), s};
    }
    case Act::ELU: return {g.elu_(z), {}};
    case Act::ReLU: return {g.relu_(z), {}};
    case Act::Sigmoid: {
      Var y = g.sigmoid_(z);
      return {y, y};
    }
    case Act::TanhSin: {
      Var aff = g.add_const(g.scale(z, M_PI), M_PI);
      Var th = g.tanh_(g.sin_(aff));
      return {g.add(th, z), th};
    }
  }
  return {z, {}};
}

inline Var act_prime(Graph& g, Act a, Var z, const ActNodes& n) {
  switch (a) {
    case Act::Identity: return g.constant(Tensor::full(g.val(z).shape, 1.0));
    case Act::Tanh: {
      Var t2 = g.mul(n.aux, n.aux);
      return g.add_const(g.scale(t2, -1.0), 1.0);
    }
    case Act::SiLU: {
      Var one_m_s = g.add_const(g.scale(n.aux, -1.0), 1.0);
      return g.mul(n.aux, g.add_const(g.mul(z, one_m_s), 1.0));
    }
    case Act::ELU: {
      const Tensor& zv = g.val(z);
      Tensor mask(zv.shape), inv(zv.shape);
      for (std::size_t i = 0; i < zv.size(); ++i) {
        mask.data[i] = zv.data[i] > 0.0 ? 1.0 : 0.0;
        inv.data[i] = 1.0 - mask.data[i];
      }
      // elu'(z) = 1 for z>0, y+1 otherwise
      Var below = g.mul(g.constant(std::move(inv)), g.add_const(n.y, 1.0));
      return g.add(g.constant(std::move(mask)), below);
    }
    case Act::ReLU: {
      const Tensor& zv = g.val(z);
      Tensor mask(zv.shape);
      for (std::size_t i = 0; i < zv.size(); ++i) mask.data[i] = zv.data[i] > 0.0 ? 1.0 : 0.0;
      return g.constant(std::move(mask));
    }
    case Act::Sigmoid: {
      Var one_m = g.add_const(g.scale(n.aux, -1.0), 1.0);
      return g.mul(n.aux, one_m);
    }
    case Act::TanhSin: {
      Var aff = g.add_const(g.scale(z, M_PI), M_PI);
      Var c = g.cos_(aff);
      Var one_m_t2 = g.add_const(g.scale(g.mul(n.aux, n.aux), -1.0), 1.0);
      return g.add_const(g.scale(g.mul(one_m_t2, c), M_PI), 1.0);
    }
  }
  return g.constant(Tensor::full(g.val(z).shape, 1.0));
}

// ---- feed-forward nets ----

struct MlpSpec {
  std::vector<std::size_t> widths;  // including input width
  Act hidden = Act::Tanh;
  std::optional<Act> output;  // applied after the last (linear) layer

  std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t in_width() const { return widths.front(); }
  std::size_t out_width() const { return widths.back(); }

  void validate() const {
    if (widths.size() < 2) throw std::invalid_argument("MlpSpec: needs at least one layer");
    for (auto w : widths)
      if (w < 1) throw std::invalid_argument("MlpSpec: widths must be >= 1");
  }
};

struct MlpParams {
  std::vector<Tensor> W;  // [in,out] per layer
  std::vector<Tensor> b;  // [out]
};

inline MlpParams mlp_init(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    std::size_t fin = spec.widths[l], fout = spec.widths[l + 1];
    double bound = std::sqrt(6.0 / static_cast<double>(fin + fout));
    Tensor w({fin, fout});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    p.W.push_back(std::move(w));
    p.b.push_back(Tensor({fout}));
  }
  return p;
}

// Plain forward over a row batch X [n, in] -> [n, out]. Hidden layers use
// spec.hidden, the last layer is linear followed by spec.output if set.
inline Tensor mlp_forward(const MlpSpec& spec, const MlpParams& p, const Tensor& x) {
  if (x.cols() != spec.in_width())
    throw std::invalid_argument("mlp_forward: input width " + std::to_string(x.cols()) +
                                " != " + std::to_string(spec.in_width()));
  Tensor h = x.rank() == 2 ? x : Tensor({1, x.size()}, x.data);
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    Tensor z({h.rows(), p.W[l].cols()});
    Graph::mm_nn(z, h, p.W[l]);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += p.b[l][j];
    bool last = (l + 1 == p.W.size());
    Act a = last ? spec.output.value_or(Act::Identity) : spec.hidden;
    if (a != Act::Identity)
      for (double& v : z.data) v = act_eval(a, v);
    h = std::move(z);
  }
  return h;
}

// All-layers-activated feature stack (the form consumed by the paired-layer
// operator networks): returns the post-activation output of every layer.
inline std::vector<Tensor> mlp_features(const MlpSpec& spec, const MlpParams& p, const Tensor& x) {
  if (x.cols() != spec.in_width()) throw std::invalid_argument("mlp_features: input width mismatch");
  std::vector<Tensor> feats;
  Tensor h = x.rank() == 2 ? x : Tensor({1, x.size()}, x.data);
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    Tensor z({h.rows(), p.W[l].cols()});
    Graph::mm_nn(z, h, p.W[l]);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += p.b[l][j];
    for (double& v : z.data) v = act_eval(spec.hidden, v);
    feats.push_back(std::move(z));
    h = feats.back();
  }
  return feats;
}

// Feature stack plus tangents d(feature)/d(x_dir) for each requested input
// direction, propagated alongside the values (plain, tape-free).
struct MlpDualFeatures {
  std::vector<Tensor> value;                 // per layer [n, width]
  std::vector<std::vector<Tensor>> tangent;  // [dir][layer] -> [n, width]
};

inline MlpDualFeatures mlp_features_dual(const MlpSpec& spec, const MlpParams& p, const Tensor& x,
                                         const std::vector<std::size_t>& dirs) {
  if (x.cols() != spec.in_width()) throw std::invalid_argument("mlp_features_dual: width mismatch");
  MlpDualFeatures out;
  out.tangent.resize(dirs.size());
  std::size_t n = x.rows();
  Tensor h = x;
  std::vector<Tensor> hd;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    Tensor t({n, x.cols()});
    for (std::size_t i = 0; i < n; ++i) t(i, dirs[d]) = 1.0;
    hd.push_back(std::move(t));
  }
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    std::size_t m = p.W[l].cols();
    Tensor z({n, m});
    Graph::mm_nn(z, h, p.W[l]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) z(i, j) += p.b[l][j];
    std::vector<Tensor> zd;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      Tensor t({n, m});
      Graph::mm_nn(t, hd[d], p.W[l]);
      zd.push_back(std::move(t));
    }
    Tensor y = z, dy = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
      y.data[i] = act_eval(spec.hidden, z.data[i]);
      dy.data[i] = act_deriv(spec.hidden, z.data[i]);
    }
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      for (std::size_t i = 0; i < z.size(); ++i) zd[d].data[i] *= dy.data[i];
      out.tangent[d].push_back(zd[d]);
    }
    out.value.push_back(y);
    h = out.value.back();
    hd = zd;
  }
  return out;
}

// ---- graph-side MLP evaluation ----

struct MlpVars {
  std::vector<Var> W, b;
};

inline MlpVars mlp_leaf(Graph& g, const MlpParams& p) {
  MlpVars v;
  for (const auto& w : p.W) v.W.push_back(g.leaf(w));
  for (const auto& b : p.b) v.b.push_back(g.leaf(b));
  return v;
}

inline Var mlp_forward_g(Graph& g, const MlpSpec& spec, const MlpVars& v, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < v.W.size(); ++l) {
    Var z = g.add_rowvec(g.matmul(h, v.W[l]), v.b[l]);
    bool last = (l + 1 == v.W.size());
    Act a = last ? spec.output.value_or(Act::Identity) : spec.hidden;
    h = (a == Act::Identity) ? z : act_apply(g, a, z).y;
  }
  return h;
}

inline std::vector<Var> mlp_features_g(Graph& g, const MlpSpec& spec, const MlpVars& v, Var x) {
  std::vector<Var> feats;
  Var h = x;
  for (std::size_t l = 0; l < v.W.size(); ++l) {
    Var z = g.add_rowvec(g.matmul(h, v.W[l]), v.b[l]);
    h = act_apply(g, spec.hidden, z).y;
    feats.push_back(h);
  }
  return feats;
}

// Graph feature stack with spatial tangents: the tangents are ordinary graph
// nodes, so any loss built from them can be differentiated with respect to the
// network parameters by the same reverse pass.
struct MlpDualVars {
  std::vector<Var> value;
  std::vector<std::vector<Var>> tangent;  // [dir][layer]
};

inline MlpDualVars mlp_features_dual_g(Graph& g, const MlpSpec& spec, const MlpVars& v, Var x,
                                       const std::vector<std::size_t>& dirs) {
  MlpDualVars out;
  out.tangent.resize(dirs.size());
  const Tensor& xv = g.val(x);
  std::size_t n = xv.rows();
  Var h = x;
  std::vector<Var> hd;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    Tensor t({n, xv.cols()});
    for (std::size_t i = 0; i < n; ++i) t(i, dirs[d]) = 1.0;
    hd.push_back(g.constant(std::move(t)));
  }
  for (std::size_t l = 0; l < v.W.size(); ++l) {
    Var z = g.add_rowvec(g.matmul(h, v.W[l]), v.b[l]);
    std::vector<Var> zd;
    for (std::size_t d = 0; d < dirs.size(); ++d) zd.push_back(g.matmul(hd[d], v.W[l]));
    ActNodes an = act_apply(g, spec.hidden, z);
    Var pr = act_prime(g, spec.hidden, z, an);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      zd[d] = g.mul(pr, zd[d]);
      out.tangent[d].push_back(zd[d]);
    }
    out.value.push_back(an.y);
    h = an.y;
    hd = std::move(zd);
  }
  return out;
}

// ---- strided conv encoder front-end ----

struct ConvStackSpec {
  std::size_t in_ch = 1, height = 0, width = 0;
  std::vector<std::size_t> channels;  // output channels per conv layer
  std::size_t kernel = 3, stride = 2, pad = 1;
  Act act = Act::SiLU;

  std::size_t out_h() const {
    std::size_t h = height;
    for (std::size_t i = 0; i < channels.size(); ++i) h = (h + 2 * pad - kernel) / stride + 1;
    return h;
  }
  std::size_t out_w() const {
    std::size_t w = width;
    for (std::size_t i = 0; i < channels.size(); ++i) w = (w + 2 * pad - kernel) / stride + 1;
    return w;
  }
  std::size_t flat_out() const {
    return channels.empty() ? in_ch * height * width : channels.back() * out_h() * out_w();
  }
};

struct ConvStackParams {
  std::vector<Tensor> W;  // [O,C,k,k]
  std::vector<Tensor> b;  // [O]
};

inline ConvStackParams conv_stack_init(const ConvStackSpec& s, Rng& rng) {
  ConvStackParams p;
  std::size_t cin = s.in_ch;
  for (std::size_t c : s.channels) {
    std::size_t fin = cin * s.kernel * s.kernel, fout = c * s.kernel * s.kernel;
    double bound = std::sqrt(6.0 / static_cast<double>(fin + fout));
    Tensor w({c, cin, s.kernel, s.kernel});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    p.W.push_back(std::move(w));
    p.b.push_back(Tensor({c}));
    cin = c;
  }
  return p;
}

struct ConvStackVars {
  std::vector<Var> W, b;
};

inline ConvStackVars conv_stack_leaf(Graph& g, const ConvStackParams& p) {
  ConvStackVars v;
  for (const auto& w : p.W) v.W.push_back(g.leaf(w));
  for (const auto& b : p.b) v.b.push_back(g.leaf(b));
  return v;
}

// x: [B, in_ch*H*W] flat rows -> [B, flat_out]
inline Var conv_stack_forward_g(Graph& g, const ConvStackSpec& s, const ConvStackVars& v, Var x) {
  const Tensor& xv = g.val(x);
  std::size_t B = xv.rows();
  Var h = g.reshape(x, {B, s.in_ch, s.height, s.width});
  for (std::size_t l = 0; l < v.W.size(); ++l) {
    Var z = g.conv2d(h, v.W[l], v.b[l], s.stride, s.pad);
    h = act_apply(g, s.act, z).y;
  }
  const Tensor& hv = g.val(h);
  return g.reshape(h, {B, hv.size() / B});
}

} // namespace genop
