#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genop/core/nn.hpp"
#include "genop/op/multionet.hpp"
#include "genop/weak/particles.hpp"

namespace genop::op {

// Hard Dirichlet enforcement: u(x) = g(x) + psi(x) * u~(x) with psi = 0 on the
// boundary. Both in-scope problems use g = 0.
enum class LiftKind { None, DarcyBox, BurgersLine };

struct BoundaryLift {
  LiftKind kind = LiftKind::None;

  double psi(const double* x) const {
    switch (kind) {
      case LiftKind::None: return 1.0;
      case LiftKind::DarcyBox: return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]);
      case LiftKind::BurgersLine: return std::sin(0.5 * M_PI * (x[0] + 1.0));
    }
    return 1.0;
  }

  void grad_psi(const double* x, double* out, std::size_t dim) const {
    switch (kind) {
      case LiftKind::None:
        for (std::size_t k = 0; k < dim; ++k) out[k] = 0.0;
        return;
      case LiftKind::DarcyBox:
        out[0] = M_PI * std::cos(M_PI * x[0]) * std::sin(M_PI * x[1]);
        out[1] = M_PI * std::sin(M_PI * x[0]) * std::cos(M_PI * x[1]);
        return;
      case LiftKind::BurgersLine:
        out[0] = 0.5 * M_PI * std::cos(0.5 * M_PI * (x[0] + 1.0));
        return;
    }
  }

  double lift_value(const double*) const { return 0.0; }  // g == 0 for in-scope problems
};

// ---- encoder e_phi ----

struct EncoderSpec {
  bool use_conv = false;
  ConvStackSpec conv;  // active when use_conv
  MlpSpec head;        // Tanh output keeps beta inside [-1,1]^d_beta
  // fixed affine pre-scaling of the raw sensor values, (a - shift) * scale
  double input_shift = 0.0;
  double input_scale = 1.0;

  std::size_t input_width() const {
    return use_conv ? conv.in_ch * conv.height * conv.width : head.in_width();
  }
  std::size_t latent_dim() const { return head.out_width(); }

  void validate() const {
    head.validate();
    if (head.output != Act::Tanh)
      throw std::invalid_argument("EncoderSpec: head must end in Tanh");
    if (use_conv && conv.flat_out() != head.in_width())
      throw std::invalid_argument("EncoderSpec: conv output does not match head input");
  }
};

struct EncoderParams {
  ConvStackParams conv;
  MlpParams head;
};

inline EncoderParams encoder_init(const EncoderSpec& spec, Rng& rng) {
  spec.validate();
  EncoderParams p;
  if (spec.use_conv) p.conv = conv_stack_init(spec.conv, rng);
  p.head = mlp_init(spec.head, rng);
  return p;
}

// [B, d_a] -> [B, d_beta]
inline Tensor encode(const EncoderSpec& spec, const EncoderParams& p, const Tensor& a_batch) {
  if (a_batch.cols() != spec.input_width())
    throw std::invalid_argument("encode: input layout mismatch, got " + shape_str(a_batch));
  Tensor h = a_batch;
  for (double& v : h.data) v = (v - spec.input_shift) * spec.input_scale;
  if (spec.use_conv) {
    const ConvStackSpec& cs = spec.conv;
    std::size_t B = h.rows();
    Tensor x({B, cs.in_ch, cs.height, cs.width}, h.data);
    std::size_t cin = cs.in_ch, hh = cs.height, ww = cs.width;
    for (std::size_t l = 0; l < p.conv.W.size(); ++l) {
      std::size_t co = cs.channels[l];
      std::size_t ho = (hh + 2 * cs.pad - cs.kernel) / cs.stride + 1;
      std::size_t wo = (ww + 2 * cs.pad - cs.kernel) / cs.stride + 1;
      Tensor z({B, co, ho, wo});
      Graph::conv_forward(z, x, p.conv.W[l], p.conv.b[l], cs.stride, cs.pad);
      for (double& v : z.data) v = act_eval(cs.act, v);
      x = std::move(z);
      cin = co;
      hh = ho;
      ww = wo;
    }
    (void)cin;
    h = Tensor({a_batch.rows(), x.size() / a_batch.rows()}, x.data);
  }
  return mlp_forward(spec.head, p.head, h);
}

struct EncoderVars {
  ConvStackVars conv;
  MlpVars head;
};

inline EncoderVars encoder_leaf(Graph& g, const EncoderSpec& spec, const EncoderParams& p) {
  EncoderVars v;
  if (spec.use_conv) v.conv = conv_stack_leaf(g, p.conv);
  v.head = mlp_leaf(g, p.head);
  return v;
}

inline Var encode_g(Graph& g, const EncoderSpec& spec, const EncoderVars& v, Var a_batch) {
  Var h = a_batch;
  if (spec.input_shift != 0.0) h = g.add_const(h, -spec.input_shift);
  if (spec.input_scale != 1.0) h = g.scale(h, spec.input_scale);
  if (spec.use_conv) h = conv_stack_forward_g(g, spec.conv, v.conv, h);
  return mlp_forward_g(g, spec.head, v.head, h);
}

// ---- solution operator with boundary lift ----

// u(beta, x) = g(x) + psi(x) * MultiONet(beta, x); throws if x leaves the domain.
inline double solution_eval(const MultiONetSpec& spec, const MultiONetParams& p,
                            const BoundaryLift& lift, const weak::Domain& dom,
                            const std::vector<double>& beta, const std::vector<double>& x) {
  if (!dom.contains(x.data())) throw std::invalid_argument("solution_eval: point outside domain");
  double raw = multionet_eval(spec, p, beta, x);
  return lift.lift_value(x.data()) + lift.psi(x.data()) * raw;
}

// Batched: betas [B,d_beta], coords [Q,dim] -> [B,Q], lift applied per column.
inline Tensor solution_eval_batch(const MultiONetSpec& spec, const MultiONetParams& p,
                                  const BoundaryLift& lift, const Tensor& betas,
                                  const Tensor& coords) {
  Tensor out = multionet_eval_batch(spec, p, betas, coords);
  std::size_t Q = coords.rows(), dim = coords.cols();
  std::vector<double> psi(Q);
  for (std::size_t q = 0; q < Q; ++q) psi[q] = lift.psi(&coords.data[q * dim]);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t q = 0; q < Q; ++q) out(i, q) *= psi[q];
  return out;
}

// ---- input-field decoders ----

inline double decode_a_continuous(const MultiONetSpec& spec, const MultiONetParams& p,
                                  const std::vector<double>& beta, const std::vector<double>& x) {
  return multionet_eval(spec, p, beta, x);
}

// Phase-1 probability; strictly inside (0,1) for finite logits.
inline double decode_a_binary(const MultiONetSpec& spec, const MultiONetParams& p,
                              const std::vector<double>& beta, const std::vector<double>& x) {
  return sigmoid(multionet_eval(spec, p, beta, x));
}

inline double binary_field_value(double prob, double hi = 10.0, double lo = 5.0) {
  return prob > 0.5 ? hi : lo;
}

} // namespace genop::op
