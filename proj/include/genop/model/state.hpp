#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "genop/core/adam.hpp"
#include "genop/core/nn.hpp"
#include "genop/op/models.hpp"
#include "genop/op/multionet.hpp"
#include "genop/ref/dataset.hpp"
#include "genop/weak/particles.hpp"
#include "genop/weak/residuals.hpp"

namespace genop::model {

using io::json;

struct Hyperparams {
  double lambda_pde = 1.0;
  double lambda_rec = 0.25;   // binary: weight on the cross-entropy; continuous: precision
  double lambda_bc = 10.0;    // initial-condition precision (Burgers)
  double lambda_data = 50.0;  // labeled-solution precision
  std::size_t batch = 50;
  std::size_t epochs = 10000;
  double lr0 = 1e-3;
  std::size_t lr_period = 2500;
  std::size_t d_beta = 128;
  std::size_t m_particles = 300;
  std::size_t n_int = 25;
  double radius_frac = 0.05;  // of domain width; ignored when radius_abs > 0
  double radius_abs = 0.0;
  double clip_norm = 100.0;
  double f = 10.0;
  double nu = 0.1 / M_PI;
  double alpha = 0.05, ubar = 5.0;
  bool fixed_particles = false;

  void validate() const {
    if (!(lambda_pde > 0.0) || !(lambda_rec > 0.0) || !(lambda_bc > 0.0) || !(lambda_data > 0.0))
      throw std::invalid_argument("Hyperparams: precisions must be positive");
    if (batch == 0 || d_beta == 0 || m_particles == 0 || n_int == 0)
      throw std::invalid_argument("Hyperparams: counts must be positive");
    if (!(lr0 > 0.0)) throw std::invalid_argument("Hyperparams: lr0 must be positive");
    if (!(radius_abs > 0.0) && !(radius_frac > 0.0))
      throw std::invalid_argument("Hyperparams: particle radius must be positive");
  }

  double radius_for(const weak::Domain& dom) const {
    if (radius_abs > 0.0) return radius_abs;
    double w = dom.width(0);
    for (std::size_t k = 1; k < dom.dim; ++k) w = std::min(w, dom.width(k));
    return radius_frac * w;
  }
};

struct ModelSpecs {
  ref::DataKind kind = ref::DataKind::DarcyBinary;
  op::EncoderSpec encoder;
  op::MultiONetSpec solution;
  op::MultiONetSpec decoder;  // absent for Burgers (the t=0 slice plays that role)
  bool has_decoder = true;
  bool decoder_binary = true;
  op::BoundaryLift lift;
  weak::Domain domain;
  weak::ResidualForm form = weak::ResidualForm::Darcy;
  double binary_hi = 10.0, binary_lo = 5.0;
};

struct TrainState {
  ModelSpecs specs;
  Hyperparams hyper;
  op::EncoderParams encoder;
  op::MultiONetParams solution;
  op::MultiONetParams decoder;
  AdamState adam_phi, adam_theta;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
};

// Canonical parameter order (checkpoint payload order and leaf order agree by
// construction: conv W.., conv b.., head W.., head b.. for the encoder; branch
// W.., branch b.., trunk W.., trunk b.., layer weights, bias per operator).
template <typename F>
void visit_encoder_params(op::EncoderParams& p, F&& f) {
  for (std::size_t i = 0; i < p.conv.W.size(); ++i) f("encoder.conv" + std::to_string(i) + ".W", p.conv.W[i]);
  for (std::size_t i = 0; i < p.conv.b.size(); ++i) f("encoder.conv" + std::to_string(i) + ".b", p.conv.b[i]);
  for (std::size_t i = 0; i < p.head.W.size(); ++i) f("encoder.head" + std::to_string(i) + ".W", p.head.W[i]);
  for (std::size_t i = 0; i < p.head.b.size(); ++i) f("encoder.head" + std::to_string(i) + ".b", p.head.b[i]);
}

template <typename F>
void visit_multionet_params(const std::string& tag, op::MultiONetParams& p, F&& f) {
  for (std::size_t i = 0; i < p.branch.W.size(); ++i) f(tag + ".branch" + std::to_string(i) + ".W", p.branch.W[i]);
  for (std::size_t i = 0; i < p.branch.b.size(); ++i) f(tag + ".branch" + std::to_string(i) + ".b", p.branch.b[i]);
  for (std::size_t i = 0; i < p.trunk.W.size(); ++i) f(tag + ".trunk" + std::to_string(i) + ".W", p.trunk.W[i]);
  for (std::size_t i = 0; i < p.trunk.b.size(); ++i) f(tag + ".trunk" + std::to_string(i) + ".b", p.trunk.b[i]);
  f(tag + ".layer_weights", p.layer_weights);
  f(tag + ".bias", p.bias);
}

inline std::vector<Tensor*> phi_params(TrainState& st) {
  std::vector<Tensor*> out;
  visit_encoder_params(st.encoder, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

inline std::vector<Tensor*> theta_params(TrainState& st) {
  std::vector<Tensor*> out;
  visit_multionet_params("solution", st.solution,
                         [&](const std::string&, Tensor& t) { out.push_back(&t); });
  if (st.specs.has_decoder)
    visit_multionet_params("decoder", st.decoder,
                           [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

// ---- presets ----

enum class Preset { Desk, Paper };

inline Preset preset_from(const std::string& s) {
  if (s == "desk") return Preset::Desk;
  if (s == "paper") return Preset::Paper;
  throw std::invalid_argument("unknown preset: " + s);
}

namespace detail {

inline MlpSpec stack(std::size_t in, std::size_t width, std::size_t depth, Act act) {
  MlpSpec s;
  s.widths.push_back(in);
  for (std::size_t i = 0; i < depth; ++i) s.widths.push_back(width);
  s.hidden = act;
  return s;
}

} // namespace detail

// Desk-scale nets keep the paper's architecture family at CPU-friendly sizes;
// the paper preset follows the reported shapes (6x80 operators, conv encoder
// for the 2-D problems, d_beta 128/64).
inline ModelSpecs make_specs(ref::DataKind kind, Preset preset, std::size_t sensor_n,
                             std::size_t d_beta) {
  ModelSpecs s;
  s.kind = kind;
  bool darcy = ref::is_darcy_family(kind);
  s.domain = darcy ? weak::Domain::unit_square() : weak::Domain::interval(-1.0, 1.0);
  s.lift.kind = darcy ? op::LiftKind::DarcyBox : op::LiftKind::BurgersLine;
  s.form = kind == ref::DataKind::NonlinearPoisson ? weak::ResidualForm::NonlinearPoisson
           : darcy                                 ? weak::ResidualForm::Darcy
                                                   : weak::ResidualForm::Burgers;
  std::size_t coord_dim = 2;  // (x1,x2) or (x,t)
  std::size_t width = preset == Preset::Desk ? 40 : 80;
  std::size_t depth = preset == Preset::Desk ? 4 : 6;
  s.solution.branch = detail::stack(d_beta, width, depth, Act::TanhSin);
  s.solution.trunk = detail::stack(coord_dim, width, depth, Act::TanhSin);
  s.decoder.branch = detail::stack(d_beta, width, depth, Act::TanhSin);
  s.decoder.trunk = detail::stack(2, width, depth, Act::TanhSin);
  s.has_decoder = darcy;
  s.decoder_binary = kind == ref::DataKind::DarcyBinary;

  std::size_t d_a = darcy ? sensor_n * sensor_n : sensor_n;
  if (darcy) {
    if (preset == Preset::Paper) {
      s.encoder.use_conv = true;
      s.encoder.conv = ConvStackSpec{1, sensor_n, sensor_n, {64, 64, 64}, 3, 2, 1, Act::SiLU};
      s.encoder.head = MlpSpec{{s.encoder.conv.flat_out(), 128, 128, d_beta}, Act::SiLU, Act::Tanh};
    } else {
      s.encoder.use_conv = false;
      s.encoder.head = MlpSpec{{d_a, 128, 128, d_beta}, Act::SiLU, Act::Tanh};
    }
    if (kind == ref::DataKind::DarcyBinary) {
      s.encoder.input_shift = 0.5 * (s.binary_hi + s.binary_lo);
      s.encoder.input_scale = 2.0 / (s.binary_hi - s.binary_lo);
    } else {
      s.encoder.input_shift = 2.1;
      s.encoder.input_scale = 1.0;
    }
  } else {
    if (preset == Preset::Paper)
      s.encoder.head = MlpSpec{{d_a, 128, 128, 64, 64, d_beta}, Act::ELU, Act::Tanh};
    else
      s.encoder.head = MlpSpec{{d_a, 64, 64, d_beta}, Act::ELU, Act::Tanh};
  }
  s.encoder.validate();
  s.solution.validate();
  if (s.has_decoder) s.decoder.validate();
  return s;
}

inline Hyperparams make_hyper(ref::DataKind kind, Preset preset) {
  Hyperparams h;
  bool darcy = ref::is_darcy_family(kind);
  if (preset == Preset::Paper) {
    h.d_beta = darcy ? 128 : 64;
    h.m_particles = darcy ? 300 : 100;
    h.n_int = darcy ? 25 : 10;
    h.epochs = 10000;
    h.lr_period = 2500;
    h.radius_abs = 1e-4;
  } else {
    h.d_beta = 16;
    h.m_particles = 64;
    h.n_int = darcy ? 25 : 10;
    h.epochs = 2000;
    h.lr_period = 500;
    h.radius_frac = 0.05;
  }
  h.lambda_rec = 0.25;
  h.lambda_bc = 10.0;
  return h;
}

inline TrainState make_state(ref::DataKind kind, Preset preset, std::size_t sensor_n,
                             const Hyperparams& hyper, std::uint64_t seed) {
  hyper.validate();
  TrainState st;
  st.specs = make_specs(kind, preset, sensor_n, hyper.d_beta);
  st.hyper = hyper;
  st.seed = seed;
  Rng init = Rng::stream(seed, "init");
  st.encoder = op::encoder_init(st.specs.encoder, init);
  st.solution = op::multionet_init(st.specs.solution, init);
  if (st.specs.has_decoder) st.decoder = op::multionet_init(st.specs.decoder, init);
  st.adam_phi = AdamState::like(phi_params(st));
  st.adam_theta = AdamState::like(theta_params(st));
  return st;
}

// ---- spec (de)serialization for checkpoints and config echo ----

inline json to_json(const MlpSpec& s) {
  json j;
  j["widths"] = s.widths;
  j["hidden"] = act_name(s.hidden);
  if (s.output) j["output"] = act_name(*s.output);
  return j;
}

inline MlpSpec mlp_spec_from(const json& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.hidden = act_from_name(j.at("hidden").get<std::string>());
  if (j.contains("output")) s.output = act_from_name(j.at("output").get<std::string>());
  return s;
}

inline json to_json(const op::EncoderSpec& s) {
  json j;
  j["use_conv"] = s.use_conv;
  if (s.use_conv) {
    j["conv"] = {{"in_ch", s.conv.in_ch},   {"height", s.conv.height}, {"width", s.conv.width},
                 {"channels", s.conv.channels}, {"kernel", s.conv.kernel}, {"stride", s.conv.stride},
                 {"pad", s.conv.pad},       {"act", act_name(s.conv.act)}};
  }
  j["head"] = to_json(s.head);
  j["input_shift"] = s.input_shift;
  j["input_scale"] = s.input_scale;
  return j;
}

inline op::EncoderSpec encoder_spec_from(const json& j) {
  op::EncoderSpec s;
  s.use_conv = j.at("use_conv").get<bool>();
  if (s.use_conv) {
    const json& c = j.at("conv");
    s.conv.in_ch = c.at("in_ch").get<std::size_t>();
    s.conv.height = c.at("height").get<std::size_t>();
    s.conv.width = c.at("width").get<std::size_t>();
    s.conv.channels = c.at("channels").get<std::vector<std::size_t>>();
    s.conv.kernel = c.at("kernel").get<std::size_t>();
    s.conv.stride = c.at("stride").get<std::size_t>();
    s.conv.pad = c.at("pad").get<std::size_t>();
    s.conv.act = act_from_name(c.at("act").get<std::string>());
  }
  s.head = mlp_spec_from(j.at("head"));
  s.input_shift = j.at("input_shift").get<double>();
  s.input_scale = j.at("input_scale").get<double>();
  return s;
}

inline json to_json(const op::MultiONetSpec& s) {
  return json{{"branch", to_json(s.branch)}, {"trunk", to_json(s.trunk)}};
}

inline op::MultiONetSpec multionet_spec_from(const json& j) {
  op::MultiONetSpec s;
  s.branch = mlp_spec_from(j.at("branch"));
  s.trunk = mlp_spec_from(j.at("trunk"));
  return s;
}

inline json to_json(const Hyperparams& h) {
  return json{{"lambda_pde", h.lambda_pde}, {"lambda_rec", h.lambda_rec},
              {"lambda_bc", h.lambda_bc},   {"lambda_data", h.lambda_data},
              {"batch", h.batch},           {"epochs", h.epochs},
              {"lr0", h.lr0},               {"lr_period", h.lr_period},
              {"d_beta", h.d_beta},         {"m_particles", h.m_particles},
              {"n_int", h.n_int},           {"radius_frac", h.radius_frac},
              {"radius_abs", h.radius_abs}, {"clip_norm", h.clip_norm},
              {"f", h.f},                   {"nu", h.nu},
              {"alpha", h.alpha},           {"ubar", h.ubar},
              {"fixed_particles", h.fixed_particles}};
}

inline Hyperparams hyper_from(const json& j) {
  Hyperparams h;
  h.lambda_pde = j.at("lambda_pde").get<double>();
  h.lambda_rec = j.at("lambda_rec").get<double>();
  h.lambda_bc = j.at("lambda_bc").get<double>();
  h.lambda_data = j.at("lambda_data").get<double>();
  h.batch = j.at("batch").get<std::size_t>();
  h.epochs = j.at("epochs").get<std::size_t>();
  h.lr0 = j.at("lr0").get<double>();
  h.lr_period = j.at("lr_period").get<std::size_t>();
  h.d_beta = j.at("d_beta").get<std::size_t>();
  h.m_particles = j.at("m_particles").get<std::size_t>();
  h.n_int = j.at("n_int").get<std::size_t>();
  h.radius_frac = j.at("radius_frac").get<double>();
  h.radius_abs = j.at("radius_abs").get<double>();
  h.clip_norm = j.at("clip_norm").get<double>();
  h.f = j.at("f").get<double>();
  h.nu = j.at("nu").get<double>();
  h.alpha = j.at("alpha").get<double>();
  h.ubar = j.at("ubar").get<double>();
  h.fixed_particles = j.at("fixed_particles").get<bool>();
  return h;
}

} // namespace genop::model
