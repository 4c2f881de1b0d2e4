#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "genop/io/container.hpp"
#include "genop/model/state.hpp"

namespace genop::model {

// Checkpoint = container blob: JSON header (specs, hyperparameters, epoch,
// seed, parameter manifest) + float64 payload holding, in declaration order,
// the phi group, the theta group, then the Adam moments (m, v) of each group.

namespace detail {

inline MlpParams mlp_zeros(const MlpSpec& s) {
  MlpParams p;
  for (std::size_t l = 0; l + 1 < s.widths.size(); ++l) {
    p.W.push_back(Tensor({s.widths[l], s.widths[l + 1]}));
    p.b.push_back(Tensor({s.widths[l + 1]}));
  }
  return p;
}

inline op::EncoderParams encoder_zeros(const op::EncoderSpec& s) {
  op::EncoderParams p;
  if (s.use_conv) {
    std::size_t cin = s.conv.in_ch;
    for (std::size_t c : s.conv.channels) {
      p.conv.W.push_back(Tensor({c, cin, s.conv.kernel, s.conv.kernel}));
      p.conv.b.push_back(Tensor({c}));
      cin = c;
    }
  }
  p.head = mlp_zeros(s.head);
  return p;
}

inline op::MultiONetParams multionet_zeros(const op::MultiONetSpec& s) {
  op::MultiONetParams p;
  p.branch = mlp_zeros(s.branch);
  p.trunk = mlp_zeros(s.trunk);
  p.layer_weights = Tensor({s.paired_layers()});
  p.bias = Tensor({1});
  return p;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, TrainState& st,
                            const io::json& config_echo = io::json::object()) {
  io::json h;
  h["format"] = "checkpoint";
  h["version"] = 1;
  h["kind"] = ref::data_kind_name(st.specs.kind);
  h["seed"] = st.seed;
  h["epoch"] = st.epoch;
  h["hyper"] = to_json(st.hyper);
  h["specs"] = io::json{{"encoder", to_json(st.specs.encoder)},
                        {"solution", to_json(st.specs.solution)},
                        {"has_decoder", st.specs.has_decoder},
                        {"decoder_binary", st.specs.decoder_binary},
                        {"binary_hi", st.specs.binary_hi},
                        {"binary_lo", st.specs.binary_lo}};
  if (st.specs.has_decoder) h["specs"]["decoder"] = to_json(st.specs.decoder);

  io::json manifest = io::json::array();
  auto add = [&](const char* group) {
    return [&h, &manifest, group](const std::string& name, Tensor& t) {
      manifest.push_back(io::json{{"name", name}, {"shape", t.shape}, {"group", group}});
    };
  };
  visit_encoder_params(st.encoder, add("phi"));
  visit_multionet_params("solution", st.solution, add("theta"));
  if (st.specs.has_decoder) visit_multionet_params("decoder", st.decoder, add("theta"));
  h["params"] = manifest;
  h["adam"] = io::json{{"beta1", st.adam_phi.beta1},
                       {"beta2", st.adam_phi.beta2},
                       {"eps", st.adam_phi.eps},
                       {"phi_step", st.adam_phi.step},
                       {"theta_step", st.adam_theta.step}};
  h["config"] = config_echo;

  io::BlobWriter w(path, h);
  auto dump = [&w](const std::string&, Tensor& t) { w.write_f64(t.data); };
  visit_encoder_params(st.encoder, dump);
  visit_multionet_params("solution", st.solution, dump);
  if (st.specs.has_decoder) visit_multionet_params("decoder", st.decoder, dump);
  for (const Tensor& t : st.adam_phi.m) w.write_f64(t.data);
  for (const Tensor& t : st.adam_phi.v) w.write_f64(t.data);
  for (const Tensor& t : st.adam_theta.m) w.write_f64(t.data);
  for (const Tensor& t : st.adam_theta.v) w.write_f64(t.data);
  w.finish();
}

inline TrainState load_checkpoint(const std::string& path) {
  io::BlobReader r(path);
  const io::json& h = r.header();
  if (h.value("format", "") != "checkpoint")
    throw std::runtime_error(path + ": not a checkpoint file");
  TrainState st;
  st.seed = h.at("seed").get<std::uint64_t>();
  st.epoch = h.at("epoch").get<std::uint64_t>();
  st.hyper = hyper_from(h.at("hyper"));
  const io::json& sp = h.at("specs");
  st.specs.kind = ref::data_kind_from(h.at("kind").get<std::string>());
  st.specs.encoder = encoder_spec_from(sp.at("encoder"));
  st.specs.solution = multionet_spec_from(sp.at("solution"));
  st.specs.has_decoder = sp.at("has_decoder").get<bool>();
  st.specs.decoder_binary = sp.at("decoder_binary").get<bool>();
  st.specs.binary_hi = sp.at("binary_hi").get<double>();
  st.specs.binary_lo = sp.at("binary_lo").get<double>();
  if (st.specs.has_decoder) st.specs.decoder = multionet_spec_from(sp.at("decoder"));
  bool darcy = ref::is_darcy_family(st.specs.kind);
  st.specs.domain = darcy ? weak::Domain::unit_square() : weak::Domain::interval(-1.0, 1.0);
  st.specs.lift.kind = darcy ? op::LiftKind::DarcyBox : op::LiftKind::BurgersLine;
  st.specs.form = st.specs.kind == ref::DataKind::NonlinearPoisson
                      ? weak::ResidualForm::NonlinearPoisson
                  : darcy ? weak::ResidualForm::Darcy
                          : weak::ResidualForm::Burgers;

  st.encoder = detail::encoder_zeros(st.specs.encoder);
  st.solution = detail::multionet_zeros(st.specs.solution);
  if (st.specs.has_decoder) st.decoder = detail::multionet_zeros(st.specs.decoder);

  // verify manifest against reconstructed shapes, then stream the payload
  const io::json& manifest = h.at("params");
  std::size_t idx = 0;
  auto check = [&](const std::string& name, Tensor& t) {
    const io::json& m = manifest.at(idx++);
    if (m.at("name").get<std::string>() != name ||
        m.at("shape").get<std::vector<std::size_t>>() != t.shape)
      throw std::runtime_error("checkpoint manifest mismatch at " + name);
  };
  visit_encoder_params(st.encoder, check);
  visit_multionet_params("solution", st.solution, check);
  if (st.specs.has_decoder) visit_multionet_params("decoder", st.decoder, check);

  auto fill = [&r](const std::string&, Tensor& t) { r.read_f64(t.data.data(), t.size()); };
  visit_encoder_params(st.encoder, fill);
  visit_multionet_params("solution", st.solution, fill);
  if (st.specs.has_decoder) visit_multionet_params("decoder", st.decoder, fill);

  st.adam_phi = AdamState::like(phi_params(st));
  st.adam_theta = AdamState::like(theta_params(st));
  const io::json& ad = h.at("adam");
  st.adam_phi.beta1 = st.adam_theta.beta1 = ad.at("beta1").get<double>();
  st.adam_phi.beta2 = st.adam_theta.beta2 = ad.at("beta2").get<double>();
  st.adam_phi.eps = st.adam_theta.eps = ad.at("eps").get<double>();
  st.adam_phi.step = ad.at("phi_step").get<std::uint64_t>();
  st.adam_theta.step = ad.at("theta_step").get<std::uint64_t>();
  for (Tensor& t : st.adam_phi.m) r.read_f64(t.data.data(), t.size());
  for (Tensor& t : st.adam_phi.v) r.read_f64(t.data.data(), t.size());
  for (Tensor& t : st.adam_theta.m) r.read_f64(t.data.data(), t.size());
  for (Tensor& t : st.adam_theta.v) r.read_f64(t.data.data(), t.size());
  return st;
}

} // namespace genop::model
