#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "genop/inv/invert.hpp"
#include "genop/model/state.hpp"
#include "genop/ref/dataset.hpp"

namespace genop::cli {

using io::json;

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Config-file tree; every value can be overridden by a CLI flag (flags win).
// Unknown keys are rejected so silent typos cannot change an experiment.
struct RunConfig {
  std::string kind = "darcy-binary";
  std::string preset = "desk";
  std::uint64_t seed = 1;
  bool fixed_particles = false;

  // dataset generation
  std::size_t n = 64;
  std::size_t sensor_n = 16;
  double labeled_fraction = 0.0;
  double grf_tau2 = 9.0, grf_power = 2.0, grf_amplitude = 1.0;
  std::size_t grf_modes = 16;
  double grf_mean = 0.0, grf_mean_lo = 0.0, grf_mean_hi = 0.0;
  std::size_t label_refine = 4;
  std::size_t label_nt = 51;

  // training hyperparameters (preset defaults applied first)
  model::Hyperparams hyper;
  bool hyper_from_preset = true;

  // inversion settings
  double snr_db = 100.0;
  std::size_t k_mc = 5;
  double inv_lambda_data = 50.0;
  std::string inv_mode = "point";          // point | gaussian
  std::string binary_mode = "relaxed";     // relaxed | expectation
  std::size_t inv_iters = 1000;
  double inv_lr = 1e-2;
  std::size_t inv_decay_every = 250;
  double inv_decay_factor = 1.0 / 3.0;
  std::size_t inv_m = 100;
  std::size_t inv_n_int = 25;
  double inv_tau = 0.1;
  std::size_t obs_count = 100;
  std::size_t obs_index = 0;

  ref::DataKind data_kind() const { return ref::data_kind_from(kind); }
  model::Preset preset_kind() const { return model::preset_from(preset); }

  void apply_preset_defaults() {
    model::Hyperparams base = model::make_hyper(data_kind(), preset_kind());
    base.fixed_particles = fixed_particles;
    hyper = base;
  }

  ref::GrfSpec grf_spec() const {
    ref::GrfSpec g;
    g.basis = data_kind() == ref::DataKind::BurgersIC ? ref::GrfSpec::Basis::Sine1d
                                                      : ref::GrfSpec::Basis::Cosine2d;
    g.tau2 = grf_tau2;
    g.power = grf_power;
    g.amplitude = grf_amplitude;
    g.modes = grf_modes;
    g.mean = grf_mean;
    if (data_kind() == ref::DataKind::DarcyBinary) {
      g.cutoff = true;
      g.cutoff_hi = 10.0;
      g.cutoff_lo = 5.0;
    }
    return g;
  }

  ref::DatasetSpec dataset_spec() const {
    ref::DatasetSpec d;
    d.kind = data_kind();
    d.count = n;
    d.sensor_n = sensor_n;
    d.labeled_fraction = labeled_fraction;
    d.grf = grf_spec();
    d.mean_lo = grf_mean_lo;
    d.mean_hi = grf_mean_hi;
    d.label_refine = label_refine;
    d.label_nt_store = label_nt;
    d.f = hyper.f;
    d.nu = hyper.nu;
    d.alpha = hyper.alpha;
    d.ubar = hyper.ubar;
    return d;
  }

  inv::InversionOptions inversion_options(const model::TrainState& st) const {
    inv::InversionOptions o;
    o.iters = inv_iters;
    o.lr = inv_lr;
    o.decay_every = inv_decay_every;
    o.decay_factor = inv_decay_factor;
    o.k_mc = k_mc;
    o.lambda_pde = hyper.lambda_pde;
    o.lambda_data = inv_lambda_data;
    o.m_particles = inv_m;
    o.n_int = inv_n_int;
    o.radius = st.hyper.radius_for(st.specs.domain);
    o.gaussian = inv_mode == "gaussian";
    o.relaxed_binary = binary_mode == "relaxed";
    o.tau = inv_tau;
    o.seed = seed;
    return o;
  }

  json echo() const {
    json j;
    j["kind"] = kind;
    j["preset"] = preset;
    j["seed"] = seed;
    j["particles"] = fixed_particles ? "fixed" : "resampled";
    j["dataset"] = {{"n", n},
                    {"sensor_n", sensor_n},
                    {"labeled_fraction", labeled_fraction},
                    {"grf", {{"tau2", grf_tau2}, {"power", grf_power}, {"amplitude", grf_amplitude},
                             {"modes", grf_modes}, {"mean", grf_mean}, {"mean_lo", grf_mean_lo},
                             {"mean_hi", grf_mean_hi}}},
                    {"label_refine", label_refine},
                    {"label_nt", label_nt}};
    j["hyper"] = model::to_json(hyper);
    j["inversion"] = {{"snr", snr_db},
                      {"k_mc", k_mc},
                      {"lambda_data", inv_lambda_data},
                      {"mode", inv_mode},
                      {"binary_mode", binary_mode},
                      {"iters", inv_iters},
                      {"lr", inv_lr},
                      {"decay_every", inv_decay_every},
                      {"decay_factor", inv_decay_factor},
                      {"m", inv_m},
                      {"n_int", inv_n_int},
                      {"tau", inv_tau},
                      {"obs_count", obs_count},
                      {"obs_index", obs_index}};
    return j;
  }
};

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("unknown config key '" + it.key() + "' in " + where);
}

template <typename T>
void maybe(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

} // namespace detail

// Parse a config file tree into RunConfig. Preset defaults are applied first
// (so the file only needs to state deviations), then file values, then flags.
inline RunConfig parse_config(const json& j) {
  using detail::maybe;
  RunConfig c;
  detail::require_keys(
      j, {"kind", "preset", "seed", "particles", "dataset", "hyper", "inversion"}, "root");
  maybe(j, "kind", c.kind);
  maybe(j, "preset", c.preset);
  maybe(j, "seed", c.seed);
  if (j.contains("particles")) {
    std::string p = j.at("particles").get<std::string>();
    if (p != "fixed" && p != "resampled") throw ValidationError("particles must be fixed|resampled");
    c.fixed_particles = p == "fixed";
  }
  c.apply_preset_defaults();

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    detail::require_keys(d,
                         {"n", "sensor_n", "labeled_fraction", "grf", "label_refine", "label_nt"},
                         "dataset");
    maybe(d, "n", c.n);
    maybe(d, "sensor_n", c.sensor_n);
    maybe(d, "labeled_fraction", c.labeled_fraction);
    maybe(d, "label_refine", c.label_refine);
    maybe(d, "label_nt", c.label_nt);
    if (d.contains("grf")) {
      const json& g = d.at("grf");
      detail::require_keys(g, {"tau2", "power", "amplitude", "modes", "mean", "mean_lo", "mean_hi"},
                           "dataset.grf");
      maybe(g, "tau2", c.grf_tau2);
      maybe(g, "power", c.grf_power);
      maybe(g, "amplitude", c.grf_amplitude);
      maybe(g, "modes", c.grf_modes);
      maybe(g, "mean", c.grf_mean);
      maybe(g, "mean_lo", c.grf_mean_lo);
      maybe(g, "mean_hi", c.grf_mean_hi);
    }
  }

  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    detail::require_keys(h,
                         {"lambda_pde", "lambda_rec", "lambda_bc", "lambda_data", "batch", "epochs",
                          "lr0", "lr_period", "d_beta", "m_particles", "n_int", "radius_frac",
                          "radius_abs", "clip_norm", "f", "nu", "alpha", "ubar"},
                         "hyper");
    maybe(h, "lambda_pde", c.hyper.lambda_pde);
    maybe(h, "lambda_rec", c.hyper.lambda_rec);
    maybe(h, "lambda_bc", c.hyper.lambda_bc);
    maybe(h, "lambda_data", c.hyper.lambda_data);
    maybe(h, "batch", c.hyper.batch);
    maybe(h, "epochs", c.hyper.epochs);
    maybe(h, "lr0", c.hyper.lr0);
    maybe(h, "lr_period", c.hyper.lr_period);
    maybe(h, "d_beta", c.hyper.d_beta);
    maybe(h, "m_particles", c.hyper.m_particles);
    maybe(h, "n_int", c.hyper.n_int);
    maybe(h, "radius_frac", c.hyper.radius_frac);
    maybe(h, "radius_abs", c.hyper.radius_abs);
    maybe(h, "clip_norm", c.hyper.clip_norm);
    maybe(h, "f", c.hyper.f);
    maybe(h, "nu", c.hyper.nu);
    maybe(h, "alpha", c.hyper.alpha);
    maybe(h, "ubar", c.hyper.ubar);
  }
  c.hyper.fixed_particles = c.fixed_particles;

  if (j.contains("inversion")) {
    const json& v = j.at("inversion");
    detail::require_keys(v,
                         {"snr", "k_mc", "lambda_data", "mode", "binary_mode", "iters", "lr",
                          "decay_every", "decay_factor", "m", "n_int", "tau", "obs_count",
                          "obs_index"},
                         "inversion");
    maybe(v, "snr", c.snr_db);
    maybe(v, "k_mc", c.k_mc);
    maybe(v, "lambda_data", c.inv_lambda_data);
    maybe(v, "mode", c.inv_mode);
    maybe(v, "binary_mode", c.binary_mode);
    maybe(v, "iters", c.inv_iters);
    maybe(v, "lr", c.inv_lr);
    maybe(v, "decay_every", c.inv_decay_every);
    maybe(v, "decay_factor", c.inv_decay_factor);
    maybe(v, "m", c.inv_m);
    maybe(v, "n_int", c.inv_n_int);
    maybe(v, "tau", c.inv_tau);
    maybe(v, "obs_count", c.obs_count);
    maybe(v, "obs_index", c.obs_index);
    if (c.inv_mode != "point" && c.inv_mode != "gaussian")
      throw ValidationError("inversion.mode must be point|gaussian");
    if (c.binary_mode != "relaxed" && c.binary_mode != "expectation")
      throw ValidationError("inversion.binary_mode must be relaxed|expectation");
  }
  return c;
}

} // namespace genop::cli
