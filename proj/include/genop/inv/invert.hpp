#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genop/core/adam.hpp"
#include "genop/core/graph.hpp"
#include "genop/core/nn.hpp"
#include "genop/inv/observe.hpp"
#include "genop/model/assembly.hpp"
#include "genop/model/state.hpp"

namespace genop::inv {

// Deterministic forward pass through the trained generative pair:
// beta = encode(a_hat), u = lifted operator at the query coordinates.
inline Tensor forward_predict(const model::TrainState& st, const Tensor& a_hat,
                              const Tensor& query_coords) {
  Tensor betas = op::encode(st.specs.encoder, st.encoder, a_hat);
  return op::solution_eval_batch(st.specs.solution, st.solution, st.specs.lift, betas,
                                 query_coords);
}

struct InversionOptions {
  std::size_t iters = 1000;
  double lr = 1e-2;
  std::size_t decay_every = 250;
  double decay_factor = 1.0 / 3.0;
  std::size_t k_mc = 5;
  double lambda_pde = 1.0;
  double lambda_data = 50.0;
  std::size_t m_particles = 100;
  std::size_t n_int = 25;
  double radius = 0.05;
  bool gaussian = false;          // mean+spread variational mode
  bool relaxed_binary = true;     // reparameterized concrete draws vs expectation
  double tau = 0.1;
  std::size_t reparam_input = 16;
  std::size_t spread_draws = 64;  // decoded-field spread sample count (gaussian mode)
  std::uint64_t seed = 0;
  bool fixed_randomness = false;  // freeze particles and MC draws (gradient checks)
};

struct InversionResult {
  std::vector<double> beta;         // point estimate (tanh-bounded)
  std::vector<double> beta_spread;  // positive spreads (gaussian mode)
  std::vector<double> trace;        // objective value per iteration
  double initial_objective = 0.0, final_objective = 0.0;
  Tensor probability;  // binary: phase-1 probability at query points
  Tensor recovered;    // decoded field at query points
  Tensor spread;       // per-point std of decoded field (gaussian mode)
};

namespace detail {

// Frozen networks enter the graph as constants; only the reparameterization
// net carries gradients.
inline MlpVars mlp_const(Graph& g, const MlpParams& p) {
  MlpVars v;
  for (const auto& w : p.W) v.W.push_back(g.constant(w));
  for (const auto& b : p.b) v.b.push_back(g.constant(b));
  return v;
}

inline op::MultiONetVars multionet_const(Graph& g, const op::MultiONetParams& p) {
  op::MultiONetVars v;
  v.branch = mlp_const(g, p.branch);
  v.trunk = mlp_const(g, p.trunk);
  v.layer_weights = g.constant(p.layer_weights);
  v.bias = g.constant(p.bias);
  return v;
}

inline std::vector<Var> as_constants(Graph& g, const std::vector<Tensor>& ts) {
  std::vector<Var> out;
  out.reserve(ts.size());
  for (const Tensor& t : ts) out.push_back(g.constant(t));
  return out;
}

} // namespace detail

// One evaluation of the inversion objective as a graph; shared by the
// optimizer loop and by gradient checks. Returns the objective Var (to be
// maximized) given the reparameterization-net leaves.
struct InversionGraphInputs {
  const model::TrainState* st = nullptr;
  const Observations* obs = nullptr;
  const InversionOptions* opt = nullptr;
  const std::vector<Tensor>* obs_trunk = nullptr;   // frozen features at obs points
  const std::vector<double>* psi_obs = nullptr;
  const model::detail::QuadConstants* qc = nullptr;
  const MlpDualFeatures* sol_nodes = nullptr;       // trunk features at quadrature nodes
  const std::vector<Tensor>* dec_nodes = nullptr;
  Rng* draw_rng = nullptr;
};

inline Var inversion_objective_g(Graph& g, const MlpSpec& rspec, const MlpVars& rv,
                                 const Tensor& rinput, const InversionGraphInputs& in,
                                 Var* beta_out = nullptr) {
  const model::ModelSpecs& specs = in.st->specs;
  const InversionOptions& opt = *in.opt;
  std::size_t d_beta = specs.encoder.latent_dim();
  std::size_t k_obs = in.obs->count();
  bool binary = specs.decoder_binary;
  double hi = specs.binary_hi, lo = specs.binary_lo;
  double sigma_rec = 1.0 / std::sqrt(in.st->hyper.lambda_rec);

  Var net_out = mlp_forward_g(g, rspec, rv, g.constant(rinput));
  Var beta, entropy;
  bool has_entropy = false;
  if (opt.gaussian) {
    Var mean_raw = g.slice_cols(net_out, 0, d_beta);
    Var log_spread = g.slice_cols(net_out, d_beta, 2 * d_beta);
    Tensor eps({1, d_beta});
    for (double& v : eps.data) v = in.draw_rng->normal();
    Var z = g.add(mean_raw, g.mul(g.exp_(log_spread), g.constant(std::move(eps))));
    beta = g.tanh_(z);
    // entropy of the tanh-squashed Gaussian: sum s + 2 sum(log2 - z - softplus(-2z))
    Var sp = g.softplus_(g.scale(z, -2.0));
    Var inner = g.add_const(g.scale(g.add(z, sp), -1.0), std::log(2.0));
    entropy = g.add(g.sum_all(log_spread), g.scale(g.sum_all(inner), 2.0));
    has_entropy = true;
  } else {
    beta = net_out;  // Tanh output keeps the estimate inside the prior box
  }
  if (beta_out) *beta_out = beta;

  op::MultiONetVars sol_v = detail::multionet_const(g, in.st->solution);
  op::MultiONetVars dec_v = detail::multionet_const(g, in.st->decoder);
  auto sol_branch = mlp_features_g(g, specs.solution.branch, sol_v.branch, beta);

  // observation likelihood
  auto obs_feats = detail::as_constants(g, *in.obs_trunk);
  Var u_obs = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, obs_feats, true);
  u_obs = g.mul_rowvec(u_obs, g.constant(Tensor({k_obs}, *in.psi_obs)));
  Tensor obs_row({1, k_obs});
  std::copy(in.obs->values.begin(), in.obs->values.end(), obs_row.data.begin());
  Var diff = g.sub(u_obs, g.constant(std::move(obs_row)));
  double data_const = 0.5 * static_cast<double>(k_obs) * std::log(opt.lambda_data);
  Var data_term =
      g.add_const(g.scale(g.sum_all(g.mul(diff, diff)), -0.5 * opt.lambda_data), data_const);

  // residual conditioning, Monte-Carlo over decoder draws
  const model::detail::QuadConstants& qc = *in.qc;
  std::size_t q_nodes = qc.coords.rows(), n_int = in.qc->qw.size() / in.opt->m_particles;
  auto node_feats = detail::as_constants(g, in.sol_nodes->value);
  auto node_t1 = detail::as_constants(g, in.sol_nodes->tangent[0]);
  auto node_t2 = detail::as_constants(g, in.sol_nodes->tangent[1]);
  auto dec_feats = detail::as_constants(g, *in.dec_nodes);

  Var u_tilde = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, node_feats, true);
  Var du1 = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, node_t1, false);
  Var du2 = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, node_t2, false);
  Var psi = g.constant(qc.psi);
  Var ux1 = g.add(g.mul_rowvec(u_tilde, g.constant(qc.dpsi_x1)), g.mul_rowvec(du1, psi));
  Var ux2 = g.add(g.mul_rowvec(u_tilde, g.constant(qc.dpsi_x2)), g.mul_rowvec(du2, psi));
  Var gradw_dot =
      g.add(g.mul_rowvec(ux1, g.constant(qc.gw_x1)), g.mul_rowvec(ux2, g.constant(qc.gw_x2)));
  if (specs.form == weak::ResidualForm::NonlinearPoisson) {
    Var u = g.mul_rowvec(u_tilde, psi);
    Var expo = g.exp_(g.scale(g.add_const(u, -in.st->hyper.ubar), in.st->hyper.alpha));
    gradw_dot = g.mul(gradw_dot, expo);
  }

  auto dec_branch = mlp_features_g(g, specs.decoder.branch, dec_v.branch, beta);
  Var mu_nodes = op::multionet_combine_g(g, specs.decoder, dec_v, dec_branch, dec_feats, true);

  std::size_t draws = (binary && !opt.relaxed_binary) ? 1 : opt.k_mc;
  double m_half_log = 0.5 * static_cast<double>(opt.m_particles) * std::log(opt.lambda_pde);
  Tensor neg_fw = qc.fw_row;
  for (double& v : neg_fw.data) v = -v;
  Var neg_fw_c = g.constant(std::move(neg_fw));
  Var qw_c = g.constant(qc.qw);

  std::vector<Var> log_liks;
  for (std::size_t k = 0; k < draws; ++k) {
    Var a_k;
    if (binary) {
      Var logits = mu_nodes;
      if (opt.relaxed_binary) {
        Tensor noise({1, q_nodes});
        for (double& v : noise.data) v = in.draw_rng->logistic();
        logits = g.scale(g.add(mu_nodes, g.constant(std::move(noise))), 1.0 / opt.tau);
      }
      a_k = g.add_const(g.scale(g.sigmoid_(logits), hi - lo), lo);
    } else {
      Tensor noise({1, q_nodes});
      for (double& v : noise.data) v = sigma_rec * in.draw_rng->normal();
      a_k = g.add(mu_nodes, g.constant(std::move(noise)));
    }
    Var integrand = g.mul(a_k, gradw_dot);
    Var r = g.chunk_sum_cols(g.mul_rowvec(integrand, qw_c), n_int);  // [1,M]
    r = g.add_rowvec(r, neg_fw_c);
    log_liks.push_back(
        g.add_const(g.scale(g.sum_all(g.mul(r, r)), -0.5 * opt.lambda_pde), m_half_log));
  }
  Var resid_term;
  if (draws == 1) {
    resid_term = log_liks[0];
  } else {
    double mx = g.val(log_liks[0]).data[0];
    for (Var v : log_liks) mx = std::max(mx, g.val(v).data[0]);
    Var acc;
    for (std::size_t k = 0; k < draws; ++k) {
      Var e = g.exp_(g.add_const(log_liks[k], -mx));
      acc = k == 0 ? e : g.add(acc, e);
    }
    resid_term = g.add_const(g.log_(acc), mx - std::log(static_cast<double>(draws)));
  }

  Var objective = g.add(data_term, resid_term);
  if (has_entropy) objective = g.add(objective, entropy);
  return objective;  // log p(beta) = 0 inside the prior box
}

inline InversionResult invert(const model::TrainState& st, const Observations& obs,
                              const Tensor& query_coords, const InversionOptions& opt) {
  if (!ref::is_darcy_family(st.specs.kind))
    throw std::invalid_argument("invert: only the Darcy-family problems are supported");
  if (obs.count() == 0) throw std::invalid_argument("invert: empty observations");
  if (opt.k_mc == 0) throw std::invalid_argument("invert: k_mc must be >= 1");
  if (!st.specs.has_decoder) throw std::invalid_argument("invert: model carries no decoder");
  const model::ModelSpecs& specs = st.specs;
  std::size_t d_beta = specs.encoder.latent_dim();

  MlpSpec rspec;
  rspec.widths = {opt.reparam_input, 64, 64, 128, opt.gaussian ? 2 * d_beta : d_beta};
  rspec.hidden = Act::ReLU;
  rspec.output = opt.gaussian ? std::optional<Act>{} : std::optional<Act>{Act::Tanh};
  Rng init_rng = Rng::stream(opt.seed, "inversion-init");
  MlpParams rparams = mlp_init(rspec, init_rng);
  std::vector<Tensor*> rp;
  for (auto& w : rparams.W) rp.push_back(&w);
  for (auto& b : rparams.b) rp.push_back(&b);
  AdamState adam = AdamState::like(rp);
  Tensor rinput = Tensor::full({1, opt.reparam_input}, 1.0);

  std::vector<Tensor> obs_trunk = mlp_features(specs.solution.trunk, st.solution.trunk, obs.points);
  std::vector<double> psi_obs(obs.count());
  for (std::size_t i = 0; i < obs.count(); ++i)
    psi_obs[i] = specs.lift.psi(&obs.points.data[i * obs.points.cols()]);

  weak::BallQuadrature quad = weak::BallQuadrature::for_dim(2, opt.n_int);
  model::Hyperparams hq = st.hyper;

  InversionResult res;
  res.trace.reserve(opt.iters);
  double lr = opt.lr;

  for (std::size_t iter = 0; iter < opt.iters; ++iter) {
    if (iter > 0 && opt.decay_every > 0 && iter % opt.decay_every == 0) lr *= opt.decay_factor;
    std::uint64_t sub = opt.fixed_randomness ? 0 : iter;
    Rng prng = Rng::stream(opt.seed, "inversion-particles", sub);
    std::vector<weak::Particle> particles =
        weak::sample_particles(specs.domain, opt.m_particles, opt.radius, prng);
    model::detail::QuadConstants qc = model::detail::quad_constants(specs, hq, particles, quad);
    MlpDualFeatures sol_nodes =
        mlp_features_dual(specs.solution.trunk, st.solution.trunk, qc.coords, {0, 1});
    std::vector<Tensor> dec_nodes = mlp_features(specs.decoder.trunk, st.decoder.trunk, qc.coords);
    Rng draw_rng = Rng::stream(opt.seed, "inversion-draws", sub);

    Graph g;
    MlpVars rv;
    std::vector<Var> rvars;
    for (auto& w : rparams.W) { Var v = g.leaf(w); rv.W.push_back(v); rvars.push_back(v); }
    for (auto& b : rparams.b) { Var v = g.leaf(b); rv.b.push_back(v); rvars.push_back(v); }

    InversionGraphInputs in;
    in.st = &st;
    in.obs = &obs;
    in.opt = &opt;
    in.obs_trunk = &obs_trunk;
    in.psi_obs = &psi_obs;
    in.qc = &qc;
    in.sol_nodes = &sol_nodes;
    in.dec_nodes = &dec_nodes;
    in.draw_rng = &draw_rng;

    Var objective = inversion_objective_g(g, rspec, rv, rinput, in);
    double jval = g.val(objective).data[0];
    if (!std::isfinite(jval))
      throw std::runtime_error("invert: non-finite objective at iteration " + std::to_string(iter));
    res.trace.push_back(jval);
    Var loss = g.scale(objective, -1.0);
    g.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(rvars.size());
    for (Var v : rvars) grads.push_back(g.grad_or_zero(v));
    clip_grad_norm(grads, 100.0);
    adam_step(rp, grads, adam, lr);
  }
  res.initial_objective = res.trace.empty() ? 0.0 : res.trace.front();
  res.final_objective = res.trace.empty() ? 0.0 : res.trace.back();

  // decode the final estimate
  Tensor net_out = mlp_forward(rspec, rparams, rinput);
  Tensor beta_row({1, d_beta});
  if (opt.gaussian) {
    res.beta_spread.resize(d_beta);
    for (std::size_t j = 0; j < d_beta; ++j) {
      beta_row.data[j] = std::tanh(net_out.data[j]);
      res.beta_spread[j] = std::exp(net_out.data[d_beta + j]);
    }
  } else {
    std::copy(net_out.data.begin(), net_out.data.end(), beta_row.data.begin());
  }
  res.beta.assign(beta_row.data.begin(), beta_row.data.end());

  Tensor mu_q = op::multionet_eval_batch(specs.decoder, st.decoder, beta_row, query_coords);
  std::size_t nq = query_coords.rows();
  res.recovered = Tensor({nq});
  if (specs.decoder_binary) {
    res.probability = Tensor({nq});
    for (std::size_t i = 0; i < nq; ++i) {
      double p = sigmoid(mu_q.data[i]);
      res.probability[i] = p;
      res.recovered[i] = op::binary_field_value(p, specs.binary_hi, specs.binary_lo);
    }
  } else {
    std::copy(mu_q.data.begin(), mu_q.data.end(), res.recovered.data.begin());
  }

  if (opt.gaussian) {
    // per-point spread of the decoded field over latent draws
    Rng srng = Rng::stream(opt.seed, "inversion-spread");
    Tensor mean({nq}), m2({nq});
    for (std::size_t s = 0; s < opt.spread_draws; ++s) {
      Tensor b({1, d_beta});
      for (std::size_t j = 0; j < d_beta; ++j)
        b.data[j] = std::tanh(net_out.data[j] + res.beta_spread[j] * srng.normal());
      Tensor mu_s = op::multionet_eval_batch(specs.decoder, st.decoder, b, query_coords);
      for (std::size_t i = 0; i < nq; ++i) {
        double v = specs.decoder_binary
                       ? specs.binary_lo + (specs.binary_hi - specs.binary_lo) * sigmoid(mu_s.data[i])
                       : mu_s.data[i];
        double d = v - mean[i];
        mean[i] += d / static_cast<double>(s + 1);
        m2[i] += d * (v - mean[i]);
      }
    }
    res.spread = Tensor({nq});
    for (std::size_t i = 0; i < nq; ++i)
      res.spread[i] = std::sqrt(m2[i] / std::max<std::size_t>(1, opt.spread_draws - 1));
  }
  return res;
}

} // namespace genop::inv
