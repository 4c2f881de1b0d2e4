#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "genop/core/graph.hpp"
#include "genop/model/elbo.hpp"
#include "genop/model/state.hpp"
#include "genop/weak/quadrature.hpp"
#include "genop/weak/wendland.hpp"

namespace genop::model {

// One training batch as seen by the graph builder. Particles (and hence the
// quadrature points) are shared by every sample in the batch: the weighting
// functions w_j are global test functionals, so the trunk features over the
// quadrature nodes are computed once per batch.
struct BatchData {
  Tensor a_hat;                            // [B, d_a] sensor values
  std::vector<std::vector<double>> field_axes;  // sensor grid axes (interp of a at nodes)
  std::vector<std::size_t> labeled_rows;   // batch-row indices with solutions
  Tensor labeled_u;                        // [L, P] solution values at label points
  Tensor label_coords;                     // [P, 2] coordinates of label points
  const std::vector<weak::Particle>* particles = nullptr;
  const weak::BallQuadrature* quad = nullptr;
  Tensor sensor_coords;                    // [d_a, 2] decoder / IC trunk inputs
};

struct AssembledBatch {
  std::unique_ptr<Graph> g;
  Var loss;  // scalar, minimized (negative batch-mean bound)
  std::vector<Tensor*> phi_params, theta_params;
  std::vector<Var> phi_vars, theta_vars;
  ElboReport report;
};

namespace detail {

inline void collect_vars(const op::EncoderVars& v, std::vector<Var>& out) {
  for (Var x : v.conv.W) out.push_back(x);
  for (Var x : v.conv.b) out.push_back(x);
  for (Var x : v.head.W) out.push_back(x);
  for (Var x : v.head.b) out.push_back(x);
}

inline void collect_vars(const op::MultiONetVars& v, std::vector<Var>& out) {
  for (Var x : v.branch.W) out.push_back(x);
  for (Var x : v.branch.b) out.push_back(x);
  for (Var x : v.trunk.W) out.push_back(x);
  for (Var x : v.trunk.b) out.push_back(x);
  out.push_back(v.layer_weights);
  out.push_back(v.bias);
}

// Bilinear interpolation weights of the sensor grid at arbitrary points,
// applied per batch row: out[i, q] = a_i(x_q).
inline Tensor interp_rows(const Tensor& a_hat, const std::vector<std::vector<double>>& axes,
                          const Tensor& points) {
  std::size_t B = a_hat.rows(), Q = points.rows();
  const auto& ax = axes[0];
  const auto& ay = axes[1];
  std::size_t ny = ay.size();
  Tensor out({B, Q});
  for (std::size_t q = 0; q < Q; ++q) {
    double x = points(q, 0), y = points(q, 1);
    auto locate = [](const std::vector<double>& a, double v) {
      std::size_t n = a.size();
      if (v <= a.front()) return std::pair<std::size_t, double>{0, 0.0};
      if (v >= a.back()) return std::pair<std::size_t, double>{n - 2, 1.0};
      std::size_t lo = 0, hi = n - 1;
      while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (a[mid] <= v) lo = mid; else hi = mid;
      }
      return std::pair<std::size_t, double>{lo, (v - a[lo]) / (a[lo + 1] - a[lo])};
    };
    auto [i0, tx] = locate(ax, x);
    auto [j0, ty] = locate(ay, y);
    std::size_t c00 = i0 * ny + j0, c01 = c00 + 1, c10 = (i0 + 1) * ny + j0, c11 = c10 + 1;
    double w00 = (1 - tx) * (1 - ty), w01 = (1 - tx) * ty, w10 = tx * (1 - ty), w11 = tx * ty;
    for (std::size_t i = 0; i < B; ++i) {
      const double* row = &a_hat.data[i * a_hat.cols()];
      out(i, q) = w00 * row[c00] + w01 * row[c01] + w10 * row[c10] + w11 * row[c11];
    }
  }
  return out;
}

struct QuadConstants {
  Tensor coords;   // [Q, 2] trunk inputs (x1,x2) or (x,t)
  Tensor psi;      // [Q]
  Tensor dpsi_x1;  // [Q] spatial lift gradient (dir 0)
  Tensor dpsi_x2;  // [Q] (Darcy only)
  Tensor w_row;    // [Q] kernel values
  Tensor gw_x1;    // [Q] kernel gradient, dir 0
  Tensor gw_x2;    // [Q] kernel gradient, dir 1 (Darcy only)
  Tensor qw;       // [Q] quadrature weights / unit-ball volume
  Tensor fw_row;   // [M] ball-average of f * w_j
};

inline QuadConstants quad_constants(const ModelSpecs& specs, const Hyperparams& hyper,
                                    const std::vector<weak::Particle>& particles,
                                    const weak::BallQuadrature& quad) {
  bool darcy = specs.form != weak::ResidualForm::Burgers;
  std::size_t M = particles.size(), NI = quad.count(), Q = M * NI;
  QuadConstants c;
  c.coords = Tensor({Q, 2});
  c.psi = Tensor({Q});
  c.dpsi_x1 = Tensor({Q});
  if (darcy) c.dpsi_x2 = Tensor({Q});
  c.w_row = Tensor({Q});
  c.gw_x1 = Tensor({Q});
  if (darcy) c.gw_x2 = Tensor({Q});
  c.qw = Tensor({Q});
  c.fw_row = Tensor({M});
  double vol = weak::BallQuadrature::unit_ball_volume(quad.dim);
  for (std::size_t j = 0; j < M; ++j) {
    const weak::Particle& p = particles[j];
    double favg = 0.0;
    for (std::size_t i = 0; i < NI; ++i) {
      std::size_t q = j * NI + i;
      const double* xi = quad.node(i);
      double x[2];
      for (std::size_t k = 0; k < quad.dim; ++k) x[k] = p.center[k] + p.radius * xi[k];
      if (darcy) {
        c.coords(q, 0) = x[0];
        c.coords(q, 1) = x[1];
        auto w = weak::csrbf_weight<2>(x, p.center, p.radius);
        c.w_row[q] = w.w;
        c.gw_x1[q] = w.grad[0];
        c.gw_x2[q] = w.grad[1];
        double gp[2] = {0.0, 0.0};
        specs.lift.grad_psi(x, gp, 2);
        c.psi[q] = specs.lift.psi(x);
        c.dpsi_x1[q] = gp[0];
        c.dpsi_x2[q] = gp[1];
        favg += quad.weights[i] * hyper.f * w.w;
      } else {
        c.coords(q, 0) = x[0];
        c.coords(q, 1) = p.t;
        auto w = weak::csrbf_weight<1>(x, p.center, p.radius);
        c.w_row[q] = w.w;
        c.gw_x1[q] = w.grad[0];
        double gp[2] = {0.0, 0.0};
        specs.lift.grad_psi(x, gp, 1);
        c.psi[q] = specs.lift.psi(x);
        c.dpsi_x1[q] = gp[0];
        // unforced Burgers: no f term
      }
      c.qw[q] = quad.weights[i] / vol;
    }
    c.fw_row[j] = favg / vol;
  }
  return c;
}

} // namespace detail

// Build the full per-batch bound (PDE + reconstruction / IC + optional labeled
// term) as one graph; a single reverse pass yields both parameter-group
// gradients, mirroring the per-iteration structure of the training algorithm.
inline AssembledBatch assemble_batch(TrainState& st, const BatchData& bd) {
  const ModelSpecs& specs = st.specs;
  const Hyperparams& hp = st.hyper;
  bool darcy = specs.form != weak::ResidualForm::Burgers;
  std::size_t B = bd.a_hat.rows();
  std::size_t M = bd.particles->size(), NI = bd.quad->count();
  std::size_t d_a = bd.a_hat.cols();

  AssembledBatch out;
  out.g = std::make_unique<Graph>();
  Graph& g = *out.g;

  // leaves (order matches phi_params/theta_params)
  op::EncoderVars enc_v = op::encoder_leaf(g, specs.encoder, st.encoder);
  op::MultiONetVars sol_v = op::multionet_leaf(g, st.solution);
  op::MultiONetVars dec_v;
  if (specs.has_decoder) dec_v = op::multionet_leaf(g, st.decoder);
  detail::collect_vars(enc_v, out.phi_vars);
  out.phi_params = phi_params(st);
  detail::collect_vars(sol_v, out.theta_vars);
  if (specs.has_decoder) detail::collect_vars(dec_v, out.theta_vars);
  out.theta_params = theta_params(st);

  detail::QuadConstants qc = detail::quad_constants(specs, hp, *bd.particles, *bd.quad);

  // encode and branch features
  Var a_in = g.constant(bd.a_hat);
  Var betas = op::encode_g(g, specs.encoder, enc_v, a_in);         // [B, d_beta]
  auto sol_branch = mlp_features_g(g, specs.solution.branch, sol_v.branch, betas);

  // trunk features + spatial tangents over the shared quadrature nodes
  Var coords = g.constant(qc.coords);
  // tangent directions: (x1,x2) for Darcy, (x,t) for Burgers
  MlpDualVars trunk = mlp_features_dual_g(g, specs.solution.trunk, sol_v.trunk, coords, {0, 1});

  Var u_tilde = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, trunk.value, true);
  Var du_t1 = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, trunk.tangent[0], false);
  Var du_t2 = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, trunk.tangent[1], false);

  Var psi = g.constant(qc.psi);
  Var ux1 = g.add(g.mul_rowvec(u_tilde, g.constant(qc.dpsi_x1)), g.mul_rowvec(du_t1, psi));

  // residual integrand [B, Q]
  Var integrand;
  if (darcy) {
    Var ux2 = g.add(g.mul_rowvec(u_tilde, g.constant(qc.dpsi_x2)), g.mul_rowvec(du_t2, psi));
    Var gradw_dot = g.add(g.mul_rowvec(ux1, g.constant(qc.gw_x1)),
                          g.mul_rowvec(ux2, g.constant(qc.gw_x2)));
    Var a_nodes = g.constant(detail::interp_rows(bd.a_hat, bd.field_axes, qc.coords));
    if (specs.form == weak::ResidualForm::NonlinearPoisson) {
      Var u = g.mul_rowvec(u_tilde, psi);
      Var expo = g.exp_(g.scale(g.add_const(u, -hp.ubar), hp.alpha));
      a_nodes = g.mul(a_nodes, expo);
    }
    integrand = g.mul(a_nodes, gradw_dot);
  } else {
    // u_t w + u u_x w + nu u_x w_x, at the particle time stamps
    Var u = g.mul_rowvec(u_tilde, psi);
    Var ut = g.mul_rowvec(du_t2, psi);  // psi is time-independent
    Var w_row = g.constant(qc.w_row);
    Var term1 = g.mul_rowvec(ut, w_row);
    Var term2 = g.mul_rowvec(g.mul(u, ux1), w_row);
    Var term3 = g.scale(g.mul_rowvec(ux1, g.constant(qc.gw_x1)), hp.nu);
    integrand = g.add(g.add(term1, term2), term3);
  }
  Var r = g.chunk_sum_cols(g.mul_rowvec(integrand, g.constant(qc.qw)), NI);  // [B, M]
  if (darcy) {
    Tensor neg_fw = qc.fw_row;
    for (double& v : neg_fw.data) v = -v;
    r = g.add_rowvec(r, g.constant(std::move(neg_fw)));
  }
  Var sum_r2 = g.chunk_sum_cols(g.mul(r, r), M);  // [B, 1]
  double m_half_log = 0.5 * static_cast<double>(M) * std::log(hp.lambda_pde);
  Var f_pde_col = g.add_const(g.scale(sum_r2, -0.5 * hp.lambda_pde), m_half_log);

  // reconstruction / initial-condition term
  Var f_rec_col;  // [B,1]
  double f_rec_constant = 0.0;
  Var sensor_coords = g.constant(bd.sensor_coords);
  if (specs.has_decoder) {
    auto dec_branch = mlp_features_g(g, specs.decoder.branch, dec_v.branch, betas);
    auto dec_trunk = mlp_features_g(g, specs.decoder.trunk, dec_v.trunk, sensor_coords);
    Var mu = op::multionet_combine_g(g, specs.decoder, dec_v, dec_branch, dec_trunk, true);  // [B,d_a]
    if (specs.decoder_binary) {
      Tensor z(bd.a_hat.shape);
      double mid = 0.5 * (specs.binary_hi + specs.binary_lo);
      for (std::size_t i = 0; i < z.size(); ++i) z.data[i] = bd.a_hat.data[i] > mid ? 1.0 : 0.0;
      Var bce = g.chunk_sum_cols(g.bce_with_logits(mu, std::move(z)), d_a);  // [B,1], positive
      f_rec_col = g.scale(bce, -hp.lambda_rec);
    } else {
      Var diff = g.sub(mu, g.constant(bd.a_hat));
      Var sq = g.chunk_sum_cols(g.mul(diff, diff), d_a);
      f_rec_constant = 0.5 * static_cast<double>(d_a) * std::log(hp.lambda_rec / (2.0 * M_PI));
      f_rec_col = g.add_const(g.scale(sq, -0.5 * hp.lambda_rec), f_rec_constant);
    }
  } else {
    // Burgers: the reconstruction term coincides with the initial condition
    auto trunk0 = mlp_features_g(g, specs.solution.trunk, sol_v.trunk, sensor_coords);
    Var u0_tilde = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, trunk0, true);
    Tensor psi0({d_a});
    for (std::size_t i = 0; i < d_a; ++i) {
      double x[2] = {bd.sensor_coords(i, 0), 0.0};
      psi0[i] = specs.lift.psi(x);
    }
    Var u0 = g.mul_rowvec(u0_tilde, g.constant(std::move(psi0)));
    Var diff = g.sub(u0, g.constant(bd.a_hat));
    Var sq = g.chunk_sum_cols(g.mul(diff, diff), d_a);
    f_rec_constant = 0.5 * static_cast<double>(d_a) * std::log(hp.lambda_bc);
    f_rec_col = g.add_const(g.scale(sq, -0.5 * hp.lambda_bc), f_rec_constant);
  }

  Var per_sample = g.add(f_pde_col, f_rec_col);
  Var bound = g.mean_all(per_sample);

  // optional labeled-solution term
  double f_data_mean = 0.0;
  if (!bd.labeled_rows.empty()) {
    std::size_t P = bd.label_coords.rows();
    Var lab_coords = g.constant(bd.label_coords);
    auto trunk_lab = mlp_features_g(g, specs.solution.trunk, sol_v.trunk, lab_coords);
    Var u_lab_all = op::multionet_combine_g(g, specs.solution, sol_v, sol_branch, trunk_lab, true);
    Tensor psi_lab({P});
    for (std::size_t i = 0; i < P; ++i)
      psi_lab[i] = specs.lift.psi(&bd.label_coords.data[i * bd.label_coords.cols()]);
    Var u_lab = g.gather_rows(g.mul_rowvec(u_lab_all, g.constant(std::move(psi_lab))),
                              bd.labeled_rows);
    Var diff = g.sub(u_lab, g.constant(bd.labeled_u));
    Var sq = g.chunk_sum_cols(g.mul(diff, diff), P);  // [L,1]
    double c = 0.5 * static_cast<double>(P) * std::log(hp.lambda_data);
    Var f_data_col = g.add_const(g.scale(sq, -0.5 * hp.lambda_data), c);
    Var data_mean = g.scale(g.sum_all(f_data_col), 1.0 / static_cast<double>(B));
    bound = g.add(bound, data_mean);
    f_data_mean = g.val(data_mean).data[0];
  }

  out.loss = g.scale(bound, -1.0);

  // report from forward values
  const Tensor& fp = g.val(f_pde_col);
  const Tensor& fr = g.val(f_rec_col);
  const Tensor& s2 = g.val(sum_r2);
  ElboReport rep;
  rep.f_pde = fp.sum() / static_cast<double>(B);
  rep.sum_r2 = s2.sum() / static_cast<double>(B);
  if (specs.has_decoder) {
    rep.f_rec = fr.sum() / static_cast<double>(B);
  } else {
    rep.f_bc = fr.sum() / static_cast<double>(B);  // IC slot
  }
  rep.f_data = f_data_mean;
  rep.f_kl = 0.0;
  rep.total = rep.f_pde + rep.f_bc + rep.f_rec + rep.f_data;
  out.report = rep;
  return out;
}

} // namespace genop::model
