#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "genop/core/adam.hpp"
#include "genop/model/assembly.hpp"
#include "genop/model/state.hpp"

namespace genop::model {

namespace detail {

// Trunk inputs at the sensor locations: (x1,x2) grid points for the 2-D
// problems, (x, 0) for the Burgers initial-condition slice.
inline Tensor sensor_coords_for(const ref::Dataset& ds) {
  if (ref::is_darcy_family(ds.kind)) {
    const auto& ax = ds.field_axes[0];
    const auto& ay = ds.field_axes[1];
    Tensor c({ax.size() * ay.size(), 2});
    for (std::size_t i = 0; i < ax.size(); ++i)
      for (std::size_t j = 0; j < ay.size(); ++j) {
        c(i * ay.size() + j, 0) = ax[i];
        c(i * ay.size() + j, 1) = ay[j];
      }
    return c;
  }
  const auto& ax = ds.field_axes[0];
  Tensor c({ax.size(), 2});
  for (std::size_t i = 0; i < ax.size(); ++i) {
    c(i, 0) = ax[i];
    c(i, 1) = 0.0;
  }
  return c;
}

// Label comparison points and per-record solution rows. Darcy solutions are
// restricted to the sensor grid; Burgers labels live on their stored
// (x, t) grid.
struct LabelTable {
  Tensor coords;                      // [P, 2]
  std::vector<std::vector<double>> rows;  // per labeled record
};

inline LabelTable build_label_table(const ref::Dataset& ds) {
  LabelTable t;
  if (ds.labeled.empty()) return t;
  if (ref::is_darcy_family(ds.kind)) {
    t.coords = sensor_coords_for(ds);
    for (std::size_t idx : ds.labeled) {
      ref::GridField u = ds.solution(idx);
      std::vector<double> row(t.coords.rows());
      for (std::size_t q = 0; q < t.coords.rows(); ++q) {
        double x[2] = {t.coords(q, 0), t.coords(q, 1)};
        row[q] = u.interp(x);
      }
      t.rows.push_back(std::move(row));
    }
  } else {
    const auto& ax = ds.solution_axes[0];
    const auto& at = ds.solution_axes[1];
    t.coords = Tensor({ax.size() * at.size(), 2});
    for (std::size_t i = 0; i < ax.size(); ++i)
      for (std::size_t s = 0; s < at.size(); ++s) {
        t.coords(i * at.size() + s, 0) = ax[i];
        t.coords(i * at.size() + s, 1) = at[s];
      }
    for (std::size_t idx : ds.labeled) {
      ref::GridField u = ds.solution(idx);
      t.rows.push_back(u.values);
    }
  }
  return t;
}

inline void check_compatible(const TrainState& st, const ref::Dataset& ds) {
  if (st.specs.kind != ds.kind)
    throw std::invalid_argument(std::string("train: dataset kind ") + ref::data_kind_name(ds.kind) +
                                " does not match model kind " +
                                ref::data_kind_name(st.specs.kind));
  if (st.specs.encoder.input_width() != ds.field_size())
    throw std::invalid_argument("train: dataset sensor layout does not match encoder input");
}

inline const char* nonfinite_component(const ElboReport& r) {
  if (!std::isfinite(r.f_pde)) return "F_pde";
  if (!std::isfinite(r.f_bc)) return "F_bc";
  if (!std::isfinite(r.f_rec)) return "F_rec";
  if (!std::isfinite(r.f_data)) return "F_data";
  return "total";
}

} // namespace detail

// VB-EM loop over the dataset: per batch the bound is evaluated once, the
// encoder group is updated first, then the operator/decoder group, each with
// its own Adam state; the learning rate halves on the configured period.
// Particles are shared per epoch and resampled unless fixed-particle mode is
// on; all randomness is derived from (seed, stream, epoch) so training can be
// resumed mid-run bit-exactly.
inline std::vector<ElboReport> train(TrainState& st, const ref::Dataset& ds,
                                     const std::function<void(const ElboReport&)>& on_epoch = {}) {
  detail::check_compatible(st, ds);
  st.hyper.validate();
  const Hyperparams& hp = st.hyper;
  bool darcy = ref::is_darcy_family(ds.kind);

  Tensor sensor_coords = detail::sensor_coords_for(ds);
  detail::LabelTable labels = detail::build_label_table(ds);
  weak::BallQuadrature quad =
      darcy ? weak::BallQuadrature::for_dim(2, hp.n_int) : weak::BallQuadrature::interval(hp.n_int);
  double radius = hp.radius_for(st.specs.domain);
  std::size_t d_a = ds.field_size();

  std::vector<ElboReport> history;
  for (std::uint64_t epoch = st.epoch; epoch < hp.epochs; ++epoch) {
    double lr = lr_schedule(epoch, hp.lr0, hp.lr_period);
    Rng prng = Rng::stream(st.seed, "particles", hp.fixed_particles ? 0 : epoch);
    std::vector<weak::Particle> particles = weak::sample_particles(
        st.specs.domain, hp.m_particles, radius, prng, {}, darcy ? 0.0 : 1.0);

    std::vector<std::size_t> order(ds.count);
    for (std::size_t i = 0; i < ds.count; ++i) order[i] = i;
    Rng srng = Rng::stream(st.seed, "shuffle", epoch);
    srng.shuffle(order);

    ElboReport epoch_rep;
    epoch_rep.epoch = epoch;
    std::size_t seen = 0;

    for (std::size_t begin = 0; begin < ds.count; begin += hp.batch) {
      std::size_t bsize = std::min(hp.batch, ds.count - begin);
      BatchData bd;
      bd.field_axes = ds.field_axes;
      bd.sensor_coords = sensor_coords;
      bd.particles = &particles;
      bd.quad = &quad;
      bd.a_hat = Tensor({bsize, d_a});
      for (std::size_t b = 0; b < bsize; ++b) {
        std::size_t rec = order[begin + b];
        std::copy_n(&ds.fields[rec * d_a], d_a, &bd.a_hat.data[b * d_a]);
        std::size_t slot = ds.label_slot(rec);
        if (slot != static_cast<std::size_t>(-1)) bd.labeled_rows.push_back(b);
      }
      if (!bd.labeled_rows.empty()) {
        bd.label_coords = labels.coords;
        std::size_t P = labels.coords.rows();
        bd.labeled_u = Tensor({bd.labeled_rows.size(), P});
        for (std::size_t l = 0; l < bd.labeled_rows.size(); ++l) {
          std::size_t rec = order[begin + bd.labeled_rows[l]];
          std::copy_n(labels.rows[ds.label_slot(rec)].data(), P, &bd.labeled_u.data[l * P]);
        }
      }

      AssembledBatch ab = assemble_batch(st, bd);
      double loss = ab.g->val(ab.loss).data[0];
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(begin / hp.batch) + " (component " +
                                 detail::nonfinite_component(ab.report) + ")");
      ab.g->backward(ab.loss);

      std::vector<Tensor> gphi, gtheta;
      gphi.reserve(ab.phi_vars.size());
      for (Var v : ab.phi_vars) gphi.push_back(ab.g->grad_or_zero(v));
      gtheta.reserve(ab.theta_vars.size());
      for (Var v : ab.theta_vars) gtheta.push_back(ab.g->grad_or_zero(v));
      clip_grad_norm(gphi, hp.clip_norm);
      clip_grad_norm(gtheta, hp.clip_norm);

      adam_step(ab.phi_params, gphi, st.adam_phi, lr);    // encoder group first
      adam_step(ab.theta_params, gtheta, st.adam_theta, lr);

      double w = static_cast<double>(bsize);
      epoch_rep.f_pde += w * ab.report.f_pde;
      epoch_rep.f_bc += w * ab.report.f_bc;
      epoch_rep.f_rec += w * ab.report.f_rec;
      epoch_rep.f_data += w * ab.report.f_data;
      epoch_rep.sum_r2 += w * ab.report.sum_r2;
      seen += bsize;
    }
    double inv = 1.0 / static_cast<double>(seen);
    epoch_rep.f_pde *= inv;
    epoch_rep.f_bc *= inv;
    epoch_rep.f_rec *= inv;
    epoch_rep.f_data *= inv;
    epoch_rep.sum_r2 *= inv;
    epoch_rep.total = epoch_rep.f_pde + epoch_rep.f_bc + epoch_rep.f_rec + epoch_rep.f_data;
    st.epoch = epoch + 1;
    history.push_back(epoch_rep);
    if (on_epoch) on_epoch(epoch_rep);
  }
  return history;
}

} // namespace genop::model
