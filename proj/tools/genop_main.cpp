#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "genop/cli/config.hpp"
#include "genop/inv/invert.hpp"
#include "genop/inv/metrics.hpp"
#include "genop/io/csv.hpp"
#include "genop/model/checkpoint.hpp"
#include "genop/model/train.hpp"
#include "genop/ref/dataset.hpp"

namespace {

using namespace genop;
using cli::RunConfig;
using cli::ValidationError;
using io::json;

struct Flags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> kind;
  std::optional<std::size_t> epochs;
  std::optional<double> snr;
  std::optional<std::size_t> k_mc;
  bool fixed_particles = false;
};

RunConfig load_config(const Flags& f) {
  json j = json::object();
  if (f.config_path) {
    if (!std::filesystem::exists(*f.config_path))
      throw ValidationError("config file not found: " + *f.config_path);
    j = io::read_json_file(*f.config_path);
  }
  // flags that alter preset resolution must be injected before parsing
  if (f.kind) j["kind"] = *f.kind;
  if (f.preset) j["preset"] = *f.preset;
  if (f.fixed_particles) j["particles"] = "fixed";
  RunConfig c = cli::parse_config(j);
  if (f.seed) c.seed = *f.seed;
  if (f.epochs) c.hyper.epochs = *f.epochs;
  if (f.snr) c.snr_db = *f.snr;
  if (f.k_mc) c.k_mc = *f.k_mc;
  return c;
}

ref::Dataset load_dataset_checked(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("dataset not found: " + path);
  return ref::read_dataset(path);
}

model::TrainState load_ckpt_checked(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("checkpoint not found: " + path);
  return model::load_checkpoint(path);
}

// ---- gen ----

int cmd_gen(const RunConfig& cfg, const std::string& out) {
  ref::DatasetSpec spec = cfg.dataset_spec();
  ref::Dataset ds = ref::build_dataset(spec, cfg.seed);
  ds.config_echo = cfg.echo();
  ref::write_dataset(out, ds);
  if (ds.count == 0) {
    std::cout << "warning: generated an empty dataset\n";
  }
  std::cout << "dataset " << out << ": kind=" << ref::data_kind_name(ds.kind)
            << " n=" << ds.count << " sensors=" << ds.field_size()
            << " labeled=" << ds.labeled.size() << "\n";
  if (ds.kind == ref::DataKind::DarcyBinary && ds.count > 0) {
    double hi_frac = 0.0;
    std::size_t both = 0;
    std::size_t fs = ds.field_size();
    for (std::size_t i = 0; i < ds.count; ++i) {
      std::size_t nh = 0;
      for (std::size_t k = 0; k < fs; ++k)
        if (ds.fields[i * fs + k] > 7.5) ++nh;
      hi_frac += static_cast<double>(nh) / static_cast<double>(fs);
      if (nh > 0 && nh < fs) ++both;
    }
    std::printf("phase fractions: mean high-phase %.3f, both phases present in %zu/%zu draws\n",
                hi_frac / static_cast<double>(ds.count), both, ds.count);
  }
  return 0;
}

// ---- train ----

int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& out,
              const std::string& history_path, const std::string& resume) {
  ref::Dataset ds = load_dataset_checked(data_path);
  model::TrainState st;
  if (!resume.empty()) {
    st = load_ckpt_checked(resume);
    if (st.specs.kind != ds.kind) throw ValidationError("resume: checkpoint/dataset kind mismatch");
    st.hyper.epochs = std::max<std::size_t>(st.hyper.epochs, cfg.hyper.epochs);
  } else {
    std::size_t sensor_n = ds.field_axes[0].size();
    st = model::make_state(ds.kind, cfg.preset_kind(), sensor_n, cfg.hyper, cfg.seed);
    if (cfg.data_kind() != ds.kind) throw ValidationError("train: config/dataset kind mismatch");
  }
  std::vector<model::ElboReport> history;
  model::train(st, ds, [&](const model::ElboReport& r) { history.push_back(r); });
  model::save_checkpoint(out, st, cfg.echo());
  if (!history_path.empty()) {
    io::CsvWriter csv(history_path, cfg.echo(), {"epoch", "f_pde", "f_bc", "f_rec", "total", "lr"});
    for (const auto& r : history)
      csv.row({static_cast<double>(r.epoch), r.f_pde, r.f_bc, r.f_rec, r.total,
               lr_schedule(r.epoch, st.hyper.lr0, st.hyper.lr_period)});
    csv.finish();
  }
  std::cout << "trained to epoch " << st.epoch << ", checkpoint " << out << "\n";
  if (!history.empty())
    std::printf("residual energy: first %.6g last %.6g\n", history.front().sum_r2,
                history.back().sum_r2);
  return 0;
}

// ---- predict ----

Tensor query_coords_for(const ref::Dataset& ds, std::vector<std::vector<double>>& axes_out) {
  if (ref::is_darcy_family(ds.kind)) {
    axes_out = ds.field_axes;
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
  std::vector<double> tax = ds.solution_axes.empty()
                                ? ref::GridField::linspace(0.0, 1.0, 26)
                                : ds.solution_axes[1];
  axes_out = {ds.field_axes[0], tax};
  const auto& ax = ds.field_axes[0];
  Tensor c({ax.size() * tax.size(), 2});
  for (std::size_t i = 0; i < ax.size(); ++i)
    for (std::size_t s = 0; s < tax.size(); ++s) {
      c(i * tax.size() + s, 0) = ax[i];
      c(i * tax.size() + s, 1) = tax[s];
    }
  return c;
}

int cmd_predict(const RunConfig& cfg, const std::string& ckpt_path, const std::string& data_path,
                const std::string& out, const std::string& metrics_path) {
  model::TrainState st = load_ckpt_checked(ckpt_path);
  ref::Dataset ds = load_dataset_checked(data_path);
  if (st.specs.kind != ds.kind) throw ValidationError("predict: checkpoint/dataset kind mismatch");
  if (st.specs.encoder.input_width() != ds.field_size())
    throw ValidationError("predict: incompatible sensor grid");

  std::vector<std::vector<double>> query_axes;
  Tensor coords = query_coords_for(ds, query_axes);
  std::size_t q = coords.rows(), fs = ds.field_size();

  Tensor a_all({ds.count, fs}, ds.fields);
  Tensor pred = inv::forward_predict(st, a_all, coords);  // [count, q]

  json h;
  h["format"] = "predictions";
  h["version"] = 1;
  h["kind"] = ref::data_kind_name(ds.kind);
  h["count"] = ds.count;
  h["query_axes"] = query_axes;
  h["config"] = cfg.echo();
  io::BlobWriter w(out, h);
  w.write_f64(pred.data);
  w.finish();

  if (!metrics_path.empty() && !ds.labeled.empty()) {
    io::CsvWriter csv(metrics_path, cfg.echo(), {"sample", "rel_l2"});
    std::vector<double> errs;
    for (std::size_t idx : ds.labeled) {
      ref::GridField u = ds.solution(idx);
      std::vector<double> truth(q);
      for (std::size_t k = 0; k < q; ++k) {
        double x[2] = {coords(k, 0), coords(k, 1)};
        truth[k] = u.interp(x);
      }
      std::vector<double> p(pred.data.begin() + idx * q, pred.data.begin() + (idx + 1) * q);
      double e = inv::metric_rel_l2(p, truth);
      errs.push_back(e);
      csv.row({static_cast<double>(idx), e});
    }
    std::vector<double> sorted = errs;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted[sorted.size() / 2];
    double mean = 0.0, sd = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    for (double e : errs) sd += (e - mean) * (e - mean);
    sd = std::sqrt(sd / static_cast<double>(errs.size()));
    csv.row_mixed({"median", io::CsvWriter::num(median)});
    csv.row_mixed({"mean", io::CsvWriter::num(mean)});
    csv.row_mixed({"std", io::CsvWriter::num(sd)});
    csv.finish();
    std::printf("predict: %zu labeled samples, median rel-L2 %.4g\n", errs.size(), median);
  } else if (!metrics_path.empty()) {
    std::cout << "predict: no labeled samples, metrics skipped\n";
  }
  return 0;
}

// ---- invert ----

int cmd_invert(const RunConfig& cfg, const std::string& ckpt_path, const std::string& data_path,
               const std::string& out_report, const std::string& out_field) {
  model::TrainState st = load_ckpt_checked(ckpt_path);
  ref::Dataset ds = load_dataset_checked(data_path);
  if (st.specs.kind != ds.kind) throw ValidationError("invert: checkpoint/dataset kind mismatch");
  if (cfg.obs_index >= ds.count) throw ValidationError("invert: obs_index out of range");
  if (!ds.is_labeled(cfg.obs_index))
    throw ValidationError("invert: record must carry a reference solution (regenerate with labels)");

  ref::GridField u_ref = ds.solution(cfg.obs_index);
  Rng noise_rng = Rng::stream(cfg.seed, "noise");
  inv::Observations obs = inv::observe_from_solution(u_ref, cfg.obs_count, cfg.snr_db, noise_rng);

  std::vector<std::vector<double>> qaxes;
  Tensor coords = query_coords_for(ds, qaxes);
  inv::InversionOptions opt = cfg.inversion_options(st);
  inv::InversionResult res = inv::invert(st, obs, coords, opt);

  ref::GridField truth = ds.field(cfg.obs_index);
  double metric = 0.0;
  std::string metric_name;
  if (st.specs.decoder_binary) {
    metric_name = "i_corr";
    metric = inv::metric_icorr(truth.values, res.recovered.data);
  } else {
    metric_name = "rel_l2";
    metric = inv::metric_rel_l2(res.recovered.data, truth.values);
  }

  json fh;
  fh["format"] = "grid";
  fh["version"] = 1;
  fh["axes"] = qaxes;
  json arrays = json::array();
  arrays.push_back("recovered");
  if (res.probability.size()) arrays.push_back("probability");
  if (res.spread.size()) arrays.push_back("spread");
  fh["arrays"] = arrays;
  fh["config"] = cfg.echo();
  io::BlobWriter fw(out_field, fh);
  fw.write_f64(res.recovered.data);
  if (res.probability.size()) fw.write_f64(res.probability.data);
  if (res.spread.size()) fw.write_f64(res.spread.data);
  fw.finish();

  json rep;
  rep["format"] = "inversion-report";
  rep["config"] = cfg.echo();
  rep["beta"] = res.beta;
  if (!res.beta_spread.empty()) rep["beta_spread"] = res.beta_spread;
  rep["metric"] = {{"name", metric_name}, {"value", metric}};
  rep["objective"] = {{"initial", res.initial_objective}, {"final", res.final_objective}};
  rep["trace"] = res.trace;
  rep["field_file"] = out_field;
  rep["snr_db"] = cfg.snr_db;
  io::write_json_file(out_report, rep);
  std::printf("invert: %s = %.4g (objective %.4g -> %.4g)\n", metric_name.c_str(), metric,
              res.initial_objective, res.final_objective);
  return 0;
}

// ---- eval ----

int cmd_eval(const RunConfig& cfg, const std::string& pred_path, const std::string& ref_path,
             const std::string& out, bool do_assert, double threshold) {
  if (!std::filesystem::exists(pred_path)) throw ValidationError("missing " + pred_path);
  if (!std::filesystem::exists(ref_path)) throw ValidationError("missing " + ref_path);
  io::BlobReader pr(pred_path);
  if (pr.header().value("format", "") != "predictions")
    throw ValidationError(pred_path + ": expected a predictions file");
  std::size_t count = pr.header().at("count").get<std::size_t>();
  auto qaxes = pr.header().at("query_axes").get<std::vector<std::vector<double>>>();
  std::size_t q = 1;
  for (const auto& a : qaxes) q *= a.size();
  std::vector<double> pred = pr.read_f64(count * q);

  std::vector<std::size_t> sample_ids;
  std::vector<std::vector<double>> refs;
  io::BlobReader rr(ref_path);
  std::string rformat = rr.header().value("format", "");
  if (rformat == "predictions") {
    std::size_t rcount = rr.header().at("count").get<std::size_t>();
    if (rcount != count) throw ValidationError("eval: sample counts differ");
    std::vector<double> rv = rr.read_f64(count * q);
    for (std::size_t i = 0; i < count; ++i) {
      sample_ids.push_back(i);
      refs.emplace_back(rv.begin() + i * q, rv.begin() + (i + 1) * q);
    }
  } else if (rformat == "dataset") {
    ref::Dataset ds = ref::read_dataset(ref_path);
    if (ds.labeled.empty()) throw ValidationError("eval: reference dataset carries no labels");
    for (std::size_t idx : ds.labeled) {
      ref::GridField u = ds.solution(idx);
      std::vector<double> t(q);
      std::size_t pos = 0;
      for (double x : qaxes[0])
        for (double y : qaxes[1]) {
          double pnt[2] = {x, y};
          t[pos++] = u.interp(pnt);
        }
      sample_ids.push_back(idx);
      refs.push_back(std::move(t));
    }
  } else {
    throw ValidationError(ref_path + ": expected predictions or dataset file");
  }

  io::CsvWriter csv(out, cfg.echo(), {"sample", "rel_l2"});
  std::vector<double> errs;
  for (std::size_t k = 0; k < sample_ids.size(); ++k) {
    std::size_t i = sample_ids[k];
    std::vector<double> p(pred.begin() + i * q, pred.begin() + (i + 1) * q);
    double e = inv::metric_rel_l2(p, refs[k]);
    errs.push_back(e);
    csv.row({static_cast<double>(i), e});
  }
  std::vector<double> sorted = errs;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted[sorted.size() / 2];
  csv.row_mixed({"median", io::CsvWriter::num(median)});
  csv.finish();
  std::printf("eval: %zu samples, median rel-L2 %.4g\n", errs.size(), median);
  if (do_assert && median > threshold) {
    std::fprintf(stderr, "eval: median %.4g exceeds threshold %.4g\n", median, threshold);
    return 3;
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-driven generative operator toolkit"};
  app.require_subcommand(1);

  Flags flags;
  std::string out, data_path, ckpt_path, history_path, resume, metrics_path;
  std::string pred_path, ref_path, field_path;
  bool do_assert = false;
  double threshold = 0.15;
  std::optional<std::size_t> n_flag, sensor_flag, index_flag, obs_flag;
  std::optional<double> labeled_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--seed", flags.seed, "run seed");
    cmd->add_option("--preset", flags.preset, "desk|paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--kind", flags.kind, "problem kind")
        ->check(CLI::IsMember({"darcy-binary", "darcy-continuous", "burgers-ic",
                               "nonlinear-poisson"}));
    cmd->add_flag("--fixed-particles", flags.fixed_particles, "freeze the particle sample");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset");
  add_common(gen);
  gen->add_option("--n", n_flag, "sample count");
  gen->add_option("--sensor-n", sensor_flag, "sensor resolution (per axis)");
  gen->add_option("--labeled-fraction", labeled_flag, "fraction solved with the reference solver");
  gen->add_option("--out", out, "output dataset path")->required();

  CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
  add_common(train);
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--data", data_path, "dataset path")->required();
  train->add_option("--out", out, "checkpoint output path")->required();
  train->add_option("--history", history_path, "bound-history CSV path");
  train->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* predict = app.add_subcommand("predict", "forward predictions for a dataset");
  add_common(predict);
  predict->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  predict->add_option("--data", data_path, "dataset path")->required();
  predict->add_option("--out", out, "predictions output path")->required();
  predict->add_option("--metrics", metrics_path, "metrics CSV path");

  CLI::App* invert = app.add_subcommand("invert", "recover a coefficient from observations");
  add_common(invert);
  invert->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  invert->add_option("--data", data_path, "labeled truth dataset")->required();
  invert->add_option("--index", index_flag, "record index to invert");
  invert->add_option("--snr", flags.snr, "observation SNR in dB");
  invert->add_option("--k-mc", flags.k_mc, "Monte-Carlo decoder draws");
  invert->add_option("--obs", obs_flag, "observation count");
  invert->add_option("--out", out, "report JSON path")->required();
  invert->add_option("--field", field_path, "recovered-field output path");

  CLI::App* eval = app.add_subcommand("eval", "compare predictions against a reference");
  add_common(eval);
  eval->add_option("--pred", pred_path, "predictions file")->required();
  eval->add_option("--ref", ref_path, "reference predictions or labeled dataset")->required();
  eval->add_option("--out", out, "comparison CSV path")->required();
  eval->add_flag("--assert", do_assert, "exit 3 when the threshold is exceeded");
  eval->add_option("--threshold", threshold, "median rel-L2 threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(flags);
    if (n_flag) cfg.n = *n_flag;
    if (sensor_flag) cfg.sensor_n = *sensor_flag;
    if (labeled_flag) cfg.labeled_fraction = *labeled_flag;
    if (index_flag) cfg.obs_index = *index_flag;
    if (obs_flag) cfg.obs_count = *obs_flag;

    if (gen->parsed()) return cmd_gen(cfg, out);
    if (train->parsed()) return cmd_train(cfg, data_path, out, history_path, resume);
    if (predict->parsed()) return cmd_predict(cfg, ckpt_path, data_path, out, metrics_path);
    if (invert->parsed()) {
      if (field_path.empty()) field_path = out + ".field.bin";
      return cmd_invert(cfg, ckpt_path, data_path, out, field_path);
    }
    if (eval->parsed()) return cmd_eval(cfg, pred_path, ref_path, out, do_assert, threshold);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  }
  return 0;
}
