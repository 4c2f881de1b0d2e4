#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "genop/core/rng.hpp"
#include "genop/io/container.hpp"
#include "genop/ref/fd_burgers.hpp"
#include "genop/ref/fd_darcy.hpp"
#include "genop/ref/grf.hpp"

namespace genop::ref {

enum class DataKind { DarcyBinary, DarcyContinuous, BurgersIC, NonlinearPoisson };

inline const char* data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::DarcyBinary: return "darcy-binary";
    case DataKind::DarcyContinuous: return "darcy-continuous";
    case DataKind::BurgersIC: return "burgers-ic";
    case DataKind::NonlinearPoisson: return "nonlinear-poisson";
  }
  return "?";
}

inline DataKind data_kind_from(const std::string& s) {
  if (s == "darcy-binary") return DataKind::DarcyBinary;
  if (s == "darcy-continuous") return DataKind::DarcyContinuous;
  if (s == "burgers-ic") return DataKind::BurgersIC;
  if (s == "nonlinear-poisson") return DataKind::NonlinearPoisson;
  throw std::invalid_argument("unknown dataset kind: " + s);
}

inline bool is_darcy_family(DataKind k) { return k != DataKind::BurgersIC; }

struct DatasetSpec {
  DataKind kind = DataKind::DarcyBinary;
  std::size_t count = 64;
  std::size_t sensor_n = 16;  // per axis for 2-D, point count for 1-D
  double labeled_fraction = 0.0;
  GrfSpec grf;                     // binary coefficients / Burgers initial conditions
  double mean_lo = 0.0, mean_hi = 0.0;  // per-instance GP mean jitter (OOD sampling)
  std::size_t label_refine = 4;    // reference-solver grid refinement vs sensors
  std::size_t label_nt_store = 51; // stored time levels for Burgers labels
  double f = 10.0;
  double nu = 0.1 / M_PI;
  double alpha = 0.05, ubar = 5.0;

  std::size_t field_size() const {
    return is_darcy_family(kind) ? sensor_n * sensor_n : sensor_n;
  }
  std::size_t label_n() const { return label_refine * (sensor_n - 1) + 1; }
};

struct Dataset {
  DataKind kind = DataKind::DarcyBinary;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> field_axes;
  std::vector<std::vector<double>> solution_axes;  // empty when no labels
  std::size_t count = 0;
  std::vector<std::size_t> labeled;  // sorted record indices carrying solutions
  std::vector<double> fields;        // count x field_size, row-major
  std::vector<double> solutions;     // labeled.size() x solution_size
  io::json config_echo;

  std::size_t field_size() const {
    std::size_t s = 1;
    for (const auto& a : field_axes) s *= a.size();
    return s;
  }
  std::size_t solution_size() const {
    if (solution_axes.empty()) return 0;
    std::size_t s = 1;
    for (const auto& a : solution_axes) s *= a.size();
    return s;
  }
  bool is_labeled(std::size_t i) const {
    return std::binary_search(labeled.begin(), labeled.end(), i);
  }
  // position of record i within the labeled list, or npos
  std::size_t label_slot(std::size_t i) const {
    auto it = std::lower_bound(labeled.begin(), labeled.end(), i);
    if (it == labeled.end() || *it != i) return static_cast<std::size_t>(-1);
    return static_cast<std::size_t>(it - labeled.begin());
  }

  GridField field(std::size_t i) const {
    GridField f;
    f.axes = field_axes;
    std::size_t s = field_size();
    f.values.assign(fields.begin() + i * s, fields.begin() + (i + 1) * s);
    return f;
  }
  GridField solution(std::size_t i) const {
    std::size_t slot = label_slot(i);
    if (slot == static_cast<std::size_t>(-1))
      throw std::invalid_argument("dataset record " + std::to_string(i) + " is unlabeled");
    GridField f;
    f.axes = solution_axes;
    std::size_t s = solution_size();
    f.values.assign(solutions.begin() + slot * s, solutions.begin() + (slot + 1) * s);
    return f;
  }
};

namespace detail {

inline std::vector<std::size_t> pick_labeled(std::size_t count, double fraction, Rng& rng) {
  std::size_t want = static_cast<std::size_t>(fraction * static_cast<double>(count) + 1e-9);
  std::vector<std::size_t> all(count);
  for (std::size_t i = 0; i < count; ++i) all[i] = i;
  rng.shuffle(all);
  all.resize(want);
  std::sort(all.begin(), all.end());
  return all;
}

} // namespace detail

// Generate N coefficient fields (inputs only by default); the labeled subset
// is solved with the matching reference solver.
inline Dataset build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  Dataset ds;
  ds.kind = spec.kind;
  ds.seed = seed;
  ds.count = spec.count;
  Rng rng = Rng::stream(seed, "dataset");

  bool darcy = is_darcy_family(spec.kind);
  if (darcy) {
    auto ax = GridField::linspace(0.0, 1.0, spec.sensor_n);
    ds.field_axes = {ax, ax};
  } else {
    ds.field_axes = {GridField::linspace(-1.0, 1.0, spec.sensor_n)};
  }

  ds.labeled = detail::pick_labeled(spec.count, spec.labeled_fraction, rng);
  if (!ds.labeled.empty()) {
    if (darcy) {
      auto ax = GridField::linspace(0.0, 1.0, spec.label_n());
      ds.solution_axes = {ax, ax};
    } else {
      ds.solution_axes = {GridField::linspace(-1.0, 1.0, spec.sensor_n),
                          GridField::linspace(0.0, 1.0, spec.label_nt_store)};
    }
  }

  std::size_t fsize = ds.field_size();
  ds.fields.reserve(spec.count * fsize);

  for (std::size_t i = 0; i < spec.count; ++i) {
    GridField f;
    GrfDraw draw;
    double k1 = 0.0, k2 = 0.0;
    switch (spec.kind) {
      case DataKind::DarcyBinary: {
        GrfSpec g = spec.grf;
        if (spec.mean_hi > spec.mean_lo) g.mean = rng.uniform(spec.mean_lo, spec.mean_hi);
        draw = grf_draw(g, rng);
        f = grf_on_grid(draw, ds.field_axes);
        break;
      }
      case DataKind::DarcyContinuous:
      case DataKind::NonlinearPoisson:
        k1 = rng.uniform(0.0, 2.0 * M_PI);
        k2 = rng.uniform(0.0, 2.0 * M_PI);
        f = sample_continuous_a(k1, k2, ds.field_axes);
        break;
      case DataKind::BurgersIC:
        draw = grf_draw(spec.grf, rng);
        f = grf_on_grid(draw, ds.field_axes);
        break;
    }
    ds.fields.insert(ds.fields.end(), f.values.begin(), f.values.end());

    if (ds.is_labeled(i)) {
      if (darcy) {
        std::size_t n = spec.label_n();
        // evaluate the exact field on the solver grid rather than interpolating sensors
        GridField a_fine;
        a_fine.axes = ds.solution_axes;
        a_fine.values.resize(n * n);
        for (std::size_t p = 0; p < n; ++p)
          for (std::size_t q = 0; q < n; ++q) {
            double x[2] = {a_fine.axes[0][p], a_fine.axes[1][q]};
            a_fine.at(p, q) = (spec.kind == DataKind::DarcyBinary)
                                  ? draw.value(x)
                                  : continuous_a_value(k1, k2, x[0], x[1]);
          }
        GridField u = (spec.kind == DataKind::NonlinearPoisson)
                          ? fd_darcy_nonlinear_solve(a_fine, spec.f, spec.alpha, spec.ubar, n)
                          : fd_darcy_solve(a_fine, spec.f, n);
        ds.solutions.insert(ds.solutions.end(), u.values.begin(), u.values.end());
      } else {
        std::size_t nx = spec.label_refine * (spec.sensor_n - 1) + 1;
        GridField ic;
        ic.axes = {GridField::linspace(-1.0, 1.0, nx)};
        ic.values.resize(nx);
        for (std::size_t p = 0; p < nx; ++p) {
          double x[2] = {ic.axes[0][p], 0.0};
          ic.values[p] = draw.value(x);
        }
        std::size_t nt_chunks = spec.label_nt_store - 1;
        std::size_t need = burgers_required_nt(ic, nx);
        std::size_t mult = (need + nt_chunks - 1) / nt_chunks;
        std::size_t nt = mult * nt_chunks + 1;
        GridField u = fd_burgers_solve(ic, spec.nu, nx, nt);
        // restrict to sensor x-grid and stored time levels (nodes coincide)
        for (std::size_t p = 0; p < spec.sensor_n; ++p)
          for (std::size_t s = 0; s < spec.label_nt_store; ++s)
            ds.solutions.push_back(u.at(p * spec.label_refine, s * mult));
      }
    }
  }
  return ds;
}

inline void write_dataset(const std::string& path, const Dataset& ds) {
  io::json h;
  h["format"] = "dataset";
  h["version"] = 1;
  h["kind"] = data_kind_name(ds.kind);
  h["seed"] = ds.seed;
  h["count"] = ds.count;
  h["field_axes"] = ds.field_axes;
  h["labeled"] = ds.labeled;
  if (!ds.solution_axes.empty()) h["solution_axes"] = ds.solution_axes;
  h["config"] = ds.config_echo.is_null() ? io::json::object() : ds.config_echo;
  io::BlobWriter w(path, h);
  std::size_t fsize = ds.field_size(), ssize = ds.solution_size();
  for (std::size_t i = 0; i < ds.count; ++i) {
    w.write_f64(&ds.fields[i * fsize], fsize);
    std::size_t slot = ds.label_slot(i);
    if (slot != static_cast<std::size_t>(-1)) w.write_f64(&ds.solutions[slot * ssize], ssize);
  }
  w.finish();
}

inline Dataset read_dataset(const std::string& path) {
  io::BlobReader r(path);
  const io::json& h = r.header();
  if (h.value("format", "") != "dataset") throw std::runtime_error(path + ": not a dataset file");
  Dataset ds;
  ds.kind = data_kind_from(h.at("kind").get<std::string>());
  ds.seed = h.at("seed").get<std::uint64_t>();
  ds.count = h.at("count").get<std::size_t>();
  ds.field_axes = h.at("field_axes").get<std::vector<std::vector<double>>>();
  ds.labeled = h.at("labeled").get<std::vector<std::size_t>>();
  if (h.contains("solution_axes"))
    ds.solution_axes = h.at("solution_axes").get<std::vector<std::vector<double>>>();
  ds.config_echo = h.value("config", io::json::object());
  std::size_t fsize = ds.field_size(), ssize = ds.solution_size();
  ds.fields.reserve(ds.count * fsize);
  for (std::size_t i = 0; i < ds.count; ++i) {
    auto f = r.read_f64(fsize);
    ds.fields.insert(ds.fields.end(), f.begin(), f.end());
    if (ds.is_labeled(i)) {
      auto s = r.read_f64(ssize);
      ds.solutions.insert(ds.solutions.end(), s.begin(), s.end());
    }
  }
  return ds;
}

} // namespace genop::ref
