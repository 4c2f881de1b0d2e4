#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "genop/core/tensor.hpp"

namespace genop {

// Reverse-mode tape over whole tensors. A graph is built per batch/iteration,
// backward() is run once from a scalar root, then leaf gradients are read out.
//
// Spatial derivatives of network outputs are handled by propagating tangent
// tensors as ordinary graph nodes (forward-mode over the same tape), so losses
// that contain them stay differentiable with respect to parameters.

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Graph&)> backward;
  };

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (!n.grad_alloc) throw std::logic_error("grad not computed for this var");
    return n.grad;
  }
  bool has_grad(Var v) const { return nodes_[check(v)].grad_alloc; }
  Tensor grad_or_zero(Var v) const {
    const Node& n = nodes_[check(v)];
    return n.grad_alloc ? n.grad : Tensor(n.value.shape);
  }
  double scalar(Var v) const {
    const Tensor& t = val(v);
    if (t.size() != 1) throw std::logic_error("scalar() on non-scalar var");
    return t.data[0];
  }

  Var constant(Tensor t) { return push(std::move(t), false, nullptr); }
  Var leaf(const Tensor& t) { return push(t, true, nullptr); }

  std::size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    const Tensor &ta = val(a), &tb = val(b);
    require_same(ta, tb, "add");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return binary(std::move(out), a, b,
                  [](Graph& g, int self, int pa, int pb) {
                    const Tensor& go = g.nodes_[self].grad;
                    g.accumulate(pa, go);
                    g.accumulate(pb, go);
                  });
  }

  Var sub(Var a, Var b) {
    const Tensor &ta = val(a), &tb = val(b);
    require_same(ta, tb, "sub");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
    return binary(std::move(out), a, b,
                  [](Graph& g, int self, int pa, int pb) {
                    const Tensor& go = g.nodes_[self].grad;
                    g.accumulate(pa, go);
                    g.accumulate_scaled(pb, go, -1.0);
                  });
  }

  Var mul(Var a, Var b) {
    const Tensor &ta = val(a), &tb = val(b);
    require_same(ta, tb, "mul");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
    return binary(std::move(out), a, b,
                  [](Graph& g, int self, int pa, int pb) {
                    const Tensor& go = g.nodes_[self].grad;
                    if (g.wants(pa)) g.accumulate_product(pa, go, g.nodes_[pb].value);
                    if (g.wants(pb)) g.accumulate_product(pb, go, g.nodes_[pa].value);
                  });
  }

  Var scale(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v *= c;
    return unary(std::move(out), a, [c](Graph& g, int self, int pa) {
      g.accumulate_scaled(pa, g.nodes_[self].grad, c);
    });
  }

  Var add_const(Var a, double c) {
    Tensor out = val(a);
    for (double& v : out.data) v += c;
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      g.accumulate(pa, g.nodes_[self].grad);
    });
  }

  // [m,n] + [n] broadcast over rows
  Var add_rowvec(Var a, Var v) {
    const Tensor &ta = val(a), &tv = val(v);
    require_rowvec(ta, tv, "add_rowvec");
    Tensor out = ta;
    std::size_t m = ta.rows(), n = ta.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += tv.data[j];
    return binary(std::move(out), a, v,
                  [](Graph& g, int self, int pa, int pv) {
                    const Tensor& go = g.nodes_[self].grad;
                    g.accumulate(pa, go);
                    if (g.wants(pv)) {
                      Tensor gv({go.cols()});
                      for (std::size_t i = 0; i < go.rows(); ++i)
                        for (std::size_t j = 0; j < go.cols(); ++j)
                          gv.data[j] += go(i, j);
                      g.accumulate(pv, gv);
                    }
                  });
  }

  // [m,n] * [n] broadcast over rows
  Var mul_rowvec(Var a, Var v) {
    const Tensor &ta = val(a), &tv = val(v);
    require_rowvec(ta, tv, "mul_rowvec");
    Tensor out = ta;
    std::size_t m = ta.rows(), n = ta.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= tv.data[j];
    return binary(std::move(out), a, v,
                  [](Graph& g, int self, int pa, int pv) {
                    const Tensor& go = g.nodes_[self].grad;
                    const Tensor& tv2 = g.nodes_[pv].value;
                    if (g.wants(pa)) {
                      Tensor ga = go;
                      std::size_t n2 = go.cols();
                      for (std::size_t i = 0; i < go.rows(); ++i)
                        for (std::size_t j = 0; j < n2; ++j) ga.data[i * n2 + j] *= tv2.data[j];
                      g.accumulate(pa, ga);
                    }
                    if (g.wants(pv)) {
                      const Tensor& ta2 = g.nodes_[pa].value;
                      Tensor gv({go.cols()});
                      std::size_t n2 = go.cols();
                      for (std::size_t i = 0; i < go.rows(); ++i)
                        for (std::size_t j = 0; j < n2; ++j)
                          gv.data[j] += go.data[i * n2 + j] * ta2.data[i * n2 + j];
                      g.accumulate(pv, gv);
                    }
                  });
  }

  // multiply by a trainable scalar ([1] tensor)
  Var scale_var(Var a, Var s) {
    const Tensor& ts = val(s);
    if (ts.size() != 1) throw std::invalid_argument("scale_var: s must be scalar");
    Tensor out = val(a);
    double c = ts.data[0];
    for (double& v : out.data) v *= c;
    return binary(std::move(out), a, s,
                  [](Graph& g, int self, int pa, int ps) {
                    const Tensor& go = g.nodes_[self].grad;
                    double c2 = g.nodes_[ps].value.data[0];
                    if (g.wants(pa)) g.accumulate_scaled(pa, go, c2);
                    if (g.wants(ps)) {
                      const Tensor& ta = g.nodes_[pa].value;
                      double acc = 0.0;
                      for (std::size_t i = 0; i < go.size(); ++i) acc += go.data[i] * ta.data[i];
                      g.accumulate(ps, Tensor::scalar(acc));
                    }
                  });
  }

  Var add_scalar_var(Var a, Var s) {
    const Tensor& ts = val(s);
    if (ts.size() != 1) throw std::invalid_argument("add_scalar_var: s must be scalar");
    Tensor out = val(a);
    double c = ts.data[0];
    for (double& v : out.data) v += c;
    return binary(std::move(out), a, s,
                  [](Graph& g, int self, int pa, int ps) {
                    const Tensor& go = g.nodes_[self].grad;
                    g.accumulate(pa, go);
                    if (g.wants(ps)) g.accumulate(ps, Tensor::scalar(go.sum()));
                  });
  }

  // ---- unary nonlinearities ----

  Var tanh_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::tanh(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& y = g.nodes_[self].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= 1.0 - y.data[i] * y.data[i];
      g.accumulate(pa, ga);
    });
  }

  Var sigmoid_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = sigmoid_scalar(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& y = g.nodes_[self].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= y.data[i] * (1.0 - y.data[i]);
      g.accumulate(pa, ga);
    });
  }

  Var exp_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::exp(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& y = g.nodes_[self].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= y.data[i];
      g.accumulate(pa, ga);
    });
  }

  Var log_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::log(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] /= x.data[i];
      g.accumulate(pa, ga);
    });
  }

  Var sin_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::sin(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= std::cos(x.data[i]);
      g.accumulate(pa, ga);
    });
  }

  Var cos_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::cos(v);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= -std::sin(x.data[i]);
      g.accumulate(pa, ga);
    });
  }

  Var softplus_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] *= sigmoid_scalar(x.data[i]);
      g.accumulate(pa, ga);
    });
  }

  Var relu_(Var a) {
    Tensor out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.data[i] <= 0.0) ga.data[i] = 0.0;
      g.accumulate(pa, ga);
    });
  }

  Var elu_(Var a, double alpha = 1.0) {
    Tensor out = val(a);
    for (double& v : out.data) v = v > 0.0 ? v : alpha * std::expm1(v);
    return unary(std::move(out), a, [alpha](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& x = g.nodes_[pa].value;
      const Tensor& y = g.nodes_[self].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.data[i] <= 0.0) ga.data[i] *= y.data[i] + alpha;
      g.accumulate(pa, ga);
    });
  }

  // Numerically stable binary cross entropy against fixed 0/1 targets,
  // elementwise: max(mu,0) - mu*z + log1p(exp(-|mu|)).
  Var bce_with_logits(Var logits, Tensor targets) {
    const Tensor& mu = val(logits);
    require_same(mu, targets, "bce_with_logits");
    Tensor out = mu;
    for (std::size_t i = 0; i < out.size(); ++i) {
      double m = mu.data[i], z = targets.data[i];
      out.data[i] = std::max(m, 0.0) - m * z + std::log1p(std::exp(-std::fabs(m)));
    }
    Tensor z = std::move(targets);
    return unary(std::move(out), logits, [z](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& mu2 = g.nodes_[pa].value;
      Tensor ga = go;
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data[i] *= sigmoid_scalar(mu2.data[i]) - z.data[i];
      g.accumulate(pa, ga);
    });
  }

  // ---- matrix products ----

  // [m,k] x [k,n] -> [m,n]
  Var matmul(Var a, Var b) {
    const Tensor &ta = val(a), &tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
      throw std::invalid_argument("matmul: bad shapes " + shape_str(ta) + " x " + shape_str(tb));
    Tensor out({ta.rows(), tb.cols()});
    mm_nn(out, ta, tb);
    return binary(std::move(out), a, b,
                  [](Graph& g, int self, int pa, int pb) {
                    const Tensor& go = g.nodes_[self].grad;
                    if (g.wants(pa)) {
                      Tensor da({g.nodes_[pa].value.rows(), g.nodes_[pa].value.cols()});
                      mm_nt(da, go, g.nodes_[pb].value); // dA = G * B^T
                      g.accumulate(pa, da);
                    }
                    if (g.wants(pb)) {
                      Tensor db({g.nodes_[pb].value.rows(), g.nodes_[pb].value.cols()});
                      mm_tn(db, g.nodes_[pa].value, go); // dB = A^T * G
                      g.accumulate(pb, db);
                    }
                  });
  }

  // [m,k] x [n,k]^T -> [m,n]
  Var matmul_nt(Var a, Var b) {
    const Tensor &ta = val(a), &tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols())
      throw std::invalid_argument("matmul_nt: bad shapes " + shape_str(ta) + " x " + shape_str(tb));
    Tensor out({ta.rows(), tb.rows()});
    mm_nt(out, ta, tb);
    return binary(std::move(out), a, b,
                  [](Graph& g, int self, int pa, int pb) {
                    const Tensor& go = g.nodes_[self].grad;
                    if (g.wants(pa)) {
                      Tensor da({g.nodes_[pa].value.rows(), g.nodes_[pa].value.cols()});
                      mm_nn(da, go, g.nodes_[pb].value); // dA = G * B
                      g.accumulate(pa, da);
                    }
                    if (g.wants(pb)) {
                      Tensor db({g.nodes_[pb].value.rows(), g.nodes_[pb].value.cols()});
                      mm_tn(db, go, g.nodes_[pa].value); // dB = G^T * A
                      g.accumulate(pb, db);
                    }
                  });
  }

  // ---- reductions / shaping ----

  // [m, s*g] -> [m, s], summing g consecutive columns
  Var chunk_sum_cols(Var a, std::size_t group) {
    const Tensor& ta = val(a);
    if (ta.rank() != 2 || group == 0 || ta.cols() % group != 0)
      throw std::invalid_argument("chunk_sum_cols: bad group for " + shape_str(ta));
    std::size_t m = ta.rows(), s = ta.cols() / group;
    Tensor out({m, s});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < s; ++j) {
        double acc = 0.0;
        const double* src = &ta.data[i * ta.cols() + j * group];
        for (std::size_t q = 0; q < group; ++q) acc += src[q];
        out(i, j) = acc;
      }
    return unary(std::move(out), a, [group](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& ta2 = g.nodes_[pa].value;
      Tensor ga(ta2.shape);
      std::size_t s2 = go.cols();
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < s2; ++j) {
          double v = go(i, j);
          double* dst = &ga.data[i * ta2.cols() + j * group];
          for (std::size_t q = 0; q < group; ++q) dst[q] += v;
        }
      g.accumulate(pa, ga);
    });
  }

  Var sum_all(Var a) {
    Tensor out = Tensor::scalar(val(a).sum());
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      double v = g.nodes_[self].grad.data[0];
      const Tensor& ta = g.nodes_[pa].value;
      Tensor ga = Tensor::full(ta.shape, v);
      g.accumulate(pa, ga);
    });
  }

  Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(val(a).size())); }

  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Tensor& ta = val(a);
    if (ta.rank() != 2) throw std::invalid_argument("gather_rows: rank-2 expected");
    std::size_t n = ta.cols();
    Tensor out({idx.size(), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= ta.rows()) throw std::out_of_range("gather_rows index");
      std::copy_n(&ta.data[idx[r] * n], n, &out.data[r * n]);
    }
    return unary(std::move(out), a, [idx](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& ta2 = g.nodes_[pa].value;
      Tensor ga(ta2.shape);
      std::size_t n2 = ta2.cols();
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < n2; ++j) ga.data[idx[r] * n2 + j] += go.data[r * n2 + j];
      g.accumulate(pa, ga);
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = val(a);
    if (ta.rank() != 2 || c1 > ta.cols() || c0 >= c1)
      throw std::invalid_argument("slice_cols: bad range");
    std::size_t m = ta.rows(), n = c1 - c0;
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(&ta.data[i * ta.cols() + c0], n, &out.data[i * n]);
    return unary(std::move(out), a, [c0, c1](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& ta2 = g.nodes_[pa].value;
      Tensor ga(ta2.shape);
      std::size_t n2 = c1 - c0;
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < n2; ++j) ga.data[i * ta2.cols() + c0 + j] += go.data[i * n2 + j];
      g.accumulate(pa, ga);
    });
  }

  Var reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& ta = val(a);
    if (Tensor::count(shape) != ta.size()) throw std::invalid_argument("reshape: size mismatch");
    Tensor out(std::move(shape), ta.data);
    return unary(std::move(out), a, [](Graph& g, int self, int pa) {
      const Tensor& go = g.nodes_[self].grad;
      const Tensor& ta2 = g.nodes_[pa].value;
      Tensor ga(ta2.shape, go.data);
      g.accumulate(pa, ga);
    });
  }

  // ---- strided 2-D convolution (zero padding) ----
  // x: [B,C,H,W], w: [O,C,kh,kw], b: [O] -> [B,O,Ho,Wo]
  Var conv2d(Var x, Var w, Var b, std::size_t stride, std::size_t pad) {
    const Tensor &tx = val(x), &tw = val(w), &tb = val(b);
    if (tx.rank() != 4 || tw.rank() != 4 || tb.rank() != 1)
      throw std::invalid_argument("conv2d: bad ranks");
    std::size_t B = tx.shape[0], C = tx.shape[1], H = tx.shape[2], W = tx.shape[3];
    std::size_t O = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
    if (tw.shape[1] != C || tb.shape[0] != O)
      throw std::invalid_argument("conv2d: channel mismatch");
    if (H + 2 * pad < kh || W + 2 * pad < kw) throw std::invalid_argument("conv2d: kernel too large");
    std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
    std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
    Tensor out({B, O, Ho, Wo});
    conv_forward(out, tx, tw, tb, stride, pad);
    Var v = push(std::move(out), nodes_[x.id].requires_grad || nodes_[w.id].requires_grad ||
                                     nodes_[b.id].requires_grad,
                 nullptr);
    int self = v.id, px = x.id, pw = w.id, pb = b.id;
    nodes_[self].backward = [self, px, pw, pb, stride, pad](Graph& g) {
      g.conv_backward(self, px, pw, pb, stride, pad);
    };
    return v;
  }

  // ---- backward driver ----

  void backward(Var root) {
    Node& r = nodes_[check(root)];
    if (r.value.size() != 1) throw std::logic_error("backward: root must be scalar");
    ensure_grad(root.id);
    nodes_[root.id].grad.data[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad_alloc && n.backward) n.backward(*this);
    }
  }

  bool wants(int id) const { return nodes_[id].requires_grad; }

  void accumulate(int id, const Tensor& g) {
    if (!wants(id)) return;
    ensure_grad(id);
    Tensor& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i];
  }

  void accumulate_scaled(int id, const Tensor& g, double c) {
    if (!wants(id)) return;
    ensure_grad(id);
    Tensor& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += c * g.data[i];
  }

  void accumulate_product(int id, const Tensor& g, const Tensor& other) {
    if (!wants(id)) return;
    ensure_grad(id);
    Tensor& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += g.data[i] * other.data[i];
  }

  static double sigmoid_scalar(double x) {
    if (x >= 0.0) {
      double e = std::exp(-x);
      return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
  }

  // ---- plain matmul kernels (also used by the tape-free inference path) ----

  static void mm_nn(Tensor& c, const Tensor& a, const Tensor& b) {
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double* cr = &c.data[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        double av = a.data[i * k + p];
        if (av == 0.0) continue;
        const double* br = &b.data[p * n];
        for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
      }
    }
  }

  static void mm_nt(Tensor& c, const Tensor& a, const Tensor& b) {
    std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
      const double* ar = &a.data[i * k];
      double* cr = &c.data[i * n];
      for (std::size_t j = 0; j < n; ++j) {
        const double* br = &b.data[j * k];
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
        cr[j] += acc;
      }
    }
  }

  static void mm_tn(Tensor& c, const Tensor& a, const Tensor& b) {
    std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
      const double* ar = &a.data[i * k];
      const double* br = &b.data[i * n];
      for (std::size_t p = 0; p < k; ++p) {
        double av = ar[p];
        if (av == 0.0) continue;
        double* cr = &c.data[p * n];
        for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
      }
    }
  }

  static void conv_forward(Tensor& out, const Tensor& x, const Tensor& w, const Tensor& b,
                           std::size_t stride, std::size_t pad) {
    std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    std::size_t O = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    std::size_t Ho = out.shape[2], Wo = out.shape[3];
    for (std::size_t s = 0; s < B; ++s)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < Ho; ++i)
          for (std::size_t j = 0; j < Wo; ++j) {
            double acc = b.data[o];
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t u = 0; u < kh; ++u) {
                std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(i * stride + u) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t t = 0; t < kw; ++t) {
                  std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(j * stride + t) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                  acc += x.data[((s * C + c) * H + hi) * W + wi] *
                         w.data[((o * C + c) * kh + u) * kw + t];
                }
              }
            out.data[((s * O + o) * Ho + i) * Wo + j] = acc;
          }
  }

 private:
  std::vector<Node> nodes_;

  int check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::logic_error("invalid Var");
    return v.id;
  }

  Var push(Tensor value, bool needs_grad, std::function<void(Graph&)> bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = needs_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  void ensure_grad(int id) {
    Node& n = nodes_[id];
    if (!n.grad_alloc) {
      n.grad = Tensor(n.value.shape);
      n.grad_alloc = true;
    }
  }

  template <typename F>
  Var unary(Tensor out, Var a, F f) {
    bool req = nodes_[a.id].requires_grad;
    Var v = push(std::move(out), req, nullptr);
    if (req) {
      int self = v.id, pa = a.id;
      nodes_[self].backward = [self, pa, f](Graph& g) { f(g, self, pa); };
    }
    return v;
  }

  template <typename F>
  Var binary(Tensor out, Var a, Var b, F f) {
    bool req = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    Var v = push(std::move(out), req, nullptr);
    if (req) {
      int self = v.id, pa = a.id, pb = b.id;
      nodes_[self].backward = [self, pa, pb, f](Graph& g) { f(g, self, pa, pb); };
    }
    return v;
  }

  static void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                                  shape_str(b));
  }

  static void require_rowvec(const Tensor& a, const Tensor& v, const char* op) {
    if (a.rank() != 2 || v.rank() != 1 || v.shape[0] != a.cols())
      throw std::invalid_argument(std::string(op) + ": expected [m,n] and [n]");
  }

  void conv_backward(int self, int px, int pw, int pb, std::size_t stride, std::size_t pad) {
    const Tensor& go = nodes_[self].grad;
    const Tensor& x = nodes_[px].value;
    const Tensor& w = nodes_[pw].value;
    std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    std::size_t O = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    std::size_t Ho = go.shape[2], Wo = go.shape[3];
    Tensor gx(x.shape), gw(w.shape), gb({O});
    for (std::size_t s = 0; s < B; ++s)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t i = 0; i < Ho; ++i)
          for (std::size_t j = 0; j < Wo; ++j) {
            double gv = go.data[((s * O + o) * Ho + i) * Wo + j];
            if (gv == 0.0) continue;
            gb.data[o] += gv;
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t u = 0; u < kh; ++u) {
                std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(i * stride + u) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t t = 0; t < kw; ++t) {
                  std::ptrdiff_t wi = static_cast<std::ptrdiff_t>(j * stride + t) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                  gx.data[((s * C + c) * H + hi) * W + wi] +=
                      gv * w.data[((o * C + c) * kh + u) * kw + t];
                  gw.data[((o * C + c) * kh + u) * kw + t] +=
                      gv * x.data[((s * C + c) * H + hi) * W + wi];
                }
              }
          }
    accumulate(px, gx);
    accumulate(pw, gw);
    accumulate(pb, gb);
  }
};

} // namespace genop
