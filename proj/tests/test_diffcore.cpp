#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "genop/core/adam.hpp"
#include "genop/core/graph.hpp"
#include "genop/core/nn.hpp"
#include "genop/core/rng.hpp"
#include "test_util.hpp"

using namespace genop;
using Catch::Approx;

TEST_CASE("tanh_sin values and periodicity") {
  CHECK(std::fabs(tanh_sin(0.0)) < 1e-15);
  CHECK(std::fabs(tanh_sin(1.0) - 1.0) < 1e-14);
  // 0.5 + tanh(-1), evaluated independently to double precision
  CHECK(tanh_sin(0.5) == Approx(-0.26159415595576485).epsilon(1e-12));
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(-5.0, 5.0);
    double px = tanh_sin(x) - x;
    double px2 = tanh_sin(x + 2.0) - (x + 2.0);
    CHECK(px == Approx(px2).margin(1e-12));
  }
  for (int k = -4; k <= 4; ++k) CHECK(std::fabs(tanh_sin(k) - k) < 1e-14);
}

TEST_CASE("mlp_forward basics") {
  MlpSpec spec{{1, 1}, Act::Tanh, {}};
  MlpParams p;
  p.W = {Tensor({1, 1}, {2.0})};
  p.b = {Tensor({1}, {1.0})};
  Tensor x({1, 1}, {3.0});
  CHECK(mlp_forward(spec, p, x)(0, 0) == 7.0);  // single layer is linear

  // zero weights/biases: output = activation(0) per unit
  MlpSpec s2{{3, 4, 2}, Act::Sigmoid, Act::Sigmoid};
  MlpParams p2;
  p2.W = {Tensor({3, 4}), Tensor({4, 2})};
  p2.b = {Tensor({4}), Tensor({2})};
  Tensor y = mlp_forward(s2, p2, Tensor({1, 3}, {1.0, -2.0, 0.5}));
  for (double v : y.data) CHECK(v == 0.5);

  // seeded 2-layer net against an independent straight-line recomputation
  MlpSpec s3{{2, 3, 1}, Act::Tanh, {}};
  Rng rng(42);
  MlpParams p3 = mlp_init(s3, rng);
  Tensor in({1, 2}, {0.3, -0.7});
  double h[3];
  for (int j = 0; j < 3; ++j) {
    double z = p3.b[0][j];
    for (int i = 0; i < 2; ++i) z += in.data[i] * p3.W[0](i, j);
    h[j] = std::tanh(z);
  }
  double outv = p3.b[1][0];
  for (int j = 0; j < 3; ++j) outv += h[j] * p3.W[1](j, 0);
  CHECK(mlp_forward(s3, p3, in)(0, 0) == Approx(outv).epsilon(1e-14));
}

TEST_CASE("shape errors are rejected") {
  MlpSpec spec{{2, 3}, Act::Tanh, {}};
  Rng rng(1);
  MlpParams p = mlp_init(spec, rng);
  CHECK_THROWS_AS(mlp_forward(spec, p, Tensor({1, 5})), std::invalid_argument);
  Graph g;
  Var a = g.leaf(Tensor({2, 3}));
  Var b = g.leaf(Tensor({2, 4}));
  CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(g.matmul(a, b), std::invalid_argument);
}

TEST_CASE("grad_wrt_params closed forms") {
  // loss = 0.5 |theta|^2 -> grad = theta
  Graph g;
  Tensor th({1, 4}, {0.3, -1.2, 2.0, 0.07});
  Var v = g.leaf(th);
  Var loss = g.scale(g.sum_all(g.mul(v, v)), 0.5);
  g.backward(loss);
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.grad(v).data[i] == Approx(th.data[i]).epsilon(1e-15));

  // linear loss c * theta_i -> gradient c e_i
  Graph g2;
  Var v2 = g2.leaf(th);
  Var picked = g2.slice_cols(v2, 2, 3);
  Var loss2 = g2.scale(g2.sum_all(picked), 3.5);
  g2.backward(loss2);
  CHECK(g2.grad(v2).data[2] == Approx(3.5));
  CHECK(g2.grad(v2).data[0] == 0.0);
}

namespace {

double mlp_loss_plain(const MlpSpec& spec, const MlpParams& p, const Tensor& x) {
  Tensor y = mlp_forward(spec, p, x);
  double acc = 0.0;
  for (double v : y.data) acc += v * v;
  return acc;
}

} // namespace

TEST_CASE("grad_wrt_params matches central differences on random MLPs") {
  for (Act act : {Act::Tanh, Act::SiLU, Act::ELU, Act::Sigmoid, Act::TanhSin}) {
    MlpSpec spec{{3, 8, 8, 2}, act, {}};
    Rng rng(11 + static_cast<int>(act));
    MlpParams p = mlp_init(spec, rng);
    Tensor x({4, 3});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

    Graph g;
    MlpVars mv = mlp_leaf(g, p);
    Var out = mlp_forward_g(g, spec, mv, g.constant(x));
    Var loss = g.sum_all(g.mul(out, out));
    g.backward(loss);

    std::vector<Tensor*> params;
    std::vector<Tensor> grads;
    for (std::size_t l = 0; l < p.W.size(); ++l) {
      params.push_back(&p.W[l]);
      grads.push_back(g.grad(mv.W[l]));
    }
    for (std::size_t l = 0; l < p.b.size(); ++l) {
      params.push_back(&p.b[l]);
      grads.push_back(g.grad(mv.b[l]));
    }
    double err = testutil::max_rel_grad_err([&] { return mlp_loss_plain(spec, p, x); }, params,
                                            grads);
    INFO("activation " << act_name(act));
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("grad_wrt_input: spatial tangents") {
  // linear single-layer net: du/dx = W
  MlpSpec spec{{2, 3}, Act::Identity, {}};
  Rng rng(5);
  MlpParams p = mlp_init(spec, rng);
  Tensor x({1, 2}, {0.4, -0.2});
  MlpDualFeatures d = mlp_features_dual(spec, p, x, {0, 1});
  for (int j = 0; j < 3; ++j) {
    CHECK(d.tangent[0][0](0, j) == Approx(p.W[0](0, j)).epsilon(1e-14));
    CHECK(d.tangent[1][0](0, j) == Approx(p.W[0](1, j)).epsilon(1e-14));
  }

  // x^2 through supported ops: d/dx = 2x at x = 3
  Graph g;
  Var xv = g.leaf(Tensor({1, 1}, {3.0}));
  Var y = g.mul(xv, xv);
  g.backward(y);
  CHECK(g.grad(xv).data[0] == 6.0);

  // small MLP tangents vs central differences in x
  MlpSpec s2{{2, 10, 10, 10}, Act::TanhSin, {}};
  Rng rng2(9);
  MlpParams p2 = mlp_init(s2, rng2);
  Tensor pt({1, 2}, {0.31, 0.67});
  MlpDualFeatures dual = mlp_features_dual(s2, p2, pt, {0, 1});
  double h = 1e-6;
  for (std::size_t dir = 0; dir < 2; ++dir) {
    Tensor xp = pt, xm = pt;
    xp.data[dir] += h;
    xm.data[dir] -= h;
    auto fp = mlp_features(s2, p2, xp).back();
    auto fm = mlp_features(s2, p2, xm).back();
    for (std::size_t j = 0; j < fp.size(); ++j) {
      double fd = (fp.data[j] - fm.data[j]) / (2.0 * h);
      CHECK(dual.tangent[dir].back().data[j] == Approx(fd).margin(1e-6).epsilon(1e-5));
    }
  }
}

TEST_CASE("nested derivative contract: d/dtheta of du/dx") {
  MlpSpec spec{{2, 12, 12, 1}, Act::Tanh, {}};
  Rng rng(17);
  MlpParams p = mlp_init(spec, rng);
  Tensor x0({1, 2}, {0.42, -0.13});

  Graph g;
  MlpVars mv = mlp_leaf(g, p);
  MlpDualVars dual = mlp_features_dual_g(g, spec, mv, g.constant(x0), {0});
  Var loss = g.sum_all(dual.tangent[0].back());
  g.backward(loss);

  std::vector<Tensor*> params;
  std::vector<Tensor> grads;
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    params.push_back(&p.W[l]);
    grads.push_back(g.grad(mv.W[l]));
    params.push_back(&p.b[l]);
    grads.push_back(g.grad(mv.b[l]));
  }

  // oracle: finite differences in theta of the finite-difference-in-x quotient
  auto eval = [&] {
    double hx = 1e-6;
    Tensor xp = x0, xm = x0;
    xp.data[0] += hx;
    xm.data[0] -= hx;
    double fp = mlp_features(spec, p, xp).back().sum();
    double fm = mlp_features(spec, p, xm).back().sum();
    return (fp - fm) / (2.0 * hx);
  };
  double err = testutil::max_rel_grad_err(eval, params, grads, 1e-5);
  CHECK(err <= 1e-4);
}

TEST_CASE("conv2d gradients") {
  Rng rng(23);
  Tensor x({2, 2, 5, 5});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor w({3, 2, 3, 3});
  for (double& v : w.data) v = rng.uniform(-0.5, 0.5);
  Tensor b({3});
  for (double& v : b.data) v = rng.uniform(-0.1, 0.1);

  auto loss_plain = [&] {
    std::size_t ho = (5 + 2 - 3) / 2 + 1;
    Tensor out({2, 3, ho, ho});
    Graph::conv_forward(out, x, w, b, 2, 1);
    double acc = 0.0;
    for (double v : out.data) acc += v * v;
    return acc;
  };

  Graph g;
  Var xv = g.leaf(x), wv = g.leaf(w), bv = g.leaf(b);
  Var out = g.conv2d(xv, wv, bv, 2, 1);
  Var loss = g.sum_all(g.mul(out, out));
  g.backward(loss);

  std::vector<Tensor*> params{&x, &w, &b};
  std::vector<Tensor> grads{g.grad(xv), g.grad(wv), g.grad(bv)};
  CHECK(testutil::max_rel_grad_err(loss_plain, params, grads) <= 1e-5);
}

TEST_CASE("adam") {
  SECTION("zero gradients are a fixed point") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    Tensor before = p;
    std::vector<Tensor*> ps{&p};
    AdamState st = AdamState::like(ps);
    adam_step(ps, {Tensor({3})}, st, 1e-3);
    CHECK(st.step == 1);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.data[i] == before.data[i]);
  }
  SECTION("first scalar step") {
    Tensor p({1}, {0.0});
    std::vector<Tensor*> ps{&p};
    AdamState st = AdamState::like(ps);
    adam_step(ps, {Tensor({1}, {1.0})}, st, 1e-3);
    CHECK(p.data[0] == Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SECTION("identical parameters get identical updates") {
    Tensor p({2}, {0.7, 0.7});
    std::vector<Tensor*> ps{&p};
    AdamState st = AdamState::like(ps);
    adam_step(ps, {Tensor({2}, {0.3, 0.3})}, st, 1e-2);
    CHECK(p.data[0] == p.data[1]);
  }
  SECTION("shape mismatch is rejected") {
    Tensor p({2});
    std::vector<Tensor*> ps{&p};
    AdamState st = AdamState::like(ps);
    std::vector<Tensor> g;
    g.push_back(Tensor({3}));
    CHECK_THROWS_AS(adam_step(ps, g, st, 1e-3), std::invalid_argument);
  }
}

TEST_CASE("lr_schedule") {
  CHECK(lr_schedule(0, 1e-3) == 1e-3);
  CHECK(lr_schedule(2500, 1e-3) == Approx(5e-4));
  CHECK(lr_schedule(5000, 1e-3) == Approx(2.5e-4));
  CHECK(lr_schedule(2499, 1e-3) == 1e-3);
  CHECK(lr_schedule(999, 1e-3, 500) == Approx(5e-4));
}

TEST_CASE("deterministic forward/backward under a fixed seed") {
  auto run = [] {
    MlpSpec spec{{3, 6, 1}, Act::SiLU, {}};
    Rng rng(99);
    MlpParams p = mlp_init(spec, rng);
    Tensor x({2, 3});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    Graph g;
    MlpVars mv = mlp_leaf(g, p);
    Var out = mlp_forward_g(g, spec, mv, g.constant(x));
    Var loss = g.sum_all(g.mul(out, out));
    g.backward(loss);
    std::vector<double> res{g.val(loss).data[0]};
    for (Var v : mv.W) res.insert(res.end(), g.grad(v).data.begin(), g.grad(v).data.end());
    return res;
  };
  auto a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("activation prime nodes agree with the scalar derivative") {
  Rng rng(3);
  for (Act act : {Act::Tanh, Act::SiLU, Act::ELU, Act::ReLU, Act::Sigmoid, Act::TanhSin}) {
    Graph g;
    Tensor z({1, 9});
    for (double& v : z.data) v = rng.uniform(-2.0, 2.0);
    Var zv = g.constant(z);
    ActNodes an = act_apply(g, act, zv);
    Var pr = act_prime(g, act, zv, an);
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(g.val(an.y).data[i] == Approx(act_eval(act, z.data[i])).margin(1e-14));
      CHECK(g.val(pr).data[i] == Approx(act_deriv(act, z.data[i])).margin(1e-14));
    }
  }
}

TEST_CASE("clip_grad_norm") {
  std::vector<Tensor> gs;
  gs.push_back(Tensor({2}, {3.0, 0.0}));
  gs.push_back(Tensor({1}, {4.0}));
  double n = clip_grad_norm(gs, 1.0);
  CHECK(n == Approx(5.0));
  CHECK(gs[0].data[0] == Approx(0.6));
  CHECK(gs[1].data[0] == Approx(0.8));
}
