#include "gradcheck.hpp"
#include "sincvae/adam.hpp"
#include "sincvae/autodiff.hpp"
#include "sincvae/error.hpp"

#include <doctest.h>

#include <array>

using namespace sincvae;
using sincvae::testing::gradient_check;
using sincvae::testing::random_tensor;
using sincvae::testing::weighted_sum;

namespace {

// Direct-summation oracle for cross-correlation with explicit zero padding.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, Index stride, bool same) {
  const Index n = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const Index cout = w.dim(0), k = w.dim(2);
  Index out = 0, pad = 0;
  if (same) {
    out = (len + stride - 1) / stride;
    pad = std::max<Index>((out - 1) * stride + k - len, 0) / 2;
  } else {
    out = (len - k) / stride + 1;
  }
  Tensor y({n, cout, out});
  for (Index bi = 0; bi < n; ++bi)
    for (Index co = 0; co < cout; ++co)
      for (Index t = 0; t < out; ++t) {
        double acc = b[co];
        for (Index ci = 0; ci < cin; ++ci)
          for (Index j = 0; j < k; ++j) {
            const Index src = t * stride + j - pad;
            if (src < 0 || src >= len) continue;
            acc += w[(co * cin + ci) * k + j] * x[(bi * cin + ci) * len + src];
          }
        y[(bi * cout + co) * out + t] = acc;
      }
  return y;
}

}  // namespace

TEST_CASE("conv1d with identity kernel reproduces the input") {
  ad::Graph g;
  auto x = g.constant(Tensor({1, 1, 3}, {1, 2, 3}));
  auto w = g.constant(Tensor({1, 1, 1}, {1}));
  auto b = g.constant(Tensor({1}, {0}));
  auto y = ad::conv1d(x, w, b, {1, ad::Padding::kValid});
  CHECK(y.shape() == Shape{1, 1, 3});
  CHECK(y.value()[0] == 1.0);
  CHECK(y.value()[1] == 2.0);
  CHECK(y.value()[2] == 3.0);
}

TEST_CASE("conv1d same padding aligns the kernel centre") {
  ad::Graph g;
  auto x = g.constant(Tensor({1, 1, 4}, {1, 0, 0, 0}));
  auto w = g.constant(Tensor({1, 1, 3}, {1, 2, 3}));
  auto b = g.constant(Tensor({1}, {0}));
  auto y = ad::conv1d(x, w, b);
  const Tensor expected = conv_oracle(x.value(), w.value(), b.value(), 1, true);
  REQUIRE(y.shape() == expected.shape());
  for (Index i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(expected[i]));
  // Cross-correlation: y[t] = sum_k w[k] x[t + k - 1].
  CHECK(y.value()[0] == 2.0);
  CHECK(y.value()[1] == 1.0);
  CHECK(y.value()[2] == 0.0);
}

TEST_CASE("conv1d agrees with direct summation on all small shapes") {
  Rng rng(7);
  int checked = 0;
  for (Index len : {1, 2, 3, 5, 8, 13, 21, 32}) {
    for (Index k : {1, 2, 3, 4, 7}) {
      for (Index stride : {1, 2, 3}) {
        for (bool same : {true, false}) {
          if (!same && len < k) continue;
          ad::Graph g;
          const Tensor xt = random_tensor({2, 3, len}, rng);
          const Tensor wt = random_tensor({2, 3, k}, rng);
          const Tensor bt = random_tensor({2}, rng);
          auto y = ad::conv1d(g.constant(xt), g.constant(wt), g.constant(bt),
                              {stride, same ? ad::Padding::kSame : ad::Padding::kValid});
          const Tensor expected = conv_oracle(xt, wt, bt, stride, same);
          REQUIRE(y.shape() == expected.shape());
          CHECK((y.value().data() - expected.data()).cwiseAbs().maxCoeff() < 1e-12);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 150);
}

TEST_CASE("conv1d rejects mismatched channels and reports both shapes") {
  ad::Graph g;
  auto x = g.constant(Tensor::zeros({1, 2, 8}));
  auto w = g.constant(Tensor::zeros({1, 3, 3}));
  auto b = g.constant(Tensor::zeros({1}));
  try {
    ad::conv1d(x, w, b);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
    const std::string msg = e.what();
    CHECK(msg.find("[1,2,8]") != std::string::npos);
    CHECK(msg.find("[1,3,3]") != std::string::npos);
  }
}

TEST_CASE("add rejects mismatched shapes") {
  ad::Graph g;
  auto a = g.constant(Tensor::zeros({2, 3}));
  auto b = g.constant(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(ad::add(a, b), Error);
}

TEST_CASE("layer_norm produces zero mean and unit variance") {
  ad::Graph g;
  auto y = ad::layer_norm(g.constant(Tensor({3}, {2, 4, 6})), 0.0);
  const Eigen::VectorXd& v = y.value().data();
  CHECK(v.mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((v.array().square().mean()) == doctest::Approx(1.0));
  CHECK(v[0] == doctest::Approx(-std::sqrt(1.5)));
}

TEST_CASE("backward of simple losses") {
  SUBCASE("sum gives ones") {
    ad::Graph g;
    auto p = g.parameter(Tensor({3}, {4, -1, 2}));
    g.backward(ad::sum(p));
    CHECK(g.grad(p).data() == Eigen::Vector3d::Ones());
  }
  SUBCASE("sum of squares gives 2p") {
    ad::Graph g;
    auto p = g.parameter(Tensor({2}, {1, 2}));
    g.backward(ad::sum(ad::square(p)));
    CHECK(g.grad(p)[0] == 2.0);
    CHECK(g.grad(p)[1] == 4.0);
  }
  SUBCASE("non-parameter leaves get no gradient") {
    ad::Graph g;
    auto p = g.parameter(Tensor({2}, {1, 2}));
    auto c = g.constant(Tensor({2}, {3, 4}));
    g.backward(ad::sum(ad::mul(p, c)));
    CHECK(g.grad(p)[1] == 4.0);
    CHECK(g.grad(c).data().isZero());
  }
}

TEST_CASE("backward twice on one graph is rejected") {
  ad::Graph g;
  auto p = g.parameter(Tensor({1}, {1}));
  auto loss = ad::sum(p);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), Error);
}

TEST_CASE("backward requires a scalar loss") {
  ad::Graph g;
  auto p = g.parameter(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(g.backward(ad::square(p)), Error);
}

TEST_CASE("non-finite forward values are rejected") {
  ad::Graph g;
  auto p = g.parameter(Tensor({1}, {1000.0}));
  CHECK_THROWS_AS(ad::exp(p), Error);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(11);
  const Tensor pt = random_tensor({4, 5}, rng);
  auto loss_a = [](ad::Graph&, ad::Var p) { return ad::sum(ad::tanh(p)); };
  auto loss_b = [](ad::Graph&, ad::Var p) { return ad::mean(ad::square(p)); };
  ad::Graph ga, gb, gab;
  auto pa = ga.parameter(pt);
  ga.backward(loss_a(ga, pa));
  auto pb = gb.parameter(pt);
  gb.backward(loss_b(gb, pb));
  auto pab = gab.parameter(pt);
  gab.backward(ad::add(loss_a(gab, pab), loss_b(gab, pab)));
  const Eigen::VectorXd diff = gab.grad(pab).data() - ga.grad(pa).data() - gb.grad(pb).data();
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("every op matches central finite differences") {
  Rng rng(2024);
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    sincvae::testing::GraphBuilder build;
    double lo = -1.0;
    double hi = 1.0;
  };
  const std::vector<Case> cases = {
      {"add", {{3, 4}, {3, 4}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::add(v[0], v[1]), 1); }},
      {"sub", {{3, 4}, {3, 4}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::sub(v[0], v[1]), 2); }},
      {"mul", {{3, 4}, {3, 4}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::mul(v[0], v[1]), 3); }},
      {"scale", {{5}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::scale(v[0], -2.5), 4); }},
      {"add_scalar", {{5}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::add_scalar(v[0], 3.0), 5); }},
      {"exp", {{6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::exp(v[0]), 6); }},
      {"log", {{6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::log(v[0]), 7); }, 0.5, 2.0},
      {"square", {{6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::square(v[0]), 8); }},
      {"relu", {{6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::relu(v[0]), 9); }, 0.1, 1.0},
      {"tanh", {{6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::tanh(v[0]), 10); }},
      {"mean", {{2, 3}}, [](ad::Graph& g, auto& v) { return ad::scale(ad::mean(ad::square(v[0])), 1.0); }},
      {"reshape", {{2, 6}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::reshape(v[0], {3, 4}), 11); }},
      {"slice", {{2, 3, 5}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::slice(v[0], 2, 1, 3), 12); }},
      {"concat", {{2, 2, 3}, {2, 1, 3}},
       [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::concat(std::span<const ad::Var>(v), 1), 13); }},
      {"matmul", {{3, 4}, {4, 2}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::matmul(v[0], v[1]), 14); }},
      {"affine", {{3, 4}, {2, 4}, {2}},
       [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::affine(v[0], v[1], v[2]), 15); }},
      {"conv1d stride 2", {{2, 3, 9}, {4, 3, 3}, {4}},
       [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::conv1d(v[0], v[1], v[2], {2, ad::Padding::kSame}), 16); }},
      {"conv1d valid", {{2, 2, 8}, {3, 2, 4}, {3}},
       [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::conv1d(v[0], v[1], v[2], {1, ad::Padding::kValid}), 17); }},
      {"depthwise", {{2, 2, 10}, {3, 5}},
       [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::depthwise_conv1d(v[0], v[1]), 18); }},
      {"upsample", {{2, 3, 4}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::upsample_nearest(v[0], 2), 19); }},
      {"layer_norm", {{3, 7}}, [](ad::Graph& g, auto& v) { return weighted_sum(g, ad::layer_norm(v[0]), 20); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    std::vector<Tensor> inputs;
    for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng, c.lo, c.hi));
    const auto result = gradient_check(c.build, inputs);
    CHECK(result.max_rel_error < 1e-4);
  }
}

TEST_CASE("adam step") {
  SUBCASE("zero gradient from a fresh state leaves parameters unchanged") {
    ParameterSet params;
    params.add("w", Tensor({3}, {1, -2, 3}));
    auto state = AdamState::for_parameters(params);
    adam_step(params, {Tensor::zeros({3})}, state);
    CHECK(params.at("w")[0] == 1.0);
    CHECK(params.at("w")[1] == -2.0);
    CHECK(params.at("w")[2] == 3.0);
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves by about the learning rate") {
    ParameterSet params;
    params.add("w", Tensor({1}, {0.25}));
    auto state = AdamState::for_parameters(params);
    adam_step(params, {Tensor({1}, {1.0})}, state);
    // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps).
    CHECK(0.25 - params.at("w")[0] == doctest::Approx(0.0005 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("deterministic") {
    ParameterSet a, b;
    a.add("w", Tensor({2}, {0.3, -0.7}));
    b.add("w", Tensor({2}, {0.3, -0.7}));
    auto sa = AdamState::for_parameters(a);
    auto sb = AdamState::for_parameters(b);
    for (int i = 0; i < 3; ++i) {
      adam_step(a, {Tensor({2}, {0.1, -0.4})}, sa);
      adam_step(b, {Tensor({2}, {0.1, -0.4})}, sb);
    }
    CHECK(a.at("w").data() == b.at("w").data());
  }
  SUBCASE("non-finite gradient names the parameter") {
    ParameterSet params;
    params.add("encoder.w", Tensor({1}, {0.0}));
    auto state = AdamState::for_parameters(params);
    try {
      adam_step(params, {Tensor({1}, {std::nan("")})}, state);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonFinite);
      CHECK(std::string(e.what()).find("encoder.w") != std::string::npos);
    }
    CHECK(state.step == 0);
  }
}
