#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace spoofguard;
using sgtest::rand_tensor;

namespace {

TEST(GradCheck, EveryOpMatchesCentralDifferences) {
  for (const auto& c : sgtest::op_grad_cases()) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
      sgtest::GradProblem pr = c.make(rng);
      const GradCheckReport r = grad_check(pr.build, pr.params);
      ASSERT_TRUE(r.passed) << c.name << " trial " << trial << ": rel " << r.max_rel_error << " analytic " << r.analytic
                            << " numeric " << r.numeric;
    }
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // x * x whose backward claims d/dx = x instead of 2x.
  GraphBuilder bad = [](Graph& g, std::span<const NodeId> p) {
    const Tensor& xv = g.value(p[0]);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * xv[i];
    const NodeId x = p[0];
    const NodeId sq = g.record("bad_square", {x}, std::move(y), [x](Graph& gr, const Tensor& go) {
      Tensor* dx = gr.grad_sink(x);
      const Tensor& xv2 = gr.value(x);
      for (std::size_t i = 0; i < go.size(); ++i) (*dx)[i] += go[i] * xv2[i];
    });
    return ops::mean(g, sq);
  };
  const GradCheckReport r = grad_check(bad, {Tensor({3}, std::vector<double>{0.5, -1.0, 2.0})});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.max_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, LinearFunctionIsExact) {
  GraphBuilder f = [](Graph& g, std::span<const NodeId> p) {
    return ops::weighted_sum(g, p[0], Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  };
  const GradCheckReport r = grad_check(f, {Tensor({3}, std::vector<double>{0.3, 0.1, -4.0})});
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.checked, 3u);
}

TEST(GradCheck, ConvPoolAffineNet) {
  std::mt19937_64 rng(21);
  GraphBuilder f = [](Graph& g, std::span<const NodeId> p) {
    NodeId h = ops::conv1d(g, p[0], p[1]);
    h = ops::maxpool1d(g, h, 2);
    h = ops::reshape(g, h, {2, 6});
    const std::vector<int> labels{0, 1};
    return ops::mean(g, ops::softmax_xent(g, ops::affine(g, h, p[2], p[3]), labels));
  };
  const GradCheckReport r = grad_check(
      f, {sgtest::rand_distinct({2, 2, 8}, rng), rand_tensor({2, 2, 3}, rng), rand_tensor({6, 2}, rng), rand_tensor({2}, rng)});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, NonScalarBuilderIsAnError) {
  GraphBuilder f = [](Graph& g, std::span<const NodeId> p) { return ops::relu(g, p[0]); };
  EXPECT_THROW(grad_check(f, {Tensor({2}, 1.0)}), ShapeError);
}

TEST(GradCheck, ReportsTheWorstParameter) {
  // Second parameter's gradient is deliberately wrong.
  GraphBuilder f = [](Graph& g, std::span<const NodeId> p) {
    const NodeId b = p[1];
    Tensor v = g.value(b);
    for (double& x : v.data()) x = 3.0 * x;
    const NodeId tripled = g.record("bad_scale", {b}, std::move(v), [b](Graph& gr, const Tensor& go) {
      Tensor* d = gr.grad_sink(b);
      for (std::size_t i = 0; i < go.size(); ++i) (*d)[i] += go[i];
    });
    return ops::add(g, ops::mean(g, p[0]), ops::mean(g, tripled));
  };
  const GradCheckReport r = grad_check(f, {Tensor({2}, 1.0), Tensor({4}, 1.0)});
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_param, 1u);
}

TEST(Ops, OutputLengthFormulas) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = sgtest::rand_int(rng, 1, 5), stride = sgtest::rand_int(rng, 1, 3), pad = sgtest::rand_int(rng, 0, 2);
    const std::size_t t = sgtest::rand_int(rng, k, 30), w = sgtest::rand_int(rng, 1, 4);
    Graph g;
    const NodeId y = ops::conv1d(g, g.constant(Tensor({1, 1, t})), g.constant(Tensor({1, 1, k})), stride, pad);
    EXPECT_EQ(g.shape(y)[2], (t + 2 * pad - k) / stride + 1);
    if (t >= w) {
      EXPECT_EQ(g.shape(ops::maxpool1d(g, g.constant(Tensor({1, 1, t})), w))[2], t / w);
    }
  }
}

TEST(Ops, MaxpoolTiesRouteGradientToFirstMaximum) {
  Graph g;
  const NodeId x = g.parameter(Tensor({1, 1, 3}, std::vector<double>{2.0, 2.0, 1.0}));
  g.backward(ops::mean(g, ops::maxpool1d(g, x, 3)));
  EXPECT_EQ(g.grad(x), Tensor({1, 1, 3}, std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Ops, SoftmaxXentSymmetricLogits) {
  Graph g;
  const std::vector<int> labels{0, 1};
  const Tensor& l = g.value(ops::softmax_xent(g, g.constant(Tensor({2, 2}, 0.0)), labels));
  EXPECT_NEAR(l[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(l[1], std::log(2.0), 1e-15);
}

TEST(Ops, FiniteOutputsForLargeFiniteInputs) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    const NodeId x = g.constant(rand_tensor({2, 3, 6}, rng, -1e3, 1e3));
    ops::BatchNormState st(3);
    std::vector<NodeId> outs{ops::sigmoid(g, x), ops::tanh(g, x), ops::leaky_relu(g, x),
                             ops::batchnorm1d(g, x, g.constant(Tensor({3}, 1.0)), g.constant(Tensor({3}, 0.0)), st,
                                              ops::Mode::train),
                             ops::conv1d(g, x, g.constant(rand_tensor({2, 3, 3}, rng, -1e3, 1e3))),
                             ops::mean_time(g, x)};
    const std::vector<int> labels{0, 1};
    outs.push_back(ops::softmax_xent(g, g.constant(rand_tensor({2, 2}, rng, -1e3, 1e3)), labels));
    for (NodeId o : outs) EXPECT_TRUE(g.value(o).all_finite()) << g.kind(o);
  }
}

TEST(Ops, ForwardIsDeterministic) {
  std::mt19937_64 rng(14);
  const Tensor x = rand_tensor({2, 3, 10}, rng), w = rand_tensor({4, 3, 3}, rng);
  auto run = [&] {
    Graph g;
    return g.value(ops::maxpool1d(g, ops::conv1d(g, g.constant(x), g.constant(w)), 2));
  };
  EXPECT_EQ(run(), run());
}

TEST(Gru, ZeroInputZeroStateStaysZero) {
  Graph g;
  std::mt19937_64 rng(15);
  auto c = [&](Shape s) { return g.constant(rand_tensor(std::move(s), rng)); };
  auto z = [&](Shape s) { return g.constant(Tensor(std::move(s), 0.0)); };
  const GruNodes p{c({2, 3}), c({2, 3}), c({2, 3}), c({3, 3}), c({3, 3}), c({3, 3}), z({3}), z({3}), z({3})};
  const GruOutput o = gru_forward(g, z({1, 4, 2}), p);
  EXPECT_EQ(g.value(o.h_last), Tensor({1, 3}, 0.0));
}

TEST(Gru, OneStepEqualsOneCellAndLastStateMatchesOutputs) {
  std::mt19937_64 rng(16);
  Graph g;
  auto c = [&](Shape s) { return g.constant(rand_tensor(std::move(s), rng)); };
  const GruNodes p{c({2, 3}), c({2, 3}), c({2, 3}), c({3, 3}), c({3, 3}), c({3, 3}), c({3}), c({3}), c({3})};
  const NodeId x = c({2, 1, 2});
  const GruOutput o = gru_forward(g, x, p);
  const NodeId cell = gru_cell(g, ops::time_step(g, x, 0), g.constant(Tensor({2, 3}, 0.0)), p);
  EXPECT_EQ(g.value(o.h_last), g.value(cell));

  const NodeId x3 = c({2, 4, 2});
  const GruOutput o3 = gru_forward(g, x3, p);
  const Tensor& outs = g.value(o3.outputs);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 3; ++h) EXPECT_EQ(outs.at(b, 3, h), g.value(o3.h_last).at(b, h));
}

TEST(Gru, SmallCaseGradientCheck) {
  std::mt19937_64 rng(17);
  std::vector<Tensor> params{rand_tensor({1, 3, 2}, rng)};
  for (int gate = 0; gate < 3; ++gate) {
    params.push_back(rand_tensor({2, 2}, rng));
    params.push_back(rand_tensor({2, 2}, rng));
    params.push_back(rand_tensor({2}, rng));
  }
  GraphBuilder f = [](Graph& g, std::span<const NodeId> p) {
    const GruNodes n{p[1], p[4], p[7], p[2], p[5], p[8], p[3], p[6], p[9]};
    return sgtest::sink(g, gru_forward(g, p[0], n).h_last, 5);
  };
  EXPECT_TRUE(grad_check(f, params).passed);
}

TEST(Graph, GradientsAccumulateOverSharedInputs) {
  Graph g;
  const NodeId x = g.parameter(Tensor({2}, std::vector<double>{3.0, -2.0}));
  const NodeId y = ops::add(g, ops::mul(g, x, x), x);  // x^2 + x
  g.backward(ops::weighted_sum(g, y, Tensor({2}, 1.0)));
  const Tensor dx = g.grad(x);
  EXPECT_DOUBLE_EQ(dx[0], 7.0);
  EXPECT_DOUBLE_EQ(dx[1], -3.0);
}

TEST(Graph, ConstantsReceiveNoGradient) {
  Graph g;
  const NodeId c = g.constant(Tensor({2}, 1.0));
  const NodeId p = g.parameter(Tensor({2}, 2.0));
  g.backward(ops::mean(g, ops::mul(g, c, p)));
  EXPECT_FALSE(g.requires_grad(c));
  EXPECT_EQ(g.grad(c), Tensor({2}, 0.0));
  EXPECT_EQ(g.grad(p), Tensor({2}, 0.5));
}

TEST(Graph, BackwardNeedsAScalar) {
  Graph g;
  const NodeId p = g.parameter(Tensor({2}, 1.0));
  EXPECT_THROW(g.backward(p), ShapeError);
}

TEST(Ops, ShapeMismatchesAreReported) {
  Graph g;
  const NodeId a = g.constant(Tensor({2, 3}));
  const NodeId b = g.constant(Tensor({3, 2}));
  EXPECT_THROW(ops::add(g, a, b), ShapeError);
  EXPECT_THROW(ops::affine(g, a, g.constant(Tensor({2, 2}))), ShapeError);
  EXPECT_THROW(ops::conv1d(g, g.constant(Tensor({1, 2, 5})), g.constant(Tensor({1, 3, 2}))), ShapeError);
  EXPECT_THROW(ops::maxpool1d(g, g.constant(Tensor({1, 1, 2})), 3), ShapeError);
}

TEST(Ops, Conv1dMatchesDirectSum) {
  std::mt19937_64 rng(3);
  const Tensor x = rand_tensor({2, 3, 9}, rng), w = rand_tensor({4, 3, 3}, rng);
  Graph g;
  const Tensor& y = g.value(ops::conv1d(g, g.constant(x), g.constant(w), 2, 1));
  ASSERT_EQ(y.shape(), (Shape{2, 4, 5}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t k = 0; k < 3; ++k) {
            const long t = static_cast<long>(2 * j + k) - 1;
            if (t >= 0 && t < 9) s += w.at(o, c, k) * x.at(b, c, static_cast<std::size_t>(t));
          }
        EXPECT_NEAR(y.at(b, o, j), s, 1e-12);
      }
}

TEST(Ops, MaxpoolDropsTrailingRemainder) {
  Graph g;
  const Tensor x({1, 1, 7}, std::vector<double>{1, 5, 2, 0, 3, -1, 9});
  const Tensor& y = g.value(ops::maxpool1d(g, g.constant(x), 3));
  EXPECT_EQ(y, Tensor({1, 1, 2}, std::vector<double>{5, 3}));
}

TEST(Ops, SoftmaxXentIsStableForLargeLogits) {
  Graph g;
  const std::vector<int> labels{0, 1};
  const Tensor& l = g.value(
      ops::softmax_xent(g, g.constant(Tensor({2, 2}, std::vector<double>{1000.0, 0.0, 1000.0, 0.0})), labels));
  EXPECT_DOUBLE_EQ(l[0], 0.0);
  EXPECT_DOUBLE_EQ(l[1], 1000.0);
}

TEST(Ops, SoftmaxXentRejectsBadLabels) {
  Graph g;
  const std::vector<int> labels{2};
  EXPECT_THROW(ops::softmax_xent(g, g.constant(Tensor({1, 2})), labels), InvalidInput);
}

TEST(BatchNorm, TrainModeUpdatesRunningStatistics) {
  Graph g;
  ops::BatchNormState st(1);
  const Tensor x({2, 1, 2}, std::vector<double>{1.0, 3.0, 5.0, 7.0});
  const NodeId y = ops::batchnorm1d(g, g.constant(x), g.constant(Tensor({1}, 1.0)), g.constant(Tensor({1}, 0.0)), st,
                                    ops::Mode::train);
  // batch mean 4, biased variance 5, unbiased 20/3
  EXPECT_DOUBLE_EQ(st.running_mean[0], 0.1 * 4.0);
  EXPECT_DOUBLE_EQ(st.running_var[0], 0.9 + 0.1 * 20.0 / 3.0);
  EXPECT_NEAR(g.value(y)[0], -3.0 / std::sqrt(5.0 + 1e-5), 1e-12);
}

TEST(BatchNorm, EvalModeUsesRunningStatisticsAndLeavesThem) {
  Graph g;
  ops::BatchNormState st(1);
  st.running_mean[0] = 2.0;
  st.running_var[0] = 4.0;
  const NodeId y = ops::batchnorm1d(g, g.constant(Tensor({1, 1, 1}, 6.0)), g.constant(Tensor({1}, 2.0)),
                                    g.constant(Tensor({1}, 1.0)), st, ops::Mode::eval);
  EXPECT_NEAR(g.value(y)[0], 2.0 * 4.0 / std::sqrt(4.0 + 1e-5) + 1.0, 1e-12);
  EXPECT_EQ(st.running_mean[0], 2.0);
  EXPECT_EQ(st.running_var[0], 4.0);
}

TEST(BatchNorm, TrainModeNeedsTwoSamples) {
  Graph g;
  ops::BatchNormState st(1);
  EXPECT_THROW(ops::batchnorm1d(g, g.constant(Tensor({1, 1, 4})), g.constant(Tensor({1}, 1.0)),
                                g.constant(Tensor({1}, 0.0)), st, ops::Mode::train),
               InvalidInput);
}

// Scalar Adam written out longhand as the oracle.
TEST(Adam, TwoHundredStepsMatchScalarReference) {
  AdamOptions o;
  o.lr = 0.05;
  ParameterSet ps;
  ps.add("w", Tensor({2}, std::vector<double>{1.5, -2.0}));
  AdamState st(o);
  double w[2] = {1.5, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 200; ++t) {
    const Tensor& cur = ps.get("w");
    std::vector<Tensor> grads{Tensor({2}, std::vector<double>{2.0 * (cur[0] - 3.0), 4.0 * (cur[1] + 1.0)})};
    adam_step(ps, grads, st);
    for (int i = 0; i < 2; ++i) {
      const double gi = i == 0 ? 2.0 * (w[0] - 3.0) : 4.0 * (w[1] + 1.0);
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      w[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(ps.get("w")[0], w[0], 1e-12);
  EXPECT_NEAR(ps.get("w")[1], w[1], 1e-12);
  EXPECT_NEAR(w[0], 3.0, 0.05);
  EXPECT_NEAR(w[1], -1.0, 0.05);
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsTheStep) {
  ParameterSet ps;
  ps.add("w", Tensor({3}, 0.7));
  AdamState st{AdamOptions{}};
  std::vector<Tensor> grads{Tensor({3}, 0.0)};
  adam_step(ps, grads, st);
  EXPECT_EQ(ps.get("w"), Tensor({3}, 0.7));
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLrAgainstTheGradientSign) {
  ParameterSet ps;
  ps.add("w", Tensor({2}, 0.0));
  AdamState st{AdamOptions{}};
  std::vector<Tensor> grads{Tensor({2}, std::vector<double>{3.0, -0.02})};
  adam_step(ps, grads, st);
  EXPECT_NEAR(ps.get("w")[0], -1e-4, 1e-9);
  EXPECT_NEAR(ps.get("w")[1], 1e-4, 1e-9);
}

// Endpoint frozen from a scalar reference run of the same update.
TEST(Adam, QuadraticEndpoint) {
  AdamOptions o;
  o.lr = 0.05;
  ParameterSet ps;
  ps.add("p", Tensor({1}, 1.0));
  AdamState st(o);
  for (int t = 0; t < 200; ++t) {
    std::vector<Tensor> grads{Tensor({1}, 2.0 * ps.get("p")[0])};
    adam_step(ps, grads, st);
  }
  EXPECT_NEAR(ps.get("p")[0], 2.8451333237271713e-05, 1e-12);
  EXPECT_LT(std::abs(ps.get("p")[0]), 0.1);
}

TEST(Adam, RejectsMismatchedGradients) {
  ParameterSet ps;
  ps.add("w", Tensor({2}));
  AdamState st{AdamOptions{}};
  std::vector<Tensor> grads{Tensor({3})};
  EXPECT_THROW(adam_step(ps, grads, st), ShapeError);
  EXPECT_THROW(AdamState(AdamOptions{.lr = 0.0}), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  std::vector<NamedTensor> ts{{"a", rand_tensor({2, 3}, rng)}, {"b.c", rand_tensor({4}, rng)}, {"s", Tensor::scalar(-0.0)}};
  ts[0].value[1] = 1e-310;
  std::stringstream ss;
  write_tensors(ss, ts);
  const auto back = read_tensors(ss);
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(back[i].name, ts[i].name);
    EXPECT_EQ(back[i].value, ts[i].value);
  }
  EXPECT_TRUE(std::signbit(back[2].value[0]));
}

TEST(Checkpoint, TruncationAndBadHeadersAreParseErrors) {
  std::stringstream ss;
  write_tensors(ss, {{"a", Tensor({3}, 1.0)}});
  const std::string full = ss.str();
  std::istringstream cut(full.substr(0, full.size() - 5));
  EXPECT_THROW(read_tensors(cut), ParseError);
  std::istringstream bad("NOT A CHECKPOINT\n");
  EXPECT_THROW(read_tensors(bad), ParseError);
}

TEST(Parameters, DuplicateNamesAreRejected) {
  ParameterSet ps;
  ps.add("w", Tensor({1}));
  EXPECT_THROW(ps.add("w", Tensor({1})), InvalidInput);
  EXPECT_THROW(ps.get("missing"), InvalidInput);
}

TEST(Parameters, GlorotBoundHolds) {
  std::mt19937_64 rng(1);
  const Tensor t = glorot_uniform({30, 10}, 30, 10, rng);
  const double bound = std::sqrt(6.0 / 40.0);
  for (double v : t.data()) EXPECT_LE(std::abs(v), bound);
}

}  // namespace
