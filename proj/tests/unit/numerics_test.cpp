#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ahip/numerics/checkpoint.hpp"
#include "ahip/numerics/optim.hpp"
#include "ahip/numerics/parameter.hpp"
#include "op_suite.hpp"

using namespace ahip;

namespace {

Tensor<double> mat(Index r, Index c, std::initializer_list<double> v) {
  Tensor<double> t(Shape{r, c});
  Index i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

Var<double> cvar(const Tensor<double>& t) { return constant(t); }

}  // namespace

TEST(Matmul, IdentityLeavesOperand) {
  const auto out = matmul(cvar(mat(2, 2, {1, 0, 0, 1})), cvar(mat(2, 2, {3, 4, 5, 6})));
  EXPECT_EQ(out.value(), mat(2, 2, {3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  const auto out = matmul(cvar(mat(1, 2, {1, 2})), cvar(mat(2, 1, {3, 4})));
  ASSERT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(out.value()[0], 11.0);
}

TEST(Matmul, InnerMismatchThrows) {
  EXPECT_THROW(matmul(cvar(Tensor<double>(Shape{2, 3})), cvar(Tensor<double>(Shape{4, 5}))), DimensionError);
}

TEST(Softmax, Values) {
  auto s = softmax(cvar(mat(1, 2, {0, 0})), 1).value();
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  s = softmax(cvar(mat(1, 2, {0.5, -0.5})), 1).value();
  EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(s[0], 0.7311, 5e-5);
  EXPECT_NEAR(s[1], 0.2689, 5e-5);
  s = softmax(cvar(mat(1, 2, {1000, 0})), 1).value();
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_NEAR(s[1], 0.0, 1e-12);
}

TEST(LayerNorm, ConstantRowIsZero) {
  const auto y = layernorm(cvar(mat(1, 4, {2, 2, 2, 2})), cvar(Tensor<double>::filled({4}, 1.0)),
                           cvar(Tensor<double>(Shape{4})), 1e-6);
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(y.value()[i], 0.0);
}

TEST(LayerNorm, TwoValues) {
  const auto y = layernorm(cvar(mat(1, 2, {1, 3})), cvar(Tensor<double>::filled({2}, 1.0)),
                           cvar(Tensor<double>(Shape{2})), 1e-12);
  EXPECT_NEAR(y.value()[0], -1.0, 1e-9);
  EXPECT_NEAR(y.value()[1], 1.0, 1e-9);
}

TEST(LayerNorm, AffineOnly) {
  const auto y = layernorm(cvar(mat(2, 3, {1, -4, 9, 0.5, 2, 7})), cvar(Tensor<double>(Shape{3})),
                           cvar(Tensor<double>::filled({3}, 5.0)), 1e-6);
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(y.value()[i], 5.0);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const std::vector<int> labels{0, 2, 4};
  const auto l = cross_entropy_smoothed<double>(cvar(Tensor<double>(Shape{3, 5})), labels, 0.0);
  EXPECT_NEAR(l.value()[0], std::log(5.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrect) {
  const std::vector<int> labels{0};
  const auto l = cross_entropy_smoothed<double>(cvar(mat(1, 2, {10, -10})), labels, 0.0);
  EXPECT_NEAR(l.value()[0], std::log1p(std::exp(-20.0)), 1e-18);
  EXPECT_NEAR(l.value()[0], 2.06e-9, 0.01e-9);
}

TEST(CrossEntropy, ContractViolations) {
  const std::vector<int> labels{0};
  EXPECT_THROW(cross_entropy_smoothed<double>(cvar(mat(1, 2, {1, 2})), labels, 1.0), InputError);
  const std::vector<int> bad{2};
  EXPECT_THROW(cross_entropy_smoothed<double>(cvar(mat(1, 2, {1, 2})), bad, 0.0), InputError);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  Parameter<double> p("p", mat(1, 3, {1, -2, 3}));
  Adam<double> opt({});
  opt.add(p);
  for (int s = 0; s < 5; ++s) {
    opt.zero_grad();
    backward(sum(scale(p.var(), 0.0)));
    opt.step();
  }
  EXPECT_EQ(p.value(), mat(1, 3, {1, -2, 3}));
}

TEST(Adam, FirstStepIsLearningRate) {
  Parameter<double> p("p", Tensor<double>::filled({1}, 0.5));
  AdamConfig cfg;
  cfg.lr = 1e-3;
  Adam<double> opt(cfg);
  opt.add(p);
  backward(sum(p.var()));
  opt.step();
  // m_hat = 1, v_hat = 1: step = lr / (1 + eps)
  EXPECT_NEAR(p.value()[0], 0.5 - 1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, FrozenParameterUnchanged) {
  Parameter<double> p("p", Tensor<double>::filled({2}, 0.5));
  Parameter<double> q("q", Tensor<double>::filled({2}, 0.5), false);
  Adam<double> opt({});
  opt.add(p);
  opt.add(q);
  backward(sum(add(p.var(), q.var())));
  opt.step();
  EXPECT_EQ(q.value(), Tensor<double>::filled({2}, 0.5));
  EXPECT_NE(p.value(), Tensor<double>::filled({2}, 0.5));
}

TEST(Adam, NonFiniteGradientThrowsWithoutUpdate) {
  Parameter<double> p("p", Tensor<double>::filled({1}, 0.5));
  Adam<double> opt({});
  opt.add(p);
  backward(sum(scale(p.var(), std::numeric_limits<double>::infinity())));
  EXPECT_THROW(opt.step(), NumericError);
  EXPECT_EQ(p.value()[0], 0.5);
}

TEST(CosineLr, Schedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 0.1), 0.1);
  EXPECT_NEAR(cosine_lr(100, 100, 0.1), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 0.1), 0.05, 1e-15);
}

TEST(GradCheck, EveryOpPasses) {
  for (const auto& c : oracle::differentiable_ops()) {
    const auto r = oracle::check_op(c, 7);
    EXPECT_TRUE(r.passed) << c.name << " rel err " << r.max_relative_error;
  }
}

TEST(GradCheck, FullBlock) { EXPECT_LT(oracle::vit_block_gradient_error(3), 1e-4); }

TEST(GradCheck, DetectsWrongGradient) {
  // forward x^2 with a backward that claims 3x
  DifferentiableOp<double> wrong = [](const std::vector<Var<double>>& v) {
    Tensor<double> y = v[0].value();
    y.values() = y.values().array().square();
    return Var<double>::from_op(y, {v[0]}, [](Node<double>& n) {
      auto& g = n.parent(0).grad_buffer();
      g.values().array() += 3.0 * n.parent(0).value.values().array() * n.grad.values().array();
    });
  };
  Rng rng(1);
  const std::vector<Tensor<double>> in{oracle::random_tensor({4}, rng)};
  EXPECT_FALSE(finite_difference_check<double>(wrong, in, 1e-4).passed);
}

TEST(NoGrad, GuardSuppressesGraph) {
  Parameter<double> p("p", Tensor<double>::filled({2}, 1.0));
  {
    NoGradGuard guard;
    EXPECT_FALSE(scale(p.var(), 2.0).requires_grad());
  }
  EXPECT_TRUE(scale(p.var(), 2.0).requires_grad());
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  Rng a = Rng::stream(5, "x"), b = Rng::stream(5, "x"), c = Rng::stream(5, "y");
  const auto va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  Rng d = Rng::stream(5, "x");
  d.next_u64();
  EXPECT_EQ(Rng::stream(5, "x").split("k").next_u64(), d.split("k").next_u64());
}

TEST(Rng, UniformMoments) {
  Rng r(9);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ck(64);
  Rng rng(4);
  const auto t = oracle::random_tensor({3, 2, 2}, rng);
  ck.put("w", t);
  ck.put("f", Tensor<float>::filled({2}, 1.5f));
  ck.put_text("meta", "{\"a\":1}");
  const auto path = std::filesystem::temp_directory_path() / "ahip_ck_roundtrip.ahip";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  EXPECT_EQ(back.get<double>("w"), t);
  EXPECT_EQ(back.get<float>("f"), Tensor<float>::filled({2}, 1.5f));
  EXPECT_EQ(back.get_text("meta"), "{\"a\":1}");
  EXPECT_EQ(back.serialize(), ck.serialize());
  const auto bytes = ck.serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "AHIP");
  EXPECT_THROW(back.get<float>("w"), Error);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  Checkpoint ck(32);
  ck.put_text("x", "y");
  auto bytes = ck.serialize();
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bad), FormatError);
  bytes.resize(bytes.size() - 1);
  EXPECT_THROW(Checkpoint::deserialize(bytes), Error);
}
