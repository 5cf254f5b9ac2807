#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "finite_diff.hpp"
#include "htgnn/errors.hpp"
#include "htgnn/tensor.hpp"

namespace htgnn {
namespace {

Tensor random_leaf(Shape shape, std::mt19937_64& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 0.0) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.at(i), expected[i], tol) << i;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  expect_values(matmul(a, eye), {1, 2, 3, 4});
}

TEST(Matmul, RowTimesColumn) {
  const Tensor r = matmul(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r.item(), 11.0);
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  Tensor a = random_leaf({3, 4}, rng);
  Tensor b = random_leaf({4, 2}, rng);
  const auto r = fd::check([&] { return sum(matmul(a, b)); }, {a, b});
  EXPECT_LT(r.max_relative, 1e-5);
  EXPECT_EQ(r.checked, 20u);
}

TEST(Linear, EqualsMatmulWithTransposedWeight) {
  std::mt19937_64 rng(2);
  const Tensor x = random_leaf({3, 4}, rng);
  const Tensor w = random_leaf({2, 4}, rng);
  const Tensor a = linear(x, w);
  const Tensor b = matmul(x, transpose(w));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-15);
}

TEST(Softmax, SymmetricInputGivesHalves) {
  expect_values(softmax(Tensor::row({0, 0}), 0), {0.5, 0.5});
}

TEST(Softmax, LogTwoGivesTwoThirds) {
  expect_values(softmax(Tensor::row({std::log(2.0), 0.0}), 0), {2.0 / 3.0, 1.0 / 3.0}, 1e-15);
}

TEST(Softmax, EmptyAxisIsDomainError) {
  EXPECT_THROW(softmax(Tensor::zeros({2, 0}), 1), Error);
}

TEST(Softmax, SumsToOneAndIgnoresShift) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_leaf({3, 5}, rng);
    const Tensor y = softmax(x, 1);
    const Tensor shifted = softmax(add_bias(x, Tensor::row({7.5, 7.5, 7.5, 7.5, 7.5})), 1);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        s += y.at(r, c);
        EXPECT_NEAR(y.at(r, c), shifted.at(r, c), 1e-12);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Tensor x = random_leaf({2, 4}, rng);
  const Tensor w = random_leaf({2, 4}, rng).detach();
  const auto r = fd::check([&] { return sum(mul(softmax(x, 1), w)); }, {x});
  EXPECT_LT(r.max_relative, 1e-5);
}

TEST(Activation, ForcedValues) {
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor::row({-1.0}), 0.2).item(), -0.2);
  EXPECT_EQ(tanh(Tensor::row({0.0})).item(), 0.0);
  EXPECT_EQ(sigmoid(Tensor::row({0.0})).item(), 0.5);
  EXPECT_EQ(relu(Tensor::row({-3.0})).item(), 0.0);
}

TEST(Activation, ReluGradientAwayFromKink) {
  Tensor x = Tensor::from_data({6}, {-0.9, -0.4, -0.1, 0.2, 0.5, 0.8}, true);
  const auto r = fd::check([&] { return sum(mul(relu(x), x)); }, {x});
  EXPECT_LT(r.max_relative, 1e-5);
}

TEST(Activation, ReluKinkTakesZeroSubgradient) {
  Tensor x = Tensor::from_data({1}, {0.0}, true);
  backward(sum(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Activation, AllKindsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (Activation a : {Activation::kLeakyRelu, Activation::kTanh, Activation::kSigmoid}) {
    Tensor x = random_leaf({3, 3}, rng);
    const auto r = fd::check([&] { return sum_squares(activate(x, a, 0.2)); }, {x});
    EXPECT_LT(r.max_relative, 1e-5);
  }
}

TEST(Reduce, ForcedValues) {
  EXPECT_EQ(sum(Tensor::row({1, 2, 3})).item(), 6.0);
  expect_values(concat({Tensor::row({1, 2}), Tensor::row({3})}, 0), {1, 2, 3});
  const Tensor copies = Tensor::from_data({3, 2}, {0.5, -2, 0.5, -2, 0.5, -2});
  expect_values(reduce(copies, 0, Reduce::kMean), {0.5, -2});
}

TEST(Reduce, ShapeMismatchIsShapeError) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}, 0), ShapeError);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  Tensor a = random_leaf({2, 3}, rng);
  Tensor b = random_leaf({2, 3}, rng);
  Tensor bias = random_leaf({3}, rng);
  Tensor s = random_leaf({1}, rng);
  const auto r = fd::check(
      [&] {
        const Tensor x = sub(mul(a, b), scale(add(a, b), 0.7));
        return sum(mul_scalar(add_bias(concat({x, abs(a)}, 0), bias), s));
      },
      {a, b, bias, s});
  EXPECT_LT(r.max_relative, 1e-5);
}

TEST(Reduce, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  Tensor x = random_leaf({3, 4}, rng);
  const auto r = fd::check(
      [&] {
        return add(sum(mul(reduce(x, 0, Reduce::kMean), reduce(x, 0, Reduce::kSum))),
                   sum_squares(slice_cols(slice_rows(reshape(x, {4, 3}), 1, 3), 0, 2)));
      },
      {x});
  EXPECT_LT(r.max_relative, 1e-5);
}

TEST(IndexOps, SegmentOpsMatchLoops) {
  const Tensor x = Tensor::from_data({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor s = segment_sum(x, {1, 0, 1, 1}, 3);
  expect_values(s, {3, 4, 13, 16, 0, 0});
  const Tensor g = gather_rows(x, {3, 0, 3});
  expect_values(g, {7, 8, 1, 2, 7, 8});
  const Tensor p = segment_softmax(Tensor::row({0, std::log(3.0), 5.0}), {0, 0, 1}, 2);
  expect_values(p, {0.25, 0.75, 1.0}, 1e-15);
  expect_values(row_dot(x, x), {5, 25, 61, 113});
  expect_values(scale_rows(slice_rows(x, 0, 2), Tensor::row({2, -1})), {2, 4, -3, -4});
}

TEST(IndexOps, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  Tensor x = random_leaf({5, 3}, rng);
  Tensor logits = random_leaf({6}, rng);
  const Index seg = {0, 2, 2, 1, 0, 2};
  const Index rows = {4, 0, 1, 1, 3, 2};
  const auto r = fd::check(
      [&] {
        const Tensor alpha = segment_softmax(logits, seg, 3);
        const Tensor msg = scale_rows(gather_rows(x, rows), alpha);
        const Tensor agg = segment_sum(msg, seg, 3);
        return add(sum_squares(agg), sum(row_dot(agg, slice_rows(x, 0, 3))));
      },
      {x, logits});
  EXPECT_LT(r.max_relative, 1e-5);
}

TEST(Dropout, RateZeroAndEvalModeAreIdentity) {
  std::mt19937_64 rng(9);
  const Tensor x = random_leaf({4, 4}, rng);
  for (bool training : {true, false}) {
    const Tensor y = dropout(x, 0.0, training, rng);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));
  }
  const Tensor e = dropout(x, 0.2, false, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(e.at(i), x.at(i));
}

TEST(Dropout, TrainingModeReproducibleAndScaled) {
  const Tensor x = Tensor::full({50, 20}, 1.0);
  std::mt19937_64 a(10);
  std::mt19937_64 b(10);
  const Tensor ya = dropout(x, 0.2, true, a);
  const Tensor yb = dropout(x, 0.2, true, b);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(ya.at(i), yb.at(i));
    if (ya.at(i) == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(ya.at(i), 1.25);
    }
  }
  EXPECT_GT(zeros, 150u);
  EXPECT_LT(zeros, 250u);
}

TEST(Dropout, RateOutsideRangeIsConfigError) {
  std::mt19937_64 rng(11);
  EXPECT_THROW(dropout(Tensor::zeros({2}), 1.0, true, rng), ConfigError);
  EXPECT_THROW(dropout(Tensor::zeros({2}), -0.1, true, rng), ConfigError);
}

TEST(Backward, SquareAtThree) {
  Tensor x = Tensor::from_data({1}, {3.0}, true);
  backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SoftmaxSumHasZeroGradient) {
  Tensor x = Tensor::from_data({4}, {0.3, -1.2, 2.0, 0.1}, true);
  backward(sum(softmax(x, 0)));
  for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, TwoConsumersSum) {
  Tensor x = Tensor::from_data({1}, {1.5}, true);
  backward(sum(add(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Backward, AccumulatesUntilZeroed) {
  Tensor x = Tensor::from_data({1}, {2.0}, true);
  backward(sum(scale(x, 3.0)));
  backward(sum(scale(x, 3.0)));
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, NonScalarIsDomainError) {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), DomainError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from_data({1}, {2.0}, true);
  NoGradGuard guard;
  const Tensor y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradTape, VisitsEveryOperationOnce) {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  const Tensor y = mul(x, x);
  const Tensor z = add(y, y);
  const Tensor loss = sum(z);
  const GradTape tape = GradTape::record(loss);
  EXPECT_EQ(tape.size(), 4u);  // x, y, z, loss
  std::set<const detail::Node*> seen(tape.nodes().begin(), tape.nodes().end());
  EXPECT_EQ(seen.size(), tape.size());
}

TEST(Tensor, ShapeInvariants) {
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
  const Tensor t = Tensor::zeros({3, 4}, true);
  EXPECT_EQ(t.numel(), 12u);
  EXPECT_EQ(t.grad().size(), 12u);
}

}  // namespace
}  // namespace htgnn
