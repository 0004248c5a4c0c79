#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "frwkv/autograd.hpp"
#include "frwkv/errors.hpp"
#include "support.hpp"

using namespace frwkv;
using frwkv::testkit::grad_check;
using frwkv::testkit::random_tensor;

namespace {

Tensor loop_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// Weighted sum so every output element carries a distinct gradient.
Var probe(const Var& y, std::uint64_t seed) { return sum_all(y * constant(random_tensor(y.shape(), seed))); }

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Var a = constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var b = constant(Tensor({2, 2}, {3, 4, 5, 6}));
  EXPECT_EQ(matmul(a, b).value().vec(), (std::vector<double>{3, 4, 5, 6}));
}

TEST(Matmul, RowTimesColumn) {
  Var a = constant(Tensor({1, 2}, {1, 2}));
  Var b = constant(Tensor({2, 1}, {3, 4}));
  EXPECT_DOUBLE_EQ(matmul(a, b).value()[0], 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  const Tensor a = random_tensor({3, 4}, 1), b = random_tensor({4, 2}, 2);
  EXPECT_LT(testkit::max_abs_diff(matmul(constant(a), constant(b)).value(), loop_matmul(a, b)), 1e-12);
}

TEST(Matmul, BatchedBroadcastMatchesPerSlice) {
  const Tensor a = random_tensor({2, 3, 3, 4}, 3), b = random_tensor({3, 4, 5}, 4);
  const Tensor c = matmul(constant(a), constant(b)).value();
  ASSERT_EQ(c.shape(), (Shape{2, 3, 3, 5}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      Tensor as({3, 4}), bs({4, 5});
      std::copy_n(a.vec().begin() + static_cast<long>((i * 3 + j) * 12), 12, as.vec().begin());
      std::copy_n(b.vec().begin() + static_cast<long>(j * 20), 20, bs.vec().begin());
      const Tensor ref = loop_matmul(as, bs);
      for (std::size_t k = 0; k < 15; ++k) EXPECT_NEAR(c[(i * 3 + j) * 15 + k], ref[k], 1e-12);
    }
}

TEST(Matmul, InnerMismatchNamesBothShapes) {
  try {
    matmul(constant(Tensor({2, 3})), constant(Tensor({2, 3})));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
  }
}

TEST(Softmax, Examples) {
  auto sm = [](std::vector<double> v) { return softmax(constant(Tensor({v.size()}, v)), 0).value(); };
  EXPECT_NEAR(sm({0, 0})[0], 0.5, 1e-15);
  EXPECT_NEAR(sm({1000, 1000})[1], 0.5, 1e-15);
  const Tensor t = sm({0, std::log(3.0)});
  EXPECT_NEAR(t[0], 0.25, 1e-15);
  EXPECT_NEAR(t[1], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  const Tensor x = random_tensor({5, 7}, 5, -20, 20);
  const Tensor y = softmax(constant(x), -1).value();
  Tensor xs = x;
  for (auto& v : xs.vec()) v += 123.0;
  const Tensor ys = softmax(constant(xs), -1).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      s += y[r * 7 + c];
      EXPECT_GT(y[r * 7 + c], 0.0);
      EXPECT_LT(y[r * 7 + c], 1.0);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_LT(testkit::max_abs_diff(y, ys), 1e-12);
}

TEST(LayerNorm, ConstantSliceIsZero) {
  const Tensor y = layer_norm(constant(Tensor({3}, 5.0)), 0).value();
  for (double v : y.vec()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoPoint) {
  const Tensor y = layer_norm(constant(Tensor({2}, {1, 3})), 0, 1e-14).value();
  EXPECT_NEAR(y[0], -1.0, 1e-12);
  EXPECT_NEAR(y[1], 1.0, 1e-12);
}

TEST(LayerNorm, MomentsMatchLoopOracle) {
  const Tensor x = random_tensor({6, 9}, 6, -3, 3);
  const Tensor y = layer_norm(constant(x), 1).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0, xm = 0.0, xv = 0.0;
    for (std::size_t c = 0; c < 9; ++c) xm += x[r * 9 + c] / 9.0;
    for (std::size_t c = 0; c < 9; ++c) xv += (x[r * 9 + c] - xm) * (x[r * 9 + c] - xm) / 9.0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_NEAR(y[r * 9 + c], (x[r * 9 + c] - xm) / std::sqrt(xv + 1e-5), 1e-12);
      mean += y[r * 9 + c] / 9.0;
    }
    for (std::size_t c = 0; c < 9; ++c) var += (y[r * 9 + c] - mean) * (y[r * 9 + c] - mean) / 9.0;
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(var, xv / (xv + 1e-5), 1e-9);
  }
}

TEST(Backward, NonScalarLossIsContractError) {
  Var x = parameter(Tensor({2}, 1.0));
  EXPECT_THROW(backward(x * 2.0), ContractError);
}

TEST(Backward, SumGivesOnes) {
  Var x = parameter(Tensor({3}, {1, 2, 3}));
  backward(sum_all(x));
  EXPECT_EQ(x.grad().vec(), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  Var x = parameter(Tensor({2}, {1, 2}));
  backward(sum_all(x * x));
  EXPECT_EQ(x.grad().vec(), (std::vector<double>{2, 4}));
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Var x = parameter(Tensor::scalar(3.0));
  Var y = x * x;
  backward(y + y * x);  // d/dx (x² + x³) = 2x + 3x²
  EXPECT_DOUBLE_EQ(x.grad().item(), 6.0 + 27.0);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Var x = parameter(Tensor({2}, 1.0));
  NoGradGuard g;
  Var y = sum_all(x * x);
  EXPECT_FALSE(y.requires_grad());
}

// One finite-difference check per differentiable op.
struct OpCase {
  const char* name;
  std::function<Var(const Var&, const Var&)> fn;
  Shape a, b;
  double lo = -1.5, hi = 1.5;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  Var a = parameter(random_tensor(c.a, 11, c.lo, c.hi));
  Var b = parameter(random_tensor(c.b, 12, c.lo, c.hi));
  const auto report = grad_check([&] { return probe(c.fn(a, b), 13); }, {a, b});
  EXPECT_LT(report.worst, 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"add_broadcast", [](const Var& a, const Var& b) { return a + b; }, {2, 3}, {3}},
        OpCase{"sub", [](const Var& a, const Var& b) { return a - b; }, {2, 3}, {2, 1}},
        OpCase{"mul", [](const Var& a, const Var& b) { return a * b; }, {4, 3}, {1, 3}},
        OpCase{"div", [](const Var& a, const Var& b) { return a / b; }, {2, 3}, {3}, 0.5, 2.0},
        OpCase{"scalar_ops", [](const Var& a, const Var&) { return -(a * 3.0 + 2.0); }, {5}, {1}},
        OpCase{"tanh", [](const Var& a, const Var&) { return tanh(a); }, {6}, {1}},
        OpCase{"sigmoid", [](const Var& a, const Var&) { return sigmoid(a); }, {6}, {1}},
        OpCase{"exp", [](const Var& a, const Var&) { return exp(a); }, {6}, {1}},
        OpCase{"log", [](const Var& a, const Var&) { return log(a); }, {6}, {1}, 0.3, 2.0},
        OpCase{"abs", [](const Var& a, const Var&) { return abs(a); }, {6}, {1}},
        OpCase{"relu", [](const Var& a, const Var&) { return relu(a); }, {6}, {1}},
        OpCase{"square", [](const Var& a, const Var&) { return square(a); }, {6}, {1}},
        OpCase{"sqrt", [](const Var& a, const Var&) { return sqrt(a); }, {6}, {1}, 0.2, 2.0},
        OpCase{"clip", [](const Var& a, const Var&) { return clip(a, -0.7, 0.6); }, {8}, {1}},
        OpCase{"sum_axis", [](const Var& a, const Var&) { return sum(a, 1); }, {3, 4, 2}, {1}},
        OpCase{"mean_keepdim", [](const Var& a, const Var&) { return mean(a, -1, true) * a; }, {3, 4}, {1}},
        OpCase{"reshape", [](const Var& a, const Var& b) { return reshape(a, {3, 2}) * b; }, {2, 3}, {2}},
        OpCase{"permute", [](const Var& a, const Var&) { return permute(a, {2, 0, 1}); }, {2, 3, 4}, {1}},
        OpCase{"transpose", [](const Var& a, const Var&) { return transpose(a, 0, 1); }, {2, 5}, {1}},
        OpCase{"broadcast_to", [](const Var& a, const Var&) { return broadcast_to(a, {4, 2, 3}); }, {2, 1}, {1}},
        OpCase{"concat", [](const Var& a, const Var& b) { return concat({a, b, a}, 1); }, {2, 3}, {2, 2}},
        OpCase{"slice", [](const Var& a, const Var&) { return slice(a, 1, 1, 2); }, {3, 4}, {1}},
        OpCase{"gather", [](const Var& a, const Var&) { return gather(a, 0, {2, 0, 2}); }, {3, 2}, {1}},
        OpCase{"outer", [](const Var& a, const Var& b) { return outer(a, b); }, {3}, {4}},
        OpCase{"matmul", [](const Var& a, const Var& b) { return matmul(a, b); }, {2, 3, 4}, {4, 5}},
        OpCase{"matmul_batched", [](const Var& a, const Var& b) { return matmul(a, b); }, {2, 3, 4}, {2, 4, 2}},
        OpCase{"softmax", [](const Var& a, const Var&) { return softmax(a, -1); }, {3, 5}, {1}},
        OpCase{"layer_norm", [](const Var& a, const Var&) { return layer_norm(a, -1); }, {3, 5}, {1}},
        OpCase{"sum_all", [](const Var& a, const Var&) { return sum_all(a) * a; }, {4}, {1}}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Ranges, SigmoidAndTanhStayOpen) {
  // Beyond |x| ≈ 37 (sigmoid) and 19 (tanh) doubles round to the endpoints.
  const Tensor x = random_tensor({10000}, 21, -30, 30);
  const Tensor s = sigmoid(constant(x)).value();
  const Tensor t = tanh(constant(random_tensor({10000}, 22, -18, 18))).value();
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GT(s[i], 0.0);
    EXPECT_LT(s[i], 1.0);
    EXPECT_GT(t[i], -1.0);
    EXPECT_LT(t[i], 1.0);
  }
  const Tensor extreme = sigmoid(constant(Tensor({2}, {-800, 800}))).value();
  EXPECT_TRUE(extreme.all_finite());
}

TEST(Layout, ReshapeAndTransposeRoundTrip) {
  const Tensor x = random_tensor({2, 3, 4}, 31);
  Var v = constant(x);
  EXPECT_EQ(reshape(reshape(v, {4, 6}), {2, 3, 4}).value().vec(), x.vec());
  EXPECT_EQ(transpose(transpose(v, 0, 2), 0, 2).value().vec(), x.vec());
  EXPECT_EQ(permute(permute(v, {1, 2, 0}), {2, 0, 1}).value().vec(), x.vec());
}

TEST(Layout, ConcatAndSliceInvert) {
  const Tensor a = random_tensor({2, 3}, 32), b = random_tensor({2, 2}, 33);
  Var c = concat({constant(a), constant(b)}, 1);
  EXPECT_EQ(slice(c, 1, 0, 3).value().vec(), a.vec());
  EXPECT_EQ(slice(c, 1, 3, 2).value().vec(), b.vec());
}

TEST(Broadcast, IncompatibleShapesThrow) {
  EXPECT_THROW(constant(Tensor({2, 3})) + constant(Tensor({4})), DimensionError);
}

TEST(Clip, GradientZeroOutsideInterval) {
  Var x = parameter(Tensor({3}, {-2.0, 0.1, 2.0}));
  backward(sum_all(clip(x, 0.0, 0.2)));
  EXPECT_EQ(x.grad().vec(), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Graph, TopologicalOrderPutsInputsFirst) {
  Var a = parameter(Tensor({2}, 1.0));
  Var b = tanh(a);
  Var c = b * a + b;
  const auto order = topological_order(sum_all(c));
  std::map<const Node*, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const Node* n : order)
    for (const auto& p : n->parents)
      if (pos.count(p.get())) EXPECT_LT(pos[p.get()], pos[n]);
}
