#include <cmath>

#include <gtest/gtest.h>

#include "dtsg/autograd.hpp"
#include "dtsg/error.hpp"
#include "fd_check.hpp"

namespace dtsg {
namespace {

using testing::max_fd_error;
using testing::random_matrix;

constexpr double kTol = 1e-6;

class OpGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
  Matrix r(Eigen::Index rows, Eigen::Index cols) { return random_matrix(rows, cols, rng); }
};

TEST_F(OpGradients, Elementwise) {
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::add(x[0], x[1]); }, {r(3, 4), r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::sub(x[0], x[1]); }, {r(3, 4), r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::mul(x[0], x[1]); }, {r(3, 4), r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::scale(x[0], -2.5); }, {r(2, 2)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::add_row(x[0], x[1]); }, {r(3, 4), r(1, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::sigmoid(x[0]); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::tanh(x[0]); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::softplus(x[0]); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::relu(x[0]); }, {r(3, 4)}), kTol);
}

TEST_F(OpGradients, Structural) {
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::matmul(x[0], x[1]); }, {r(3, 4), r(4, 2)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::transpose(x[0]); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::concat_cols(x); }, {r(3, 2), r(3, 1), r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::slice_cols(x[0], 1, 2); }, {r(3, 4)}), kTol);
  const std::vector<int> ids{2, 0, 2, 1};
  EXPECT_LT(max_fd_error([&](auto&, auto& x) { return ag::gather_rows(x[0], ids); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::max_rows(x[0]); }, {r(5, 1)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::mean(x[0]); }, {r(3, 4)}), kTol);
}

TEST_F(OpGradients, NormalizationAndSequence) {
  const Mask mask{1, 0, 1, 1};
  EXPECT_LT(max_fd_error([&](auto&, auto& x) { return ag::row_softmax(x[0], mask); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([&](auto&, auto& x) { return ag::col_softmax(x[0], mask); }, {r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::layer_norm(x[0], x[1], x[2]); }, {r(3, 5), r(1, 5), r(1, 5)}),
            kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::lstm(x[0], x[1], x[2], x[3]); },
                         {r(5, 3), r(3, 8), r(2, 8), r(1, 8)}),
            kTol);
}

TEST_F(OpGradients, Losses) {
  Matrix labels(4, 1);
  labels << 1, 0, 0.5, 0;
  EXPECT_LT(max_fd_error([&](auto&, auto& x) { return ag::bce_with_logits_mean(x[0], labels); }, {r(4, 1)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::softmax_cross_entropy(x[0], 2); }, {r(5, 1)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::cosine_rows(x[0], x[1]); }, {r(3, 4), r(3, 4)}), kTol);
  EXPECT_LT(max_fd_error([](auto&, auto& x) { return ag::neg_log_softmax_first(x[0]); }, {r(1, 3)}), kTol);
}

TEST(Autograd, MaskedSoftmaxWeightsAreExactlyZero) {
  ag::Graph g(false);
  std::mt19937_64 rng(1);
  const Mask mask{1, 0, 1};
  ag::Var rs = ag::row_softmax(g.constant(random_matrix(4, 3, rng)), mask);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(rs.value()(i, 1), 0.0);
    EXPECT_NEAR(rs.value().row(i).sum(), 1.0, 1e-12);
  }
  ag::Var cs = ag::col_softmax(g.constant(random_matrix(4, 3, rng)), mask);
  EXPECT_EQ(cs.value().col(1).cwiseAbs().sum(), 0.0);
  EXPECT_NEAR(cs.value().col(0).sum(), 1.0, 1e-12);
  EXPECT_THROW(ag::row_softmax(g.constant(random_matrix(2, 2, rng)), Mask{0, 0}), Error);
}

TEST(Autograd, GradientsAccumulateOverReuse) {
  ParamStore store;
  Parameter& p = store.add("x", ComponentTag::kBackbone, Matrix::Constant(1, 1, 3.0));
  store.zero_grad();
  ag::Graph g;
  ag::Var x = g.parameter(p);
  g.backward(ag::sum(ag::mul(x, x)));  // d(x^2)/dx = 2x
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 6.0);
}

TEST(Autograd, DetachStopsGradientAndReplays) {
  ParamStore store;
  Parameter& p = store.add("x", ComponentTag::kBackbone, Matrix::Constant(1, 1, 2.0));
  store.zero_grad();
  std::vector<Matrix> frozen;
  {
    ag::Graph g;
    g.record_detached(&frozen);
    ag::Var x = g.parameter(p);
    g.backward(ag::sum(ag::mul(x, ag::detach(x))));  // x * stop(x): gradient = stop(x)
  }
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 2.0);
  ASSERT_EQ(frozen.size(), 1u);
  p.value(0, 0) = 5.0;
  ag::Graph g(false);
  g.replay_detached(&frozen);
  ag::Var x = g.parameter(p);
  EXPECT_DOUBLE_EQ(ag::sum(ag::mul(x, ag::detach(x))).scalar(), 10.0);
}

TEST(Autograd, InferenceGraphRecordsTouchedParameters) {
  ParamStore store;
  Parameter& a = store.add("a", ComponentTag::kBackbone, Matrix::Ones(2, 2));
  store.add("b", ComponentTag::kBim, Matrix::Ones(2, 2));
  ag::Graph g(false);
  ag::Var x = g.parameter(a);
  ag::add(x, g.parameter(a));
  ASSERT_EQ(g.touched().size(), 1u);
  EXPECT_EQ(g.touched()[0], &a);
  EXPECT_FALSE(x.requires_grad());
}

}  // namespace
}  // namespace dtsg
