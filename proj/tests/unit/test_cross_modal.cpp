#include <gtest/gtest.h>

#include "dtsg/cross_modal.hpp"
#include "dtsg/error.hpp"
#include "fd_check.hpp"

namespace dtsg {
namespace {

using testing::max_store_fd_error;
using testing::random_matrix;
using testing::weighted_sum;

ModelConfig config(int d) {
  ModelConfig c;
  c.d_model = d;
  return c;
}

TEST(Similarity, SelfDotAndZero) {
  ag::Graph g(false);
  std::mt19937_64 rng(1);
  const Matrix u = random_matrix(1, 8, rng);
  ag::Var s = similarity(g.constant(u), g.constant(u));
  EXPECT_NEAR(s.scalar(), u.squaredNorm(), 1e-12);
  EXPECT_EQ(similarity(g.constant(Matrix::Zero(4, 8)), g.constant(random_matrix(3, 8, rng))).value(),
            Matrix::Zero(4, 3));
  EXPECT_THROW(similarity(g.constant(Matrix::Zero(4, 8)), g.constant(Matrix::Zero(3, 7))), Error);
}

TEST(Similarity, MatchesTripleLoop) {
  ag::Graph g(false);
  std::mt19937_64 rng(2);
  const Matrix v = random_matrix(4, 8, rng);
  const Matrix q = random_matrix(3, 8, rng);
  const Matrix w = random_matrix(8, 8, rng);
  const Matrix qw = q * w;
  ParamStore store;
  std::mt19937_64 init(0);
  CrossModal cm({store, "c", ComponentTag::kBackbone, init}, config(8));
  cm.w_s().value = w;
  const Matrix s = similarity(g.constant(v), cm.project_query(g, g.constant(q))).value();
  for (int t = 0; t < 4; ++t) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 8; ++k) {
        double proj = 0.0;
        for (int l = 0; l < 8; ++l) proj += q(j, l) * w(l, k);
        dot += v(t, k) * proj;
      }
      EXPECT_NEAR(s(t, j), dot, 1e-10);
    }
  }
  (void)qw;
}

TEST(Coattend, SingleWordAndUniform) {
  ag::Graph g(false);
  std::mt19937_64 rng(3);
  const Matrix v = random_matrix(5, 4, rng);
  const Matrix qp = random_matrix(1, 4, rng);
  auto [a, b] = coattend(g.constant(random_matrix(5, 1, rng)), g.constant(v), g.constant(qp), {1});
  for (int t = 0; t < 5; ++t) EXPECT_LT((a.value().row(t) - qp.row(0)).cwiseAbs().maxCoeff(), 1e-12);

  const Matrix qp3 = random_matrix(3, 4, rng);
  auto [a3, b3] = coattend(g.constant(Matrix::Zero(5, 3)), g.constant(v), g.constant(qp3), {1, 1, 0});
  const RowVector mean = (qp3.row(0) + qp3.row(1)) / 2.0;
  for (int t = 0; t < 5; ++t) EXPECT_LT((a3.value().row(t) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Coattend, MatchesTwoMatmulOracle) {
  ag::Graph g(false);
  std::mt19937_64 rng(4);
  const Matrix s = random_matrix(5, 3, rng);
  const Matrix v = random_matrix(5, 4, rng);
  const Matrix qp = random_matrix(3, 4, rng);
  InteractionTrace trace;
  auto [a, b] = coattend(g.constant(s), g.constant(v), g.constant(qp), {1, 1, 1}, &trace);
  Matrix sr(5, 3);
  Matrix sc(5, 3);
  for (int t = 0; t < 5; ++t) {
    double z = 0.0;
    for (int j = 0; j < 3; ++j) z += std::exp(s(t, j));
    for (int j = 0; j < 3; ++j) sr(t, j) = std::exp(s(t, j)) / z;
  }
  for (int j = 0; j < 3; ++j) {
    double z = 0.0;
    for (int t = 0; t < 5; ++t) z += std::exp(s(t, j));
    for (int t = 0; t < 5; ++t) sc(t, j) = std::exp(s(t, j)) / z;
  }
  EXPECT_LT((trace.S_r - sr).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((trace.S_c - sc).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.value() - sr * qp).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((b.value() - sr * (sc.transpose() * v)).cwiseAbs().maxCoeff(), 1e-10);
  // Rows of S_r S_c^T are stochastic.
  const Matrix clip_attention = sr * sc.transpose();
  for (int t = 0; t < 5; ++t) EXPECT_NEAR(clip_attention.row(t).sum(), 1.0, 1e-12);
}

TEST(CrossModal, MaskedColumnsAndStochasticity) {
  ParamStore store;
  std::mt19937_64 rng(5);
  CrossModal cm({store, "c", ComponentTag::kBackbone, rng}, config(6));
  ag::Graph g(false);
  InteractionTrace trace;
  ag::Var f = cm(g, g.constant(random_matrix(7, 6, rng)), g.constant(random_matrix(4, 6, rng)), {1, 1, 1, 0}, &trace);
  EXPECT_EQ(f.rows(), 7);
  EXPECT_EQ(f.cols(), 6);
  for (int t = 0; t < 7; ++t) {
    EXPECT_NEAR(trace.S_r.row(t).sum(), 1.0, 1e-12);
    EXPECT_EQ(trace.S_r(t, 3), 0.0);
  }
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(trace.S_c.col(j).sum(), 1.0, 1e-12);
  EXPECT_EQ(trace.S_c.col(3).cwiseAbs().sum(), 0.0);
}

TEST(CrossModal, FuseZeroAttentionAndPermutationEquivariance) {
  ParamStore store;
  std::mt19937_64 rng(6);
  CrossModal cm({store, "c", ComponentTag::kBackbone, rng}, config(4));
  ag::Graph g(false);
  const Matrix v = random_matrix(5, 4, rng);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(5, 4, rng);
  const Matrix zero_case = cm.fuse(g, g.constant(v), g.constant(Matrix::Zero(5, 4)), g.constant(Matrix::Zero(5, 4))).value();
  EXPECT_TRUE(zero_case.allFinite());
  const Matrix f = cm.fuse(g, g.constant(v), g.constant(a), g.constant(b)).value();
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const Matrix fp = cm.fuse(g, g.constant(perm * v), g.constant(perm * a), g.constant(perm * b)).value();
  EXPECT_LT((fp - perm * f).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(cm.fuse(g, g.constant(v), g.constant(Matrix::Zero(4, 4)), g.constant(b)), Error);
}

TEST(CrossModal, PipelineGradientMatchesFiniteDifferences) {
  ParamStore store;
  std::mt19937_64 rng(7);
  CrossModal cm({store, "c", ComponentTag::kBackbone, rng}, config(6));
  Parameter& v = store.add("inputs.video", ComponentTag::kBackbone, random_matrix(5, 6, rng));
  Parameter& q = store.add("inputs.query", ComponentTag::kBackbone, random_matrix(3, 6, rng));
  EXPECT_LT(max_store_fd_error(store,
                               [&](ag::Graph& g) {
                                 return weighted_sum(g, cm(g, g.parameter(v), g.parameter(q), {1, 1, 0}));
                               }),
            1e-4);
}

}  // namespace
}  // namespace dtsg
