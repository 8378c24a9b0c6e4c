#include <cmath>

#include <gtest/gtest.h>

#include "dtsg/boundary_head.hpp"
#include "dtsg/error.hpp"
#include "fd_check.hpp"

namespace dtsg {
namespace {

using testing::max_store_fd_error;
using testing::random_matrix;

BoundaryHead::Logits constant_logits(ag::Graph& g, const Matrix& s, const Matrix& e) {
  return {g.constant(s), g.constant(e)};
}

TEST(TsgLoss, ZeroLogitsGiveLn2) {
  ag::Graph g(false);
  for (int t : {1, 4, 17}) {
    auto l = constant_logits(g, Matrix::Zero(t, 1), Matrix::Zero(t, 1));
    EXPECT_NEAR(tsg_loss(l, {0, t - 1}).scalar(), std::log(2.0), 1e-12);
  }
}

TEST(TsgLoss, SaturatedCorrectLogitsGoToZero) {
  ag::Graph g(false);
  Matrix s = Matrix::Constant(6, 1, -1e9);
  Matrix e = Matrix::Constant(6, 1, -1e9);
  s(1, 0) = 1e9;
  e(4, 0) = 1e9;
  EXPECT_NEAR(tsg_loss(constant_logits(g, s, e), {1, 4}).scalar(), 0.0, 1e-12);
}

TEST(TsgLoss, MatchesScalarLoopOracle) {
  ag::Graph g(false);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = random_matrix(6, 1, rng, 3.0);
    const Matrix e = random_matrix(6, 1, rng, 3.0);
    const ClipSpan gt{trial % 6, std::min(5, trial % 6 + trial % 3)};
    double total = 0.0;
    for (int t = 0; t < 6; ++t) {
      auto ce = [](double c, double y) {
        const double p = 1.0 / (1.0 + std::exp(-c));
        return -(y * std::log(p) + (1 - y) * std::log(1 - p));
      };
      total += ce(s(t, 0), t == gt.start ? 1 : 0) + ce(e(t, 0), t == gt.end ? 1 : 0);
    }
    const double oracle = total / 12.0;
    EXPECT_NEAR(tsg_loss(constant_logits(g, s, e), gt).scalar(), oracle, 1e-12);
    BoundaryScores scores;
    for (int t = 0; t < 6; ++t) {
      scores.start.push_back(s(t, 0));
      scores.end.push_back(e(t, 0));
    }
    EXPECT_NEAR(tsg_loss_value(scores, gt), oracle, 1e-12);
  }
}

TEST(TsgLoss, SoftmaxVariantAndLabelRadius) {
  ag::Graph g(false);
  auto l = constant_logits(g, Matrix::Zero(5, 1), Matrix::Zero(5, 1));
  EXPECT_NEAR(tsg_loss(l, {1, 3}, HeadLoss::kSoftmax).scalar(), std::log(5.0), 1e-12);
  const Matrix y = boundary_labels(6, 2, 2);
  Matrix expect(6, 1);
  expect << 1.0 / 3, 2.0 / 3, 1.0, 2.0 / 3, 1.0 / 3, 0.0;
  EXPECT_LT((y - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(tsg_loss(l, {3, 1}), Error);
}

TEST(BoundaryHead, SingleClipAndCausality) {
  ParamStore store;
  std::mt19937_64 rng(2);
  BoundaryHead head({store, "h", ComponentTag::kBackbone, rng}, 8);
  ag::Graph g(false);
  const Matrix f = random_matrix(7, 8, rng);
  auto full = to_scores(head(g, g.constant(f)));
  EXPECT_EQ(full.start.size(), 7u);
  for (int k = 1; k <= 7; ++k) {
    auto prefix = to_scores(head(g, g.constant(f.topRows(k))));
    for (int t = 0; t < k; ++t) {
      EXPECT_NEAR(prefix.start[t], full.start[t], 1e-12);
      EXPECT_NEAR(prefix.end[t], full.end[t], 1e-12);
    }
  }
}

TEST(BoundaryHead, GradientThroughBothLstms) {
  ParamStore store;
  std::mt19937_64 rng(3);
  BoundaryHead head({store, "h", ComponentTag::kBackbone, rng}, 8);
  Parameter& f = store.add("inputs.f", ComponentTag::kBackbone, random_matrix(5, 8, rng));
  EXPECT_LT(max_store_fd_error(store, [&](ag::Graph& g) { return tsg_loss(head(g, g.parameter(f)), {1, 3}); }),
            1e-4);
}

std::vector<SegmentCandidate> enumerate(const BoundaryScores& s, int n, std::optional<int> max_len = {}) {
  std::vector<SegmentCandidate> all;
  const int t = static_cast<int>(s.start.size());
  for (int a = 0; a < t; ++a) {
    for (int b = a; b < t; ++b) {
      if (max_len && b - a >= *max_len) continue;
      all.push_back({a, b, 1.0 / (1.0 + std::exp(-s.start[a])) + 1.0 / (1.0 + std::exp(-s.end[b]))});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.score > y.score; });
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(n)));
  return all;
}

TEST(Decode, DominantPairAndTieBreak) {
  auto top = decode_top_n({{2, -2}, {-2, 2}}, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].start, 0);
  EXPECT_EQ(top[0].end, 1);
  auto uniform = decode_top_n({{0, 0, 0}, {0, 0, 0}}, 4);
  ASSERT_EQ(uniform.size(), 4u);
  EXPECT_EQ(uniform[0].start, 0);
  EXPECT_EQ(uniform[0].end, 0);
  EXPECT_EQ(uniform[1].end, 1);
  EXPECT_EQ(uniform[3].start, 1);
  EXPECT_EQ(decode_top_n({{0, 0}, {0, 0}}, 10).size(), 3u);
}

TEST(Decode, MatchesEnumerationWithMaxLen) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> level(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    BoundaryScores s;
    for (int t = 0; t < 15; ++t) {
      // Coarse levels force many exact ties.
      s.start.push_back(level(rng));
      s.end.push_back(level(rng));
    }
    const auto got = decode_top_n(s, 5, 4);
    const auto want = enumerate(s, 5, 4);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].start, want[i].start);
      EXPECT_EQ(got[i].end, want[i].end);
      EXPECT_LT(got[i].end - got[i].start, 4);
      if (i > 0) EXPECT_GE(got[i - 1].score, got[i].score);
    }
  }
}

TEST(Iou, Examples) {
  EXPECT_NEAR(interval_iou(2, 6, 4, 8), 2.0 / 6.0, 1e-15);
  EXPECT_EQ(interval_iou(1, 3, 1, 3), 1.0);
  EXPECT_EQ(interval_iou(0, 2, 2, 5), 0.0);
  EXPECT_EQ(iou({2, 5}, {4, 7}), 2.0 / 6.0);  // [2,6) vs [4,8)
  EXPECT_EQ(iou({3, 3}, {3, 3}), 1.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 20);
  for (int i = 0; i < 200; ++i) {
    int a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a > b) std::swap(a, b);
    if (c > d) std::swap(c, d);
    const double x = iou({a, b}, {c, d});
    EXPECT_EQ(x, iou({c, d}, {a, b}));
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

}  // namespace
}  // namespace dtsg
