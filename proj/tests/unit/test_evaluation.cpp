#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "dtsg/error.hpp"
#include "dtsg/evaluation.hpp"
#include "dtsg/model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "recall_oracle.hpp"

namespace dtsg {
namespace {

using testing::clip_iou;
using testing::pred;

TEST(Recall, HandExamples) {
  const std::vector<ClipSpan> gts{{2, 5}, {0, 3}, {10, 12}};
  const std::vector<Prediction> p{pred("a", {{2, 5}}), pred("b", {{4, 6}, {0, 2}}), pred("c", {{0, 1}})};
  EXPECT_NEAR(recall_at(p, gts, 1, 0.5), 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(recall_at(p, gts, 5, 0.5), 200.0 / 3.0, 1e-12);
  // IoU of [0,2] vs [0,3] is exactly 0.75: strict misses at 0.75, inclusive hits.
  EXPECT_NEAR(recall_at(p, gts, 5, 0.75), 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(recall_at(p, gts, 5, 0.75, {true}), 200.0 / 3.0, 1e-12);
  EXPECT_THROW(recall_at(p, {gts[0]}, 1, 0.5), Error);
  EXPECT_EQ(recall_at({pred("a", {{2, 5}})}, {{2, 5}}, 1, 0.7), 100.0);
  EXPECT_EQ(recall_at({pred("a", {{6, 9}})}, {{2, 5}}, 5, 0.1), 0.0);
}

TEST(Recall, TwentySamplesMatchLoopOracle) {
  const std::vector<ClipSpan> gts = testing::twenty_gts();
  const auto cand = testing::twenty_candidates();
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < cand.size(); ++i) preds.push_back(pred("s" + std::to_string(i), cand[i]));
  for (int n : {1, 2, 5}) {
    for (double m : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      for (bool inclusive : {false, true}) {
        int hits = 0;
        for (std::size_t i = 0; i < gts.size(); ++i) {
          bool hit = false;
          for (std::size_t k = 0; k < preds[i].topn.size() && k < static_cast<std::size_t>(n); ++k) {
            const double x = clip_iou({preds[i].topn[k].start, preds[i].topn[k].end}, gts[i]);
            hit = hit || (inclusive ? x >= m : x > m);
          }
          hits += hit ? 1 : 0;
        }
        EXPECT_NEAR(recall_at(preds, gts, n, m, {inclusive}), 100.0 * hits / 20.0, 1e-12)
            << "n=" << n << " m=" << m << " inclusive=" << inclusive;
      }
    }
  }
}

TEST(Recall, MonotoneInNAndM) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pos(0, 20);
  std::vector<Prediction> preds;
  std::vector<ClipSpan> gts;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<int, int>> spans;
    for (int k = 0; k < 5; ++k) {
      int a = pos(rng), b = pos(rng);
      spans.emplace_back(std::min(a, b), std::max(a, b));
    }
    preds.push_back(pred(std::to_string(i), spans));
    int a = pos(rng), b = pos(rng);
    gts.push_back({std::min(a, b), std::max(a, b)});
  }
  for (double m = 0.0; m < 1.0; m += 0.05) {
    double prev = -1.0;
    for (int n = 1; n <= 5; ++n) {
      const double r = recall_at(preds, gts, n, m);
      EXPECT_GE(r, prev);
      EXPECT_GE(recall_at(preds, gts, n, m), recall_at(preds, gts, n, m + 0.05));
      prev = r;
    }
  }
}

class EvaluateTest : public ::testing::Test {
 protected:
  EvaluateTest()
      : train(testing::make_dataset(2, 8, 4, [] {
          std::vector<testing::SampleSpec> s;
          for (int i = 0; i < 12; ++i) s.push_back({i % 2, "man/NOUN opens/VERB door/NOUN", {0, 1}});
          s.push_back({0, "man/NOUN lifts/VERB door/NOUN", {0, 1}});
          return s;
        }())),
        test(testing::make_dataset(3, 8, 4,
                                   {{0, "man/NOUN opens/VERB door/NOUN", {1, 3}},
                                    {1, "man/NOUN lifts/VERB door/NOUN", {2, 4}},
                                    {2, "man/NOUN opens/VERB box/NOUN", {4, 6}},
                                    {2, "man/NOUN opens/VERB door/NOUN", {0, 7}}})),
        counts(noun_verb_frequencies(train)) {
    preds = {pred("vid0#0", {{1, 3}}), pred("vid1#0", {{2, 4}}), pred("vid2#0", {{0, 0}, {4, 6}}),
             pred("vid2#1", {{5, 7}})};
  }

  Dataset train;
  Dataset test;
  WordCounts counts;
  std::vector<Prediction> preds;
};

TEST_F(EvaluateTest, SplitsAreAdditive) {
  const auto cells = evaluate(preds, test, default_grid(), &counts);
  EXPECT_EQ(cells.size(), 18u);
  for (const auto& g : default_grid()) {
    const MetricCell* all = find_cell(cells, "all", g.n, g.m);
    const MetricCell* rare = find_cell(cells, "rare", g.n, g.m);
    const MetricCell* common = find_cell(cells, "common", g.n, g.m);
    ASSERT_TRUE(all && rare && common);
    EXPECT_EQ(all->hits, rare->hits + common->hits);
    EXPECT_EQ(all->count, 4u);
    EXPECT_EQ(rare->count, 2u);  // "lifts" once, "box" never
    EXPECT_NEAR(all->recall, 100.0 * all->hits / all->count, 1e-12);
  }
  EXPECT_EQ(find_cell(cells, "rare", 1, 0.5)->hits, 1u);
  EXPECT_EQ(find_cell(cells, "rare", 5, 0.5)->hits, 2u);
  EXPECT_EQ(find_cell(cells, "common", 1, 0.5)->hits, 1u);
  EXPECT_EQ(evaluate(preds, test, default_grid()).size(), 6u);
}

TEST_F(EvaluateTest, MismatchedIdsAreNamed) {
  auto bad = preds;
  bad[3].sample_id = "ghost#0";
  try {
    evaluate(bad, test, default_grid());
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ghost#0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("vid2#1"), std::string::npos) << msg;
  }
  bad.pop_back();
  EXPECT_THROW(evaluate(bad, test, default_grid()), Error);
}

TEST_F(EvaluateTest, ReportFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "dtsg_eval_test";
  std::filesystem::create_directories(dir);
  const auto cells = evaluate(preds, test, default_grid(), &counts);
  write_report_csv(cells, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "split,n,m,recall,count");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 18);

  write_predictions(preds, dir / "p.jsonl");
  const auto back = read_predictions(dir / "p.jsonl");
  ASSERT_EQ(back.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(back[i].sample_id, preds[i].sample_id);
    ASSERT_EQ(back[i].topn.size(), preds[i].topn.size());
    for (std::size_t k = 0; k < preds[i].topn.size(); ++k) {
      EXPECT_EQ(back[i].topn[k].start, preds[i].topn[k].start);
      EXPECT_EQ(back[i].topn[k].score, preds[i].topn[k].score);
    }
  }

  write_recall_svg(cells, dir / "r.svg", "test");
  std::ifstream svg(dir / "r.svg");
  std::stringstream ss;
  ss << svg.rdbuf();
  EXPECT_NE(ss.str().find("<svg"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_F(EvaluateTest, InferenceTouchesExactlyTheBackbone) {
  ModelConfig cfg = testing::tiny_model_config(4);
  GroundingModel model(cfg, Vocabulary::build(train), 3);
  const InferenceBenchmark b = benchmark_inference(model, test, 2, 0);
  EXPECT_EQ(b.samples, 4u);
  EXPECT_EQ(b.reps, 2);
  EXPECT_EQ(b.touched_params, b.backbone_params);
  EXPECT_EQ(b.backbone_params, testing::expected_backbone_params(model.config()));
  EXPECT_GT(model.params().count(), b.backbone_params);
  std::size_t total = 0;
  for (const auto& [tag, n] : b.params_by_tag) total += n;
  EXPECT_EQ(total, model.params().count());

  const auto p = predict(model, test, 5);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0].sample_id, "vid0#0");
  EXPECT_EQ(p[0].topn.size(), 5u);
}

}  // namespace
}  // namespace dtsg
