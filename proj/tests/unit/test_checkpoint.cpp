#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dtsg/checkpoint.hpp"
#include "dtsg/error.hpp"
#include "dtsg/evaluation.hpp"
#include "fixtures.hpp"

namespace dtsg {
namespace {

class CheckpointTest : public ::testing::Test {
 protected:
  CheckpointTest()
      : data(testing::make_dataset(3, 6, 8,
                                   {{0, "person/NOUN holds/VERB the/OTHER cup/NOUN", {1, 3}},
                                    {1, "person/NOUN opens/VERB the/OTHER cup/NOUN", {2, 4}},
                                    {2, "person/NOUN holds/VERB the/OTHER door/NOUN", {0, 2}}})),
        negatives(mine_negatives(data)),
        model(testing::tiny_model_config(8), Vocabulary::build(data), 5),
        dir(std::filesystem::temp_directory_path() / "dtsg_checkpoint_test") {
    std::filesystem::create_directories(dir);
    cfg.epochs = 2;
    cfg.patience = 0;
    result = train(model, data, {}, &negatives, cfg);
  }
  ~CheckpointTest() override { std::filesystem::remove_all(dir); }

  Dataset data;
  NegativeTable negatives;
  GroundingModel model;
  std::filesystem::path dir;
  TrainConfig cfg;
  TrainResult result;
};

TEST_F(CheckpointTest, ReloadIsBitwiseIdentical) {
  FlatConfig run;
  cfg.write_to(run);
  const auto path = dir / "a.ckpt";
  save_checkpoint(path, model, result.state, run);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
  const Checkpoint c = load_checkpoint(path);
  ASSERT_TRUE(c.model);
  EXPECT_TRUE(c.has_optimizer_state);
  EXPECT_EQ(c.state.epoch, 2);
  EXPECT_EQ(c.state.step, result.state.step);
  EXPECT_EQ(c.state.rng_state, result.state.rng_state);
  EXPECT_EQ(c.config_text, run.dump());
  EXPECT_EQ(c.config_hash, fnv1a64(run.dump()));
  const auto a = model.params().all();
  const auto b = c.model->params().all();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->tag, b[i]->tag);
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
    EXPECT_EQ(a[i]->m, b[i]->m) << a[i]->name;
    EXPECT_EQ(a[i]->v, b[i]->v) << a[i]->name;
  }
  EXPECT_EQ(c.model->vocab().tokens(), model.vocab().tokens());

  save_checkpoint(dir / "b.ckpt", model, result.state, run, false);
  EXPECT_FALSE(load_checkpoint(dir / "b.ckpt").has_optimizer_state);
  EXPECT_LT(std::filesystem::file_size(dir / "b.ckpt"), std::filesystem::file_size(path));
}

TEST_F(CheckpointTest, CorruptFilesAreRejected) {
  const auto path = dir / "bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(path), Error);
  save_checkpoint(path, model, result.state, {});
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
  EXPECT_THROW(load_checkpoint(path), Error);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_F(CheckpointTest, ExportKeepsOnlyTheBackbone) {
  const auto exported = export_backbone(model);
  EXPECT_FALSE(exported->has_branch());
  for (const Parameter* p : exported->params().all()) EXPECT_EQ(p->tag, ComponentTag::kBackbone) << p->name;
  EXPECT_EQ(exported->params().count(), model.params().count(ComponentTag::kBackbone));
  EXPECT_LT(exported->params().count(), model.params().count());

  const auto before = predict(model, data);
  const auto after = predict(*exported, data);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    ASSERT_EQ(before[i].topn.size(), after[i].topn.size());
    for (std::size_t k = 0; k < before[i].topn.size(); ++k) {
      EXPECT_EQ(before[i].topn[k].start, after[i].topn[k].start);
      EXPECT_EQ(before[i].topn[k].end, after[i].topn[k].end);
      EXPECT_EQ(before[i].topn[k].score, after[i].topn[k].score);
    }
  }

  // The exported file loads back as a backbone-only model.
  save_checkpoint(dir / "export.ckpt", *exported, result.state, {}, false);
  const Checkpoint c = load_checkpoint(dir / "export.ckpt");
  EXPECT_FALSE(c.model->has_branch());
  EXPECT_EQ(predict(*c.model, data)[0].topn[0].score, before[0].topn[0].score);
}

}  // namespace
}  // namespace dtsg
