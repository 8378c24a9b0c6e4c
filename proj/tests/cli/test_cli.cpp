// Drives the dtsg binary end to end on a small generated corpus.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "dtsg/data_model.hpp"
#include "dtsg/evaluation.hpp"
#include "dtsg/pos_tagger.hpp"

namespace fs = std::filesystem;

namespace dtsg {
namespace {

const fs::path kRoot = fs::temp_directory_path() / "dtsg_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(DTSG_BINARY) + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallSpec =
    "--set num_nouns=12 --set num_verbs=6 --set rare_pair_budget=3 --set train_size=120 --set val_size=20 "
    "--set test_size=40 --set clip_count=16 --set feature_dim=8 --set max_event_len=5 --seed 3";

const char* kTinyModel =
    "--set model.d_model=8 --set model.ffn_dim=8 --set model.mlp_hidden=8 --set model.max_query_len=6 "
    "--set train.epochs=1 --set train.batch_size=16 --set train.patience=0";

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    ASSERT_EQ(run("generate " + std::string(kSmallSpec) + " --out " + (kRoot / "corpus").string()), 0)
        << slurp(kRoot / "last.log");
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }

  static std::string data_cfg() { return "--config " + (kRoot / "corpus" / "data.cfg").string(); }
};

TEST_F(CliTest, GenerateWritesCorpusAndRegeneratesIdentically) {
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "spec.cfg", "manifest.json", "data.cfg"}) {
    EXPECT_TRUE(fs::exists(kRoot / "corpus" / f)) << f;
  }
  ASSERT_EQ(run("generate --config " + (kRoot / "corpus" / "spec.cfg").string() + " --out " +
                (kRoot / "again").string()),
            0)
      << slurp(kRoot / "last.log");
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "spec.cfg", "manifest.json"}) {
    EXPECT_EQ(slurp(kRoot / "corpus" / f), slurp(kRoot / "again" / f)) << f;
  }
  for (const auto& e : fs::directory_iterator(kRoot / "corpus" / "features")) {
    EXPECT_EQ(slurp(e.path()), slurp(kRoot / "again" / "features" / e.path().filename())) << e.path();
  }
}

TEST_F(CliTest, InfeasibleRareBudgetExitsTwo) {
  EXPECT_EQ(run("generate --set rare_pair_budget=100 --out " + (kRoot / "bad").string()), 2);
  EXPECT_NE(slurp(kRoot / "last.log").find("rare_pair_budget"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("train --set model.d_model=-1 " + data_cfg() + " --out " + (kRoot / "bad").string()), 2);
  EXPECT_EQ(run("eval --out " + (kRoot / "bad").string()), 2);  // no data paths
}

TEST_F(CliTest, PerfectPredictionsScoreHundred) {
  const RuleBasedTagger tagger;
  DataConfig dc;
  dc.clip_count = 16;
  const Dataset test = load_dataset(kRoot / "corpus" / "features", kRoot / "corpus" / "test.jsonl", dc, &tagger);
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds.push_back({test[i].id, {{test[i].clip_segment.start, test[i].clip_segment.end, 1.0}}});
  }
  write_predictions(preds, kRoot / "perfect.jsonl");
  ASSERT_EQ(run("eval " + data_cfg() + " --predictions " + (kRoot / "perfect.jsonl").string() + " --out " +
                (kRoot / "perfect").string()),
            0)
      << slurp(kRoot / "last.log");
  std::ifstream in(kRoot / "perfect" / "report.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string split, n, m, recall;
    std::getline(ss, split, ',');
    std::getline(ss, n, ',');
    std::getline(ss, m, ',');
    std::getline(ss, recall, ',');
    EXPECT_DOUBLE_EQ(std::stod(recall), 100.0) << line;
  }
  EXPECT_EQ(rows, 18);
}

TEST_F(CliTest, TrainEvalExportParity) {
  const std::string out = (kRoot / "run").string();
  ASSERT_EQ(run("train " + data_cfg() + " " + kTinyModel + " --deterministic --out " + out), 0)
      << slurp(kRoot / "last.log");
  for (const char* f : {"model.ckpt", "last.ckpt", "train_log.csv", "effective_config.cfg", "negatives.json"}) {
    EXPECT_TRUE(fs::exists(kRoot / "run" / f)) << f;
  }
  ASSERT_EQ(run("eval " + data_cfg() + " --ckpt " + out + "/model.ckpt --out " + out + "/eval_full"), 0)
      << slurp(kRoot / "last.log");
  ASSERT_EQ(run("export --ckpt " + out + "/model.ckpt --out " + out), 0) << slurp(kRoot / "last.log");
  ASSERT_EQ(run("eval " + data_cfg() + " --ckpt " + out + "/backbone.ckpt --out " + out + "/eval_backbone"), 0)
      << slurp(kRoot / "last.log");
  const std::string full = slurp(kRoot / "run" / "eval_full" / "predictions.jsonl");
  EXPECT_FALSE(full.empty());
  EXPECT_EQ(full, slurp(kRoot / "run" / "eval_backbone" / "predictions.jsonl"));
  EXPECT_LT(fs::file_size(kRoot / "run" / "backbone.ckpt"), fs::file_size(kRoot / "run" / "model.ckpt"));

  ASSERT_EQ(run("bench " + data_cfg() + " --ckpt " + out + "/backbone.ckpt --set bench.reps=1 --out " + out), 0)
      << slurp(kRoot / "last.log");
  EXPECT_NE(slurp(kRoot / "run" / "bench.json").find("inference_params"), std::string::npos);
}

TEST_F(CliTest, AblateWritesRequestedRows) {
  const std::string out = (kRoot / "ablate").string();
  ASSERT_EQ(run("ablate " + data_cfg() + " " + kTinyModel + " --set ablate.rows=backbone,all --set ablate.seeds=1 --out " +
                out),
            0)
      << slurp(kRoot / "last.log");
  std::ifstream in(kRoot / "ablate" / "ablation.csv");
  std::string line;
  std::getline(in, line);
  std::set<std::string> rows;
  while (std::getline(in, line)) rows.insert(line.substr(0, line.find(',')));
  EXPECT_EQ(rows, (std::set<std::string>{"backbone", "all"}));
  EXPECT_TRUE(fs::exists(kRoot / "ablate" / "ablation_runs.csv"));
  EXPECT_EQ(run("ablate " + data_cfg() + " --set ablate.rows=nonsense --out " + out), 2);
}

}  // namespace
}  // namespace dtsg
