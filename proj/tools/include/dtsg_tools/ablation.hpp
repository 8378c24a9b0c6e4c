#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dtsg/contrastive_sampler.hpp"
#include "dtsg/evaluation.hpp"
#include "dtsg/training.hpp"

namespace dtsg::tools {

struct AblationRow {
  std::string name;
  LossToggles toggles;
};

// backbone, sample, bias1, bias2, bias3, all. A single-bias row keeps
// L_debias, L_contras and L_sample on.
std::vector<AblationRow> default_ablation_rows();
AblationRow ablation_row(std::string_view name);  // ConfigError for unknown names

struct AblationInputs {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;   // may be empty
  const Dataset* test = nullptr;
  const NegativeTable* negatives = nullptr;
  ModelConfig model;
  TrainConfig train_config;  // toggles and seed are replaced per run
  int rare_threshold = 10;
  std::optional<std::filesystem::path> word_vectors;  // loaded into every model after construction
};

struct AblationRun {
  std::string row;
  std::uint64_t seed = 0;
  std::vector<MetricCell> cells;
  int epochs_run = 0;
  double seconds = 0.0;
};

// Trains and evaluates every row for seeds seed0, seed0 + 1, ... Each model
// is built with mt19937_64(seed), so rows sharing a seed share backbone init.
std::vector<AblationRun> run_ablation(const AblationInputs& inputs, const std::vector<AblationRow>& rows,
                                      std::uint64_t seed0, int seeds,
                                      const std::function<void(const AblationRun&)>& on_run = {});

// Mean R@n,IoU=m of `row` on `split` over its runs.
double mean_recall(const std::vector<AblationRun>& runs, const std::string& row, const std::string& split, int n,
                   double m);
std::optional<double> run_recall(const AblationRun& run, const std::string& split, int n, double m);

// Long form: row,seed,split,n,m,recall,count
void write_ablation_runs_csv(const std::vector<AblationRun>& runs, const std::filesystem::path& path);
// One line per (row, split, n, m): toggles, seeds, mean, std, min, max.
void write_ablation_summary_csv(const std::vector<AblationRun>& runs, const std::vector<AblationRow>& rows,
                                const std::filesystem::path& path);

}  // namespace dtsg::tools
