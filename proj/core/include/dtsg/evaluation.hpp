#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dtsg/boundary_head.hpp"
#include "dtsg/data_model.hpp"

namespace dtsg {

class GroundingModel;

struct Prediction {
  std::string sample_id;
  std::vector<SegmentCandidate> topn;  // best first
};

// IoU threshold comparison: strict (>) by default, >= when inclusive.
struct RecallOptions {
  bool inclusive = false;
};

bool is_hit(const std::vector<SegmentCandidate>& topn, const ClipSpan& gt, int n, double m, RecallOptions opts = {});

// Percentage of samples whose first n predictions include one with IoU above m.
// predictions[i] belongs to gts[i]. Shorter lists use what they have.
double recall_at(const std::vector<Prediction>& predictions, const std::vector<ClipSpan>& gts, int n, double m,
                 RecallOptions opts = {});

struct MetricCell {
  std::string split;  // all / rare / common
  int n = 1;
  double m = 0.5;
  double recall = 0.0;  // percentage
  std::size_t count = 0;
  std::size_t hits = 0;
};

struct GridPoint {
  int n;
  double m;
};

std::vector<GridPoint> default_grid();  // {1, 5} × {0.3, 0.5, 0.7}

// Scores `predictions` against `dataset` on every grid point for the splits
// all, and rare/common when `train_counts` is given. Throws if the prediction
// ids and the dataset sample ids do not match one to one.
std::vector<MetricCell> evaluate(const std::vector<Prediction>& predictions, const Dataset& dataset,
                                 const std::vector<GridPoint>& grid, const WordCounts* train_counts = nullptr,
                                 RecallOptions opts = {}, int rare_threshold = 10);

const MetricCell* find_cell(const std::vector<MetricCell>& cells, const std::string& split, int n, double m);

std::vector<Prediction> predict(const GroundingModel& model, const Dataset& dataset, int top_n = 5);

// CSV: split,n,m,recall,count
void write_report_csv(const std::vector<MetricCell>& cells, const std::filesystem::path& path);

// JSON-lines: {"sample_id": ..., "topn": [[s, e, score], ...]}
void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Bar chart of recall per (split, grid point) as a standalone SVG file.
void write_recall_svg(const std::vector<MetricCell>& cells, const std::filesystem::path& path,
                      const std::string& title);

struct InferenceBenchmark {
  double mean_ms = 0.0;  // per sample
  double std_ms = 0.0;
  int reps = 0;
  std::size_t samples = 0;
  std::map<std::string, std::size_t> params_by_tag;  // scalar counts
  std::size_t touched_params = 0;                    // scalars read at inference
  std::size_t backbone_params = 0;
};

// Times `reps` passes over `dataset` after `warmup` untimed passes. Throws if
// the inference path reads any non-backbone tensor.
InferenceBenchmark benchmark_inference(const GroundingModel& model, const Dataset& dataset, int reps,
                                       int warmup = 1);

}  // namespace dtsg
