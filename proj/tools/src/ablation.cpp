#include "dtsg_tools/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "dtsg/error.hpp"
#include "dtsg/log.hpp"

namespace dtsg::tools {

std::vector<AblationRow> default_ablation_rows() {
  std::vector<AblationRow> rows;
  for (const char* name : {"backbone", "sample", "bias1", "bias2", "bias3", "all"}) rows.push_back(ablation_row(name));
  return rows;
}

AblationRow ablation_row(std::string_view name) {
  LossToggles t = LossToggles::backbone_only();
  if (name == "backbone") {
  } else if (name == "sample") {
    t.sample = true;
  } else if (name == "bias1" || name == "bias2" || name == "bias3") {
    t.debias = t.contras = t.sample = true;
    t.bias1 = name == "bias1";
    t.bias2 = name == "bias2";
    t.bias3 = name == "bias3";
  } else if (name == "all") {
    t = LossToggles{};
  } else {
    throw ConfigError("cli", "unknown ablation row '" + std::string(name) +
                                 "' (expected backbone, sample, bias1, bias2, bias3 or all)");
  }
  return {std::string(name), t};
}

std::vector<AblationRun> run_ablation(const AblationInputs& in, const std::vector<AblationRow>& rows,
                                      std::uint64_t seed0, int seeds,
                                      const std::function<void(const AblationRun&)>& on_run) {
  if (in.train == nullptr || in.test == nullptr) throw Error("cli", "ablation needs train and test sets");
  if (seeds < 1) throw ConfigError("cli", "ablation needs at least one seed");
  const Dataset empty;
  const Dataset& val = in.val != nullptr ? *in.val : empty;
  const WordCounts counts = noun_verb_frequencies(*in.train);
  const Vocabulary vocab = Vocabulary::build(*in.train);
  std::vector<AblationRun> runs;
  for (int k = 0; k < seeds; ++k) {
    const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(k);
    for (const auto& row : rows) {
      TrainConfig cfg = in.train_config;
      cfg.toggles = row.toggles;
      cfg.seed = seed;
      const bool branch = row.toggles.uses_branch() || row.toggles.sample;
      GroundingModel model(in.model, vocab, seed, branch);
      if (in.word_vectors) model.load_word_vectors(*in.word_vectors);
      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult r = train(model, *in.train, val, in.negatives, cfg);
      AblationRun run;
      run.row = row.name;
      run.seed = seed;
      run.epochs_run = static_cast<int>(r.history.size());
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      run.cells = evaluate(predict(model, *in.test), *in.test, default_grid(), &counts, {cfg.recall_inclusive},
                           in.rare_threshold);
      if (on_run) on_run(run);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

std::optional<double> run_recall(const AblationRun& run, const std::string& split, int n, double m) {
  const MetricCell* c = find_cell(run.cells, split, n, m);
  if (c == nullptr) return std::nullopt;
  return c->recall;
}

double mean_recall(const std::vector<AblationRun>& runs, const std::string& row, const std::string& split, int n,
                   double m) {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : runs) {
    if (r.row != row) continue;
    if (auto v = run_recall(r, split, n, m)) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) throw Error("cli", "no runs for ablation row " + row);
  return sum / count;
}

void write_ablation_runs_csv(const std::vector<AblationRun>& runs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cli", "cannot write " + path.string());
  out << "row,seed,split,n,m,recall,count\n";
  for (const auto& r : runs) {
    for (const auto& c : r.cells) {
      out << r.row << ',' << r.seed << ',' << c.split << ',' << c.n << ',' << c.m << ',' << c.recall << ','
          << c.count << '\n';
    }
  }
}

void write_ablation_summary_csv(const std::vector<AblationRun>& runs, const std::vector<AblationRow>& rows,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cli", "cannot write " + path.string());
  out << "row,bias1,bias2,bias3,debias,contras,sample,split,n,m,seeds,mean,std,min,max\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& row : rows) {
    std::vector<const AblationRun*> mine;
    for (const auto& r : runs) {
      if (r.row == row.name) mine.push_back(&r);
    }
    if (mine.empty()) continue;
    for (const auto& cell : mine.front()->cells) {
      std::vector<double> v;
      for (const AblationRun* r : mine) {
        if (auto x = run_recall(*r, cell.split, cell.n, cell.m)) v.push_back(*x);
      }
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      const auto& t = row.toggles;
      out << row.name << ',' << t.bias1 << ',' << t.bias2 << ',' << t.bias3 << ',' << t.debias << ',' << t.contras
          << ',' << t.sample << ',' << cell.split << ',' << cell.n << ',';
      out.precision(1);
      out << cell.m << ',';
      out.precision(4);
      out << v.size() << ',' << mean << ',' << sd << ',' << *std::min_element(v.begin(), v.end()) << ','
          << *std::max_element(v.begin(), v.end()) << '\n';
    }
  }
}

}  // namespace dtsg::tools
