#include "dtsg/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtsg/error.hpp"
#include "dtsg/model.hpp"

namespace dtsg {

bool is_hit(const std::vector<SegmentCandidate>& topn, const ClipSpan& gt, int n, double m, RecallOptions opts) {
  const std::size_t k = std::min<std::size_t>(topn.size(), static_cast<std::size_t>(std::max(n, 0)));
  for (std::size_t i = 0; i < k; ++i) {
    const double v = iou(ClipSpan{topn[i].start, topn[i].end}, gt);
    if (opts.inclusive ? v >= m : v > m) return true;
  }
  return false;
}

double recall_at(const std::vector<Prediction>& predictions, const std::vector<ClipSpan>& gts, int n, double m,
                 RecallOptions opts) {
  if (predictions.size() != gts.size()) throw Error("evaluation", "prediction and ground-truth counts differ");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (is_hit(predictions[i].topn, gts[i], n, m, opts)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (int n : {1, 5}) {
    for (double m : {0.3, 0.5, 0.7}) grid.push_back({n, m});
  }
  return grid;
}

std::vector<MetricCell> evaluate(const std::vector<Prediction>& predictions, const Dataset& dataset,
                                 const std::vector<GridPoint>& grid, const WordCounts* train_counts,
                                 RecallOptions opts, int rare_threshold) {
  std::map<std::string, const Prediction*, std::less<>> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, &p).second) throw Error("evaluation", "duplicate prediction id " + p.sample_id);
  }
  std::vector<std::string> missing;
  for (const auto& s : dataset.samples()) {
    if (!by_id.contains(s.id)) missing.push_back(s.id);
  }
  std::set<std::string> known;
  for (const auto& s : dataset.samples()) known.insert(s.id);
  std::vector<std::string> extra;
  for (const auto& p : predictions) {
    if (!known.contains(p.sample_id)) extra.push_back(p.sample_id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream msg;
    msg << "prediction ids do not match the dataset;";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg << ' ' << label << ':';
      for (const auto& id : ids) msg << ' ' << id;
      msg << ';';
    };
    list("missing", missing);
    list("unknown", extra);
    throw Error("evaluation", msg.str());
  }

  std::vector<std::string> splits{"all"};
  if (train_counts != nullptr) {
    splits.push_back("rare");
    splits.push_back("common");
  }
  std::vector<MetricCell> cells;
  for (const auto& split : splits) {
    for (const auto& point : grid) {
      MetricCell cell{split, point.n, point.m, 0.0, 0, 0};
      for (const auto& s : dataset.samples()) {
        if (split != "all") {
          const bool rare = is_rare(s.query, *train_counts, rare_threshold);
          if ((split == "rare") != rare) continue;
        }
        ++cell.count;
        if (is_hit(by_id.at(s.id)->topn, s.clip_segment, point.n, point.m, opts)) ++cell.hits;
      }
      cell.recall = cell.count == 0 ? 0.0 : 100.0 * static_cast<double>(cell.hits) / static_cast<double>(cell.count);
      cells.push_back(cell);
    }
  }
  return cells;
}

const MetricCell* find_cell(const std::vector<MetricCell>& cells, const std::string& split, int n, double m) {
  for (const auto& c : cells) {
    if (c.split == split && c.n == n && std::abs(c.m - m) < 1e-12) return &c;
  }
  return nullptr;
}

std::vector<Prediction> predict(const GroundingModel& model, const Dataset& dataset, int top_n) {
  std::vector<Prediction> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples()) {
    out.push_back({s.id, decode_top_n(model.predict_scores(dataset.video_of(s).clips, s.query), top_n)});
  }
  return out;
}

void write_report_csv(const std::vector<MetricCell>& cells, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("evaluation", "cannot write " + path.string());
  out << "split,n,m,recall,count\n";
  out.setf(std::ios::fixed);
  for (const auto& c : cells) {
    out.precision(1);
    out << c.split << ',' << c.n << ',' << c.m << ',';
    out.precision(4);
    out << c.recall << ',' << c.count << '\n';
  }
}

void write_predictions(const std::vector<Prediction>& predictions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("evaluation", "cannot write " + path.string());
  for (const auto& p : predictions) {
    nlohmann::ordered_json j;
    j["sample_id"] = p.sample_id;
    j["topn"] = nlohmann::json::array();
    for (const auto& c : p.topn) j["topn"].push_back({c.start, c.end, c.score});
    out << j.dump() << '\n';
  }
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("evaluation", "cannot open " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Prediction p;
      p.sample_id = j.at("sample_id").get<std::string>();
      for (const auto& t : j.at("topn")) {
        p.topn.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<double>()});
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error("evaluation", path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_recall_svg(const std::vector<MetricCell>& cells, const std::filesystem::path& path,
                      const std::string& title) {
  constexpr int kBar = 18;
  constexpr int kGap = 10;
  constexpr int kLeft = 50;
  constexpr int kTop = 40;
  constexpr int kHeight = 220;
  const int width = kLeft + static_cast<int>(cells.size()) * (kBar + kGap) + 40;
  const int total_height = kTop + kHeight + 120;
  const std::map<std::string, std::string> colors{{"all", "#4c72b0"}, {"rare", "#dd8452"}, {"common", "#55a868"}};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("evaluation", "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << total_height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
  for (int tick = 0; tick <= 100; tick += 25) {
    const int y = kTop + kHeight - tick * kHeight / 100;
    out << "<line x1=\"" << kLeft - 4 << "\" x2=\"" << width - 30 << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 3 << "\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  int x = kLeft + kGap;
  for (const auto& c : cells) {
    const double h = c.recall * kHeight / 100.0;
    auto color = colors.find(c.split);
    out << "<rect x=\"" << x << "\" y=\"" << kTop + kHeight - h << "\" width=\"" << kBar << "\" height=\"" << h
        << "\" fill=\"" << (color == colors.end() ? "#888" : color->second) << "\"/>\n";
    std::ostringstream label;
    label << c.split << " R@" << c.n << " " << c.m;
    const int ly = kTop + kHeight + 8;
    out << "<text x=\"" << x + kBar / 2 << "\" y=\"" << ly << "\" transform=\"rotate(60 " << x + kBar / 2 << ' '
        << ly << ")\">" << label.str() << "</text>\n";
    x += kBar + kGap;
  }
  out << "</svg>\n";
}

InferenceBenchmark benchmark_inference(const GroundingModel& model, const Dataset& dataset, int reps, int warmup) {
  if (dataset.empty()) throw Error("evaluation", "benchmark needs at least one sample");
  if (reps < 1) throw Error("evaluation", "benchmark needs reps >= 1");
  InferenceBenchmark out;
  out.reps = reps;
  out.samples = dataset.size();
  for (const Parameter* p : model.params().all()) out.params_by_tag[std::string(to_string(p->tag))] += p->size();
  out.backbone_params = model.params().count(ComponentTag::kBackbone);

  std::set<const Parameter*> touched;
  for (const auto& s : dataset.samples()) {
    std::vector<const Parameter*> t;
    model.predict_scores(dataset.video_of(s).clips, s.query, &t);
    touched.insert(t.begin(), t.end());
  }
  for (const Parameter* p : touched) {
    if (p->tag != ComponentTag::kBackbone) {
      throw Error("evaluation", "inference path read non-backbone tensor " + p->name);
    }
    out.touched_params += p->size();
  }

  auto pass = [&] {
    for (const auto& s : dataset.samples()) {
      auto scores = model.predict_scores(dataset.video_of(s).clips, s.query);
      auto top = decode_top_n(scores, 5);
      if (top.empty()) throw Error("evaluation", "empty decode");
    }
  };
  for (int i = 0; i < warmup; ++i) pass();
  std::vector<double> per_sample;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    per_sample.push_back(dt.count() / static_cast<double>(dataset.size()));
  }
  double sum = 0.0;
  for (double v : per_sample) sum += v;
  out.mean_ms = sum / reps;
  double var = 0.0;
  for (double v : per_sample) var += (v - out.mean_ms) * (v - out.mean_ms);
  out.std_ms = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
  return out;
}

}  // namespace dtsg
