#include "dtsg/data_model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dtsg/error.hpp"
#include "dtsg/log.hpp"

namespace dtsg {
namespace {

constexpr std::array<char, 4> kFeatureMagic{'D', 'T', 'S', 'G'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  const T le = to_little(v);
  out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return to_little(v);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DTSG_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

struct ParsedLine {
  std::string video_id;
  double duration = 0.0;
  QueryAnnotation query;
  std::size_t line_no = 0;
};

}  // namespace

Dataset::Dataset(std::shared_ptr<const std::vector<VideoEntry>> videos, std::vector<GroundingSample> samples,
                 int clip_count, std::size_t rejected_count)
    : videos_(std::move(videos)),
      samples_(std::move(samples)),
      clip_count_(clip_count),
      rejected_count_(rejected_count) {
  for (std::size_t i = 0; i < videos_->size(); ++i) video_index_.emplace((*videos_)[i].raw.id, i);
  for (std::size_t i = 0; i < samples_.size(); ++i) sample_index_.emplace(samples_[i].id, i);
}

Eigen::Index Dataset::feature_dim() const { return videos_->empty() ? 0 : videos_->front().clips.cols(); }

std::optional<std::size_t> Dataset::find_video(const std::string& id) const {
  auto it = video_index_.find(id);
  if (it == video_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Dataset::find_sample(const std::string& id) const {
  auto it = sample_index_.find(id);
  if (it == sample_index_.end()) return std::nullopt;
  return it->second;
}

Dataset Dataset::subset(const std::vector<std::size_t>& sample_indices) const {
  std::vector<GroundingSample> picked;
  picked.reserve(sample_indices.size());
  for (std::size_t i : sample_indices) picked.push_back(samples_.at(i));
  return Dataset(videos_, std::move(picked), clip_count_, 0);
}

FloatMatrix read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("data-model", "cannot open feature file " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kFeatureMagic) throw Error("data-model", "bad magic in feature file " + path.string());
  const auto rows = read_le<std::uint32_t>(in);
  const auto cols = read_le<std::uint32_t>(in);
  if (!in || rows == 0 || cols == 0) throw Error("data-model", "empty or truncated feature file " + path.string());
  FloatMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_le<float>(in);
  if (!in) throw Error("data-model", "truncated feature payload in " + path.string());
  if (!m.allFinite()) throw Error("data-model", "non-finite feature value in " + path.string());
  return m;
}

void write_feature_file(const std::filesystem::path& path, const FloatMatrix& features) {
  if (features.rows() == 0 || features.cols() == 0) throw Error("data-model", "refusing to write empty features");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("data-model", "cannot write feature file " + path.string());
  out.write(kFeatureMagic.data(), kFeatureMagic.size());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.rows()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.size(); ++i) write_le<float>(out, features.data()[i]);
}

std::filesystem::path feature_path(const std::filesystem::path& features_dir, const std::string& video_id) {
  return features_dir / (video_id + ".bin");
}

Matrix downsample_video(const Matrix& raw, int clip_count) {
  if (clip_count < 1) throw Error("data-model", "clip count must be >= 1");
  const Eigen::Index t_raw = raw.rows();
  if (t_raw == 0 || raw.cols() == 0) throw Error("data-model", "cannot downsample empty features");
  const Eigen::Index t_out = clip_count;
  Matrix out(t_out, raw.cols());
  if (t_raw <= t_out) {
    for (Eigen::Index t = 0; t < t_out; ++t) out.row(t) = raw.row((t * t_raw) / t_out);
    return out;
  }
  for (Eigen::Index t = 0; t < t_out; ++t) {
    const Eigen::Index lo = (t * t_raw) / t_out;
    const Eigen::Index hi = ((t + 1) * t_raw) / t_out;
    out.row(t) = raw.middleRows(lo, hi - lo).colwise().sum() / static_cast<double>(hi - lo);
  }
  return out;
}

Matrix downsample_video(const FloatMatrix& raw, int clip_count) {
  return downsample_video(Matrix(raw.cast<double>()), clip_count);
}

ClipSpan map_timestamps(double start, double end, double duration, int clip_count) {
  if (!(duration > 0.0)) throw Error("data-model", "duration must be positive");
  if (clip_count < 1) throw Error("data-model", "clip count must be >= 1");
  if (!(start >= 0.0 && start < end && end <= duration)) {
    throw Error("data-model", "segment must satisfy 0 <= start < end <= duration");
  }
  const double scale = static_cast<double>(clip_count) / duration;
  int s = static_cast<int>(std::floor(start * scale));
  s = std::clamp(s, 0, clip_count - 1);
  int e = static_cast<int>(std::ceil(end * scale)) - 1;
  e = std::min(clip_count - 1, e);
  e = std::max(e, s);
  return {s, e};
}

Dataset load_dataset(const std::filesystem::path& features_dir, const std::filesystem::path& annotations_file,
                     const DataConfig& config, const PosTagger* fallback_tagger) {
  std::ifstream in(annotations_file);
  if (!in) throw Error("data-model", "cannot open annotation file " + annotations_file.string());
  RuleBasedTagger default_tagger;
  const PosTagger& tagger = fallback_tagger ? *fallback_tagger : default_tagger;

  std::vector<ParsedLine> lines;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("data-model", annotations_file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ParsedLine p;
    p.line_no = line_no;
    try {
      p.video_id = j.at("video_id").get<std::string>();
      p.duration = j.at("duration").get<double>();
      p.query.tokens = j.at("tokens").get<std::vector<std::string>>();
      p.query.start = j.at("start").get<double>();
      p.query.end = j.at("end").get<double>();
      if (j.contains("pos") && !j.at("pos").empty()) {
        for (const auto& t : j.at("pos")) p.query.pos.push_back(parse_pos_tag(t.get<std::string>()));
      } else {
        p.query.pos = tagger.tag(p.query.tokens);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("data-model", annotations_file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (p.query.tokens.empty() || p.query.tokens.size() != p.query.pos.size()) {
      throw Error("data-model", annotations_file.string() + ":" + std::to_string(line_no) +
                                    ": tokens and pos must be nonempty and of equal length");
    }
    lines.push_back(std::move(p));
  }

  // Deterministic ordering: by video id, then file order.
  std::stable_sort(lines.begin(), lines.end(),
                   [](const ParsedLine& a, const ParsedLine& b) { return a.video_id < b.video_id; });

  std::vector<std::string> video_ids;
  std::map<std::string, double> durations;
  for (const auto& p : lines) {
    if (durations.emplace(p.video_id, p.duration).second) video_ids.push_back(p.video_id);
  }

  auto videos = std::make_shared<std::vector<VideoEntry>>(video_ids.size());
  for (std::size_t i = 0; i < video_ids.size(); ++i) {
    const auto path = feature_path(features_dir, video_ids[i]);
    if (!std::filesystem::exists(path)) {
      throw Error("data-model", "missing feature file for video " + video_ids[i] + " (" + path.string() + ")");
    }
  }

  const int workers = std::max(1, std::min<int>(resolve_workers(config.num_workers),
                                                static_cast<int>(std::max<std::size_t>(1, video_ids.size()))));
  std::mutex err_mutex;
  std::string first_error;
  auto load_range = [&](std::size_t worker) {
    for (std::size_t i = worker; i < video_ids.size(); i += static_cast<std::size_t>(workers)) {
      try {
        VideoEntry& v = (*videos)[i];
        v.raw.id = video_ids[i];
        v.raw.duration = durations[video_ids[i]];
        v.raw.features = read_feature_file(feature_path(features_dir, video_ids[i]));
        v.clips = downsample_video(v.raw.features, config.clip_count);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  if (workers == 1) {
    load_range(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(load_range, static_cast<std::size_t>(w));
    for (auto& t : pool) t.join();
  }
  if (!first_error.empty()) throw Error("data-model", first_error);

  std::vector<GroundingSample> samples;
  std::size_t rejected = 0;
  std::map<std::string, int> ordinal;
  std::size_t video_cursor = 0;
  for (auto& p : lines) {
    while ((*videos)[video_cursor].raw.id != p.video_id) ++video_cursor;
    const double duration = (*videos)[video_cursor].raw.duration;
    if (!(p.duration > 0.0) || !(p.query.start >= 0.0 && p.query.start < p.query.end && p.query.end <= duration)) {
      ++rejected;
      log::warn("rejecting annotation line " + std::to_string(p.line_no) + " for video " + p.video_id +
                ": segment [" + std::to_string(p.query.start) + ", " + std::to_string(p.query.end) +
                ") invalid for duration " + std::to_string(duration));
      continue;
    }
    GroundingSample s;
    s.id = p.video_id + "#" + std::to_string(ordinal[p.video_id]++);
    s.video = video_cursor;
    s.clip_segment = map_timestamps(p.query.start, p.query.end, duration, config.clip_count);
    s.query = std::move(p.query);
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(videos), std::move(samples), config.clip_count, rejected);
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& features_dir,
                   const std::filesystem::path& annotations_file) {
  std::filesystem::create_directories(features_dir);
  if (annotations_file.has_parent_path()) std::filesystem::create_directories(annotations_file.parent_path());
  std::set<std::size_t> used;
  for (const auto& s : dataset.samples()) used.insert(s.video);
  for (std::size_t v : used) {
    const auto& video = dataset.videos()[v];
    write_feature_file(feature_path(features_dir, video.raw.id), video.raw.features);
  }
  std::ofstream out(annotations_file, std::ios::trunc);
  if (!out) throw Error("data-model", "cannot write annotation file " + annotations_file.string());
  for (const auto& s : dataset.samples()) {
    const auto& video = dataset.video_of(s);
    nlohmann::ordered_json j;
    j["video_id"] = video.raw.id;
    j["duration"] = video.raw.duration;
    j["tokens"] = s.query.tokens;
    std::vector<std::string> pos;
    for (PosTag t : s.query.pos) pos.emplace_back(to_string(t));
    j["pos"] = pos;
    j["start"] = s.query.start;
    j["end"] = s.query.end;
    out << j.dump() << '\n';
  }
}

WordCounts noun_verb_frequencies(const Dataset& dataset) {
  WordCounts counts;
  for (const auto& s : dataset.samples()) {
    for (std::size_t i = 0; i < s.query.tokens.size(); ++i) {
      if (s.query.pos[i] == PosTag::kNoun || s.query.pos[i] == PosTag::kVerb) ++counts[s.query.tokens[i]];
    }
  }
  return counts;
}

bool is_rare(const QueryAnnotation& query, const WordCounts& train_counts, int threshold) {
  for (std::size_t i = 0; i < query.tokens.size(); ++i) {
    if (query.pos[i] != PosTag::kNoun && query.pos[i] != PosTag::kVerb) continue;
    auto it = train_counts.find(query.tokens[i]);
    const int count = it == train_counts.end() ? 0 : it->second;
    if (count < threshold) return true;
  }
  return false;
}

std::pair<Dataset, Dataset> split_rare_common(const Dataset& dataset, const WordCounts& train_counts,
                                              int threshold) {
  std::vector<std::size_t> rare;
  std::vector<std::size_t> common;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (is_rare(dataset[i].query, train_counts, threshold) ? rare : common).push_back(i);
  }
  return {dataset.subset(rare), dataset.subset(common)};
}

}  // namespace dtsg
