#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtsg/pos_tagger.hpp"
#include "dtsg/tensor.hpp"

namespace dtsg {

struct RawVideo {
  std::string id;
  double duration = 0.0;   // seconds
  FloatMatrix features;    // T_raw × D_in
};

struct QueryAnnotation {
  std::vector<std::string> tokens;
  std::vector<PosTag> pos;
  double start = 0.0;  // seconds
  double end = 0.0;
};

// Inclusive clip-index span.
struct ClipSpan {
  int start = 0;
  int end = 0;
  friend bool operator==(const ClipSpan&, const ClipSpan&) = default;
};

struct GroundingSample {
  std::string id;          // "<video_id>#<k>", k = ordinal among the video's accepted annotations
  std::size_t video = 0;   // index into Dataset::videos()
  QueryAnnotation query;
  ClipSpan clip_segment;
};

struct VideoEntry {
  RawVideo raw;
  Matrix clips;  // downsampled to the dataset clip count, T × D_in
};

struct DataConfig {
  int clip_count = 64;
  // Feature-file reader threads. 0 = take DTSG_NUM_WORKERS from the
  // environment, defaulting to 1.
  int num_workers = 0;
};

// Immutable after construction. Subsets share video storage.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::shared_ptr<const std::vector<VideoEntry>> videos, std::vector<GroundingSample> samples,
          int clip_count, std::size_t rejected_count = 0);

  const std::vector<VideoEntry>& videos() const { return *videos_; }
  const std::vector<GroundingSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const GroundingSample& operator[](std::size_t i) const { return samples_[i]; }

  int clip_count() const { return clip_count_; }
  std::size_t rejected_count() const { return rejected_count_; }
  Eigen::Index feature_dim() const;

  const VideoEntry& video_of(const GroundingSample& s) const { return (*videos_)[s.video]; }
  std::optional<std::size_t> find_video(const std::string& id) const;
  std::optional<std::size_t> find_sample(const std::string& id) const;

  Dataset subset(const std::vector<std::size_t>& sample_indices) const;

 private:
  std::shared_ptr<const std::vector<VideoEntry>> videos_ = std::make_shared<std::vector<VideoEntry>>();
  std::vector<GroundingSample> samples_;
  std::map<std::string, std::size_t, std::less<>> video_index_;
  std::map<std::string, std::size_t, std::less<>> sample_index_;
  int clip_count_ = 0;
  std::size_t rejected_count_ = 0;
};

// ---- feature files: "DTSG" u32 T_raw u32 D_in, float32 row-major, little-endian ----
FloatMatrix read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const FloatMatrix& features);
std::filesystem::path feature_path(const std::filesystem::path& features_dir, const std::string& video_id);

// Reads every annotation line, validates it, loads the referenced feature files
// and maps seconds to clip indices. Invalid segments are skipped with a warning;
// a missing feature file throws.
Dataset load_dataset(const std::filesystem::path& features_dir, const std::filesystem::path& annotations_file,
                     const DataConfig& config, const PosTagger* fallback_tagger = nullptr);

// Writes one feature file per video and one annotation line per sample in
// sample order.
void write_dataset(const Dataset& dataset, const std::filesystem::path& features_dir,
                   const std::filesystem::path& annotations_file);

// Uniform temporal resampling to exactly `clip_count` rows: bucket means when
// shrinking, nearest-index repetition when growing.
Matrix downsample_video(const FloatMatrix& raw, int clip_count);
Matrix downsample_video(const Matrix& raw, int clip_count);

// Clip t covers [t·d/T, (t+1)·d/T).
ClipSpan map_timestamps(double start, double end, double duration, int clip_count);

using WordCounts = std::map<std::string, int, std::less<>>;

// Counts NOUN and VERB tokens over the queries of `dataset`.
WordCounts noun_verb_frequencies(const Dataset& dataset);

// A sample is rare iff one of its NOUN/VERB tokens has count < threshold.
bool is_rare(const QueryAnnotation& query, const WordCounts& train_counts, int threshold = 10);
std::pair<Dataset, Dataset> split_rare_common(const Dataset& dataset, const WordCounts& train_counts,
                                              int threshold = 10);

}  // namespace dtsg
