#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dtsg/data_model.hpp"
#include "dtsg/layers.hpp"
#include "dtsg/model_config.hpp"

namespace dtsg {

struct PosSets {
  std::vector<std::string> nouns;  // query order
  std::vector<std::string> verbs;
};

PosSets extract_pos_sets(const QueryAnnotation& query);

// True iff the multisets have equal size and differ in exactly one element.
bool single_substitution(std::vector<std::string> a, std::vector<std::string> b);
bool same_multiset(std::vector<std::string> a, std::vector<std::string> b);

// Q' contrasts with Q iff (nouns differ by one substitution and verbs match) or
// (verbs differ by one substitution and nouns match).
bool is_contrastive(const PosSets& a, const PosSets& b);

struct NegativeEntry {
  std::vector<std::string> neg_videos;   // video ids, sorted, unique
  std::vector<std::string> neg_queries;  // sample ids, sorted
};

class NegativeTable {
 public:
  NegativeTable() = default;

  const NegativeEntry* find(const std::string& sample_id) const;
  void set(const std::string& sample_id, NegativeEntry entry);
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, NegativeEntry, std::less<>>& entries() const { return entries_; }

  void save(const std::filesystem::path& path) const;
  static NegativeTable load(const std::filesystem::path& path);

  friend bool operator==(const NegativeTable& a, const NegativeTable& b);

 private:
  std::map<std::string, NegativeEntry, std::less<>> entries_;
};

inline bool operator==(const NegativeEntry& a, const NegativeEntry& b) {
  return a.neg_videos == b.neg_videos && a.neg_queries == b.neg_queries;
}

// Offline mining over every sample pair. Pairs on the same video are never
// negatives. Groups samples by their (nouns, verbs) key first so the
// comparison runs over distinct keys.
NegativeTable mine_negatives(const Dataset& dataset);

struct NegativeDraw {
  std::optional<std::size_t> video;   // index into dataset.videos()
  std::optional<std::size_t> query;   // index into dataset.samples()
};

// Independent uniform draws from the two lists of `sample_id`.
NegativeDraw sample_negatives(const NegativeTable& table, const Dataset& dataset, const std::string& sample_id,
                              std::mt19937_64& rng);

// g(F) = max_t MLP(F[t])
class MatchScorer {
 public:
  MatchScorer() = default;
  MatchScorer(const ParamScope& scope, const ModelConfig& cfg);

  ag::Var operator()(ag::Graph& g, const ag::Var& features) const;

 private:
  Mlp mlp_;
};

// -log( e^{g⁺} / (e^{g⁺} + Σ e^{g⁻}) ) over the negatives that are present;
// zero when both are absent.
ag::Var sample_loss(ag::Graph& g, const ag::Var& positive, const std::optional<ag::Var>& neg_video,
                    const std::optional<ag::Var>& neg_query);

}  // namespace dtsg
