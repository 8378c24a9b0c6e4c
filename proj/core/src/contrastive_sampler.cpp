#include "dtsg/contrastive_sampler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "dtsg/error.hpp"

namespace dtsg {

PosSets extract_pos_sets(const QueryAnnotation& query) {
  PosSets out;
  for (std::size_t i = 0; i < query.tokens.size() && i < query.pos.size(); ++i) {
    if (query.pos[i] == PosTag::kNoun) out.nouns.push_back(query.tokens[i]);
    if (query.pos[i] == PosTag::kVerb) out.verbs.push_back(query.tokens[i]);
  }
  return out;
}

bool same_multiset(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool single_substitution(std::vector<std::string> a, std::vector<std::string> b) {
  if (a.size() != b.size() || a.empty()) return false;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string> only_a;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
  return only_a.size() == 1;
}

bool is_contrastive(const PosSets& a, const PosSets& b) {
  const bool noun_swap = single_substitution(a.nouns, b.nouns) && same_multiset(a.verbs, b.verbs);
  const bool verb_swap = single_substitution(a.verbs, b.verbs) && same_multiset(a.nouns, b.nouns);
  return noun_swap || verb_swap;
}

const NegativeEntry* NegativeTable::find(const std::string& sample_id) const {
  auto it = entries_.find(sample_id);
  return it == entries_.end() ? nullptr : &it->second;
}

void NegativeTable::set(const std::string& sample_id, NegativeEntry entry) { entries_[sample_id] = std::move(entry); }

void NegativeTable::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, e] : entries_) {
    j[id] = {{"neg_videos", e.neg_videos}, {"neg_queries", e.neg_queries}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("contrastive-sampler", "cannot write negative table " + path.string());
  out << j.dump() << '\n';
}

NegativeTable NegativeTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("contrastive-sampler", "cannot open negative table " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("contrastive-sampler", path.string() + ": " + e.what());
  }
  NegativeTable t;
  for (auto it = j.begin(); it != j.end(); ++it) {
    NegativeEntry e;
    e.neg_videos = it.value().at("neg_videos").get<std::vector<std::string>>();
    e.neg_queries = it.value().at("neg_queries").get<std::vector<std::string>>();
    t.entries_.emplace(it.key(), std::move(e));
  }
  return t;
}

bool operator==(const NegativeTable& a, const NegativeTable& b) { return a.entries_ == b.entries_; }

NegativeTable mine_negatives(const Dataset& dataset) {
  // Canonical key: sorted nouns | sorted verbs.
  struct Key {
    std::vector<std::string> nouns;
    std::vector<std::string> verbs;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    PosSets p = extract_pos_sets(dataset[i].query);
    std::sort(p.nouns.begin(), p.nouns.end());
    std::sort(p.verbs.begin(), p.verbs.end());
    groups[Key{std::move(p.nouns), std::move(p.verbs)}].push_back(i);
  }
  std::vector<const Key*> keys;
  std::vector<const std::vector<std::size_t>*> members;
  for (const auto& [k, m] : groups) {
    keys.push_back(&k);
    members.push_back(&m);
  }

  std::vector<std::set<std::string>> videos(dataset.size());
  std::vector<std::set<std::string>> queries(dataset.size());
  for (std::size_t a = 0; a < keys.size(); ++a) {
    for (std::size_t b = a + 1; b < keys.size(); ++b) {
      if (!is_contrastive({keys[a]->nouns, keys[a]->verbs}, {keys[b]->nouns, keys[b]->verbs})) continue;
      for (std::size_t i : *members[a]) {
        for (std::size_t j : *members[b]) {
          if (dataset[i].video == dataset[j].video) continue;
          const auto& vid_i = dataset.video_of(dataset[i]).raw.id;
          const auto& vid_j = dataset.video_of(dataset[j]).raw.id;
          videos[i].insert(vid_j);
          queries[i].insert(dataset[j].id);
          videos[j].insert(vid_i);
          queries[j].insert(dataset[i].id);
        }
      }
    }
  }

  NegativeTable table;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    NegativeEntry e;
    e.neg_videos.assign(videos[i].begin(), videos[i].end());
    e.neg_queries.assign(queries[i].begin(), queries[i].end());
    table.set(dataset[i].id, std::move(e));
  }
  return table;
}

NegativeDraw sample_negatives(const NegativeTable& table, const Dataset& dataset, const std::string& sample_id,
                              std::mt19937_64& rng) {
  NegativeDraw draw;
  const NegativeEntry* e = table.find(sample_id);
  if (e == nullptr) return draw;
  if (!e->neg_videos.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, e->neg_videos.size() - 1);
    const auto& id = e->neg_videos[pick(rng)];
    draw.video = dataset.find_video(id);
    if (!draw.video) throw Error("contrastive-sampler", "negative video " + id + " not in dataset");
  }
  if (!e->neg_queries.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, e->neg_queries.size() - 1);
    const auto& id = e->neg_queries[pick(rng)];
    draw.query = dataset.find_sample(id);
    if (!draw.query) throw Error("contrastive-sampler", "negative query " + id + " not in dataset");
  }
  return draw;
}

MatchScorer::MatchScorer(const ParamScope& scope, const ModelConfig& cfg)
    : mlp_(scope.sub("align"), cfg.d_model, cfg.mlp_hidden, 1) {}

ag::Var MatchScorer::operator()(ag::Graph& g, const ag::Var& features) const {
  return ag::max_rows(mlp_(g, features));
}

ag::Var sample_loss(ag::Graph& g, const ag::Var& positive, const std::optional<ag::Var>& neg_video,
                    const std::optional<ag::Var>& neg_query) {
  if (!neg_video && !neg_query) return g.constant(Matrix::Zero(1, 1));
  std::vector<ag::Var> logits{positive};
  if (neg_video) logits.push_back(*neg_video);
  if (neg_query) logits.push_back(*neg_query);
  return ag::neg_log_softmax_first(ag::concat_cols(logits));
}

}  // namespace dtsg
