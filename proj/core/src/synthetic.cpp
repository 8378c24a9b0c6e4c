#include "dtsg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include <json.hpp>

#include "dtsg/error.hpp"

namespace dtsg {
namespace {

struct Event {
  int noun = 0;
  int verb = 0;
};

struct Window {
  int start = 0;
  int len = 0;
  bool overlaps(const Window& o) const { return start < o.start + o.len && o.start < start + len; }
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {
    const int d = spec_.feature_dim;
    std::normal_distribution<double> proto(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    auto draw = [&](int rows) {
      Matrix m(rows, d);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = proto(rng_);
      return m;
    };
    noun_protos_ = draw(spec_.num_nouns);
    verb_protos_ = draw(spec_.num_verbs);
    salient_proto_ = draw(1);
    // Match the norm of an average (noun + verb) event.
    salient_proto_ *= std::sqrt(2.0) / salient_proto_.norm();

    common_nouns_ = spec_.num_nouns - spec_.rare_pair_budget;
    std::vector<double> nw(static_cast<std::size_t>(common_nouns_));
    for (int k = 0; k < common_nouns_; ++k) nw[k] = 1.0 / std::pow(k + 1.0, spec_.zipf_exponent);
    noun_dist_ = std::discrete_distribution<int>(nw.begin(), nw.end());
    std::vector<double> vw(static_cast<std::size_t>(spec_.num_verbs));
    for (int k = 0; k < spec_.num_verbs; ++k) vw[k] = 1.0 / std::pow(k + 1.0, spec_.zipf_exponent);
    verb_dist_ = std::discrete_distribution<int>(vw.begin(), vw.end());

    std::uniform_int_distribution<int> verb_any(0, spec_.num_verbs - 1);
    std::uniform_int_distribution<int> count(spec_.rare_min_count, spec_.rare_max_count);
    for (int r = 0; r < spec_.rare_pair_budget; ++r) {
      rare_pairs_.push_back({common_nouns_ + r, verb_any(rng_)});
      rare_counts_.push_back(count(rng_));
    }

    if (spec_.word_vector_dim > 0) {
      const int w = spec_.word_vector_dim;
      // Norm-preserving on average: a unit prototype maps to a vector of norm about 1.
      std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(static_cast<double>(w)));
      std::normal_distribution<double> jitter(0.0, spec_.word_vector_noise / std::sqrt(static_cast<double>(w)));
      Matrix map(d, w);
      for (Eigen::Index i = 0; i < map.size(); ++i) map.data()[i] = entry(rng_);
      auto emit = [&](const Matrix& protos, auto name) {
        for (Eigen::Index k = 0; k < protos.rows(); ++k) {
          RowVector v = protos.row(k) * map;
          for (Eigen::Index c = 0; c < v.size(); ++c) v(c) += jitter(rng_);
          word_tokens_.push_back(name(static_cast<int>(k)));
          word_rows_.push_back(v);
        }
      };
      emit(noun_protos_, synthetic_noun);
      emit(verb_protos_, synthetic_verb);
    }
  }

  SyntheticCorpus run() {
    SyntheticCorpus corpus;
    // Train: every rare pair at its budgeted count, the rest from the Zipf mix.
    std::vector<Event> train_queries;
    for (std::size_t r = 0; r < rare_pairs_.size(); ++r) {
      for (int c = 0; c < rare_counts_[r]; ++c) train_queries.push_back(rare_pairs_[r]);
    }
    while (static_cast<int>(train_queries.size()) < spec_.train_size) train_queries.push_back(common_event());
    std::shuffle(train_queries.begin(), train_queries.end(), rng_);
    corpus.train = build("train", train_queries, spec_.train_correlation, corpus.train_salient);

    std::vector<Event> val_queries;
    for (int i = 0; i < spec_.val_size; ++i) val_queries.push_back(common_event());
    corpus.val = build("val", val_queries, spec_.train_correlation, corpus.val_salient);

    std::vector<Event> test_queries;
    std::bernoulli_distribution take_rare(spec_.test_rare_fraction);
    std::uniform_int_distribution<std::size_t> pick_rare(0, rare_pairs_.empty() ? 0 : rare_pairs_.size() - 1);
    for (int i = 0; i < spec_.test_size; ++i) {
      if (!rare_pairs_.empty() && take_rare(rng_)) {
        test_queries.push_back(rare_pairs_[pick_rare(rng_)]);
      } else {
        test_queries.push_back(common_event());
      }
    }
    corpus.test = build("test", test_queries, spec_.test_correlation, corpus.test_salient);

    for (const auto& e : rare_pairs_) corpus.rare_pairs.emplace_back(e.noun, e.verb);
    corpus.rare_pair_counts = rare_counts_;
    corpus.word_tokens = word_tokens_;
    corpus.word_vectors = Matrix(static_cast<Eigen::Index>(word_rows_.size()), spec_.word_vector_dim);
    for (std::size_t k = 0; k < word_rows_.size(); ++k) corpus.word_vectors.row(static_cast<Eigen::Index>(k)) = word_rows_[k];
    return corpus;
  }

 private:
  Event common_event() { return {noun_dist_(rng_), verb_dist_(rng_)}; }

  bool is_rare_pair(const Event& e) const {
    return std::any_of(rare_pairs_.begin(), rare_pairs_.end(),
                       [&](const Event& r) { return r.noun == e.noun && r.verb == e.verb; });
  }

  Event distractor_for(const Event& target) {
    std::bernoulli_distribution hard(spec_.hard_distractor_prob);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> any_noun(0, common_nouns_ - 1);
    std::uniform_int_distribution<int> any_verb(0, spec_.num_verbs - 1);
    for (int attempt = 0; attempt < 64; ++attempt) {
      Event e;
      if (hard(rng_)) {
        e = coin(rng_) ? Event{target.noun, any_verb(rng_)} : Event{any_noun(rng_), target.verb};
      } else {
        e = {any_noun(rng_), any_verb(rng_)};
      }
      if ((e.noun != target.noun || e.verb != target.verb) && !is_rare_pair(e)) return e;
    }
    return {(target.noun + 1) % common_nouns_, (target.verb + 1) % spec_.num_verbs};
  }

  std::optional<Window> place(int len, const std::vector<Window>& taken) {
    std::uniform_int_distribution<int> start(0, spec_.clip_count - len);
    for (int attempt = 0; attempt < 100; ++attempt) {
      Window w{start(rng_), len};
      if (std::none_of(taken.begin(), taken.end(), [&](const Window& o) { return w.overlaps(o); })) return w;
    }
    return std::nullopt;
  }

  Dataset build(const std::string& split, const std::vector<Event>& queries, double correlation,
                std::vector<ClipSpan>& salient_spans) {
    const int t_count = spec_.clip_count;
    const int d = spec_.feature_dim;
    std::normal_distribution<double> noise(0.0, spec_.noise_std / std::sqrt(static_cast<double>(d)));
    std::uniform_int_distribution<int> length(spec_.min_event_len, spec_.max_event_len);
    std::uniform_real_distribution<double> duration(spec_.min_duration, spec_.max_duration);
    std::bernoulli_distribution correlated(correlation);

    auto videos = std::make_shared<std::vector<VideoEntry>>();
    std::vector<GroundingSample> samples;
    videos->reserve(queries.size());
    samples.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const Event& target = queries[i];
      Matrix feats(t_count, d);
      for (Eigen::Index k = 0; k < feats.size(); ++k) feats.data()[k] = noise(rng_);

      std::vector<Window> taken;
      const Window target_window = *place(length(rng_), taken);
      taken.push_back(target_window);
      auto paint = [&](const Window& w, const Event& e) {
        for (int t = w.start; t < w.start + w.len; ++t) {
          feats.row(t) += noun_protos_.row(e.noun) + verb_protos_.row(e.verb);
        }
      };
      paint(target_window, target);
      for (int k = 1; k < spec_.events_per_video; ++k) {
        const Event e = distractor_for(target);
        if (auto w = place(length(rng_), taken)) {
          taken.push_back(*w);
          paint(*w, e);
        }
      }

      Window salient = target_window;
      if (!correlated(rng_)) {
        if (auto w = place(target_window.len, {target_window})) salient = *w;
      }
      for (int t = salient.start; t < salient.start + salient.len; ++t) {
        feats.row(t) += spec_.salience_boost * salient_proto_.row(0);
      }
      salient_spans.push_back({salient.start, salient.start + salient.len - 1});

      char id[64];
      std::snprintf(id, sizeof(id), "%s_%05zu", split.c_str(), i);
      VideoEntry v;
      v.raw.id = id;
      v.raw.duration = duration(rng_);
      v.raw.features = feats.cast<float>();
      v.clips = v.raw.features.cast<double>();
      const double per_clip = v.raw.duration / t_count;

      GroundingSample s;
      s.id = v.raw.id + "#0";
      s.video = i;
      s.query.tokens = {"someone", synthetic_verb(target.verb), "the", synthetic_noun(target.noun)};
      s.query.pos = {PosTag::kOther, PosTag::kVerb, PosTag::kOther, PosTag::kNoun};
      // Quarter-clip offsets keep the seconds->clip mapping away from bucket edges.
      s.query.start = (target_window.start + 0.25) * per_clip;
      s.query.end = (target_window.start + target_window.len - 0.25) * per_clip;
      s.clip_segment = map_timestamps(s.query.start, s.query.end, v.raw.duration, t_count);
      videos->push_back(std::move(v));
      samples.push_back(std::move(s));
    }
    return Dataset(std::move(videos), std::move(samples), t_count, 0);
  }

  const SyntheticSpec& spec_;
  std::mt19937_64 rng_;
  Matrix noun_protos_;
  Matrix verb_protos_;
  Matrix salient_proto_;
  int common_nouns_ = 0;
  std::discrete_distribution<int> noun_dist_;
  std::discrete_distribution<int> verb_dist_;
  std::vector<Event> rare_pairs_;
  std::vector<int> rare_counts_;
  std::vector<std::string> word_tokens_;
  std::vector<RowVector> word_rows_;
};

}  // namespace

std::string synthetic_noun(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "noun%02d", index);
  return buf;
}

std::string synthetic_verb(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "verb%02d", index);
  return buf;
}

SyntheticSpec SyntheticSpec::from_config(const FlatConfig& cfg) {
  SyntheticSpec s;
  s.num_nouns = static_cast<int>(cfg.get_int("num_nouns", s.num_nouns));
  s.num_verbs = static_cast<int>(cfg.get_int("num_verbs", s.num_verbs));
  s.zipf_exponent = cfg.get_double("zipf_exponent", s.zipf_exponent);
  s.rare_pair_budget = static_cast<int>(cfg.get_int("rare_pair_budget", s.rare_pair_budget));
  s.rare_min_count = static_cast<int>(cfg.get_int("rare_min_count", s.rare_min_count));
  s.rare_max_count = static_cast<int>(cfg.get_int("rare_max_count", s.rare_max_count));
  s.salience_boost = cfg.get_double("salience_boost", s.salience_boost);
  s.train_correlation = cfg.get_double("train_correlation", s.train_correlation);
  s.test_correlation = cfg.get_double("test_correlation", s.test_correlation);
  s.clip_count = static_cast<int>(cfg.get_int("clip_count", s.clip_count));
  s.feature_dim = static_cast<int>(cfg.get_int("feature_dim", s.feature_dim));
  s.train_size = static_cast<int>(cfg.get_int("train_size", s.train_size));
  s.val_size = static_cast<int>(cfg.get_int("val_size", s.val_size));
  s.test_size = static_cast<int>(cfg.get_int("test_size", s.test_size));
  s.test_rare_fraction = cfg.get_double("test_rare_fraction", s.test_rare_fraction);
  s.events_per_video = static_cast<int>(cfg.get_int("events_per_video", s.events_per_video));
  s.hard_distractor_prob = cfg.get_double("hard_distractor_prob", s.hard_distractor_prob);
  s.min_event_len = static_cast<int>(cfg.get_int("min_event_len", s.min_event_len));
  s.max_event_len = static_cast<int>(cfg.get_int("max_event_len", s.max_event_len));
  s.noise_std = cfg.get_double("noise_std", s.noise_std);
  s.min_duration = cfg.get_double("min_duration", s.min_duration);
  s.max_duration = cfg.get_double("max_duration", s.max_duration);
  s.word_vector_dim = static_cast<int>(cfg.get_int("word_vector_dim", s.word_vector_dim));
  s.word_vector_noise = cfg.get_double("word_vector_noise", s.word_vector_noise);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(s.seed)));
  return s;
}

FlatConfig SyntheticSpec::to_config() const {
  FlatConfig c;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  c.set("num_nouns", std::to_string(num_nouns));
  c.set("num_verbs", std::to_string(num_verbs));
  c.set("zipf_exponent", num(zipf_exponent));
  c.set("rare_pair_budget", std::to_string(rare_pair_budget));
  c.set("rare_min_count", std::to_string(rare_min_count));
  c.set("rare_max_count", std::to_string(rare_max_count));
  c.set("salience_boost", num(salience_boost));
  c.set("train_correlation", num(train_correlation));
  c.set("test_correlation", num(test_correlation));
  c.set("clip_count", std::to_string(clip_count));
  c.set("feature_dim", std::to_string(feature_dim));
  c.set("train_size", std::to_string(train_size));
  c.set("val_size", std::to_string(val_size));
  c.set("test_size", std::to_string(test_size));
  c.set("test_rare_fraction", num(test_rare_fraction));
  c.set("events_per_video", std::to_string(events_per_video));
  c.set("hard_distractor_prob", num(hard_distractor_prob));
  c.set("min_event_len", std::to_string(min_event_len));
  c.set("max_event_len", std::to_string(max_event_len));
  c.set("noise_std", num(noise_std));
  c.set("min_duration", num(min_duration));
  c.set("max_duration", num(max_duration));
  c.set("word_vector_dim", std::to_string(word_vector_dim));
  c.set("word_vector_noise", num(word_vector_noise));
  c.set("seed", std::to_string(seed));
  return c;
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synthetic", msg); };
  if (num_nouns < 1 || num_verbs < 1) fail("num_nouns and num_verbs must be >= 1");
  if (rare_pair_budget < 0) fail("rare_pair_budget must be >= 0");
  if (rare_pair_budget >= num_nouns) {
    fail("rare_pair_budget " + std::to_string(rare_pair_budget) + " leaves no common nouns (num_nouns = " +
         std::to_string(num_nouns) + ")");
  }
  if (rare_min_count < 1 || rare_min_count > rare_max_count) fail("need 1 <= rare_min_count <= rare_max_count");
  if (rare_max_count >= 10) fail("rare_max_count must be < 10 so rare pairs stay under the rarity threshold");
  if (static_cast<long long>(rare_pair_budget) * rare_max_count > train_size) {
    fail("rare pairs at rare_max_count do not fit in train_size");
  }
  if (salience_boost < 0.0) fail("salience_boost must be >= 0");
  for (double c : {train_correlation, test_correlation, test_rare_fraction, hard_distractor_prob}) {
    if (c < 0.0 || c > 1.0) fail("correlations and fractions must lie in [0, 1]");
  }
  if (train_correlation == test_correlation) fail("train and test correlation must differ");
  if (clip_count < 1 || feature_dim < 1) fail("clip_count and feature_dim must be >= 1");
  if (min_event_len < 1 || min_event_len > max_event_len) fail("need 1 <= min_event_len <= max_event_len");
  if (2 * max_event_len > clip_count) fail("clip_count must hold two disjoint events of max_event_len");
  if (events_per_video < 1) fail("events_per_video must be >= 1");
  if (train_size < 1 || val_size < 0 || test_size < 0) fail("corpus sizes must be positive");
  if (!(min_duration > 0.0) || min_duration > max_duration) fail("need 0 < min_duration <= max_duration");
  if (noise_std < 0.0) fail("noise_std must be >= 0");
  if (word_vector_dim < 0 || word_vector_noise < 0.0) fail("word_vector_dim and word_vector_noise must be >= 0");
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

void write_word_vectors(const SyntheticCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("synthetic", "cannot write " + path.string());
  for (std::size_t k = 0; k < corpus.word_tokens.size(); ++k) {
    nlohmann::json j;
    j["token"] = corpus.word_tokens[k];
    const RowVector v = corpus.word_vectors.row(static_cast<Eigen::Index>(k));
    j["vec"] = std::vector<double>(v.data(), v.data() + v.size());
    out << j.dump() << '\n';
  }
  if (!out) throw Error("synthetic", "write failed for " + path.string());
}

}  // namespace dtsg
