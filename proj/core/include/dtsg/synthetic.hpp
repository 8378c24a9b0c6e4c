#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dtsg/config.hpp"
#include "dtsg/data_model.hpp"

namespace dtsg {

// Parameters of a bias-planted grounding corpus. Every video holds a target
// event, a few distractor events and one high-norm "salient" event; the
// salient event sits on the target window with probability
// train_correlation in train/val and test_correlation in test. The last
// rare_pair_budget nouns are held out of ordinary sampling and each appears
// in exactly one rare (noun, verb) pair with fewer than 10 train samples.
struct SyntheticSpec {
  int num_nouns = 60;
  int num_verbs = 30;
  double zipf_exponent = 1.2;
  int rare_pair_budget = 20;
  int rare_min_count = 2;
  int rare_max_count = 9;
  double salience_boost = 3.0;
  double train_correlation = 0.9;
  double test_correlation = 0.1;
  int clip_count = 32;
  int feature_dim = 64;
  int train_size = 2000;
  int val_size = 200;
  int test_size = 400;
  // Share of test samples drawn from the designated rare pairs.
  double test_rare_fraction = 0.3;
  int events_per_video = 3;
  // Probability that a distractor shares the target's noun or verb.
  double hard_distractor_prob = 0.5;
  int min_event_len = 3;
  int max_event_len = 8;
  double noise_std = 0.3;
  double min_duration = 30.0;
  double max_duration = 120.0;
  // Width of the emitted word vectors (0 = none). Each noun/verb vector is a
  // fixed random linear image of its visual prototype plus noise, standing in
  // for pre-trained vectors that carry meaning for words seen rarely.
  int word_vector_dim = 0;
  double word_vector_noise = 0.1;
  std::uint64_t seed = 7;

  static SyntheticSpec from_config(const FlatConfig& cfg);
  FlatConfig to_config() const;
  // Throws ConfigError when the spec cannot be realized.
  void validate() const;
};

struct SyntheticCorpus {
  Dataset train;
  Dataset val;
  Dataset test;
  // (noun index, verb index) of each designated rare pair, with its train count.
  std::vector<std::pair<int, int>> rare_pairs;
  std::vector<int> rare_pair_counts;
  // Clip span of the salient event in each sample's video, per split.
  std::vector<ClipSpan> train_salient;
  std::vector<ClipSpan> val_salient;
  std::vector<ClipSpan> test_salient;
  // Row k of word_vectors belongs to word_tokens[k].
  std::vector<std::string> word_tokens;
  Matrix word_vectors;
};

std::string synthetic_noun(int index);
std::string synthetic_verb(int index);

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// JSON-lines {"token": ..., "vec": [...]}, the format load_word_vectors reads.
void write_word_vectors(const SyntheticCorpus& corpus, const std::filesystem::path& path);

}  // namespace dtsg
