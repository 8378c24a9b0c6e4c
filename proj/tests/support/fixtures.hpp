#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dtsg/data_model.hpp"
#include "dtsg/model_config.hpp"
#include "dtsg/pos_tagger.hpp"

namespace dtsg::testing {

// "person/NOUN holding/VERB the/OTHER vacuum/NOUN"
inline QueryAnnotation tagged_query(const std::string& text, double start = 0.0, double end = 1.0) {
  QueryAnnotation q;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    const auto slash = word.rfind('/');
    q.tokens.push_back(word.substr(0, slash));
    q.pos.push_back(parse_pos_tag(word.substr(slash + 1)));
  }
  q.start = start;
  q.end = end;
  return q;
}

struct SampleSpec {
  int video = 0;
  std::string query;  // tagged form
  ClipSpan span;
};

// Random N(0,1) clip features; sample ids follow the loader's "<video>#k".
inline Dataset make_dataset(int num_videos, int clips, int feature_dim, const std::vector<SampleSpec>& specs,
                            std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto videos = std::make_shared<std::vector<VideoEntry>>();
  for (int v = 0; v < num_videos; ++v) {
    VideoEntry e;
    e.raw.id = "vid" + std::to_string(v);
    e.raw.duration = static_cast<double>(clips);
    e.clips = Matrix(clips, feature_dim);
    for (Eigen::Index i = 0; i < e.clips.size(); ++i) e.clips.data()[i] = normal(rng);
    e.raw.features = e.clips.cast<float>();
    videos->push_back(std::move(e));
  }
  std::vector<int> ordinal(static_cast<std::size_t>(num_videos), 0);
  std::vector<GroundingSample> samples;
  for (const auto& s : specs) {
    GroundingSample g;
    g.video = static_cast<std::size_t>(s.video);
    g.id = (*videos)[g.video].raw.id + "#" + std::to_string(ordinal[g.video]++);
    g.query = tagged_query(s.query, s.span.start, s.span.end + 1.0);
    g.clip_segment = s.span;
    samples.push_back(std::move(g));
  }
  return Dataset(videos, std::move(samples), clips);
}

// The small float64 configuration used by gradient checks.
inline ModelConfig tiny_model_config(int feature_dim) {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.d_model = 16;
  c.heads = 2;
  c.ffn_dim = 16;
  c.depth = 1;
  c.mlp_hidden = 8;
  c.max_query_len = 5;
  return c;
}

}  // namespace dtsg::testing
