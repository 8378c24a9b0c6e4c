#pragma once

#include <filesystem>
#include <vector>

#include "dtsg/layers.hpp"
#include "dtsg/model_config.hpp"
#include "dtsg/vocabulary.hpp"

namespace dtsg {

// Per-head attention weights of one forward pass, block-major.
struct AttentionTrace {
  std::vector<Matrix> weights;
};

// Sinusoidal position table, rows = positions.
Matrix positional_encoding(int length, int dim);

// Post-norm transformer block: LN(x + MHA(x)), then LN(y + FFN(y)).
class SelfAttentionBlock {
 public:
  SelfAttentionBlock() = default;
  SelfAttentionBlock(const ParamScope& scope, int dim, int heads, int ffn_dim);

  // Masked key positions receive exactly zero attention weight; throws if every
  // position is masked.
  ag::Var operator()(ag::Graph& g, const ag::Var& x, const Mask& mask, AttentionTrace* trace = nullptr) const;

  int heads() const { return heads_; }

 private:
  int heads_ = 1;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear output_;
  LayerNorm norm1_;
  Mlp ffn_;
  LayerNorm norm2_;
};

class VideoEncoder {
 public:
  VideoEncoder() = default;
  VideoEncoder(const ParamScope& scope, const ModelConfig& cfg);

  // clips: T × D_in -> V: T × D
  ag::Var operator()(ag::Graph& g, const Matrix& clips, AttentionTrace* trace = nullptr) const;

 private:
  int feature_dim_ = 0;
  bool positional_ = true;
  Linear input_;
  std::vector<SelfAttentionBlock> blocks_;
};

class QueryEncoder {
 public:
  QueryEncoder() = default;
  QueryEncoder(const ParamScope& scope, const ModelConfig& cfg);

  // -> Q: M × D
  ag::Var operator()(ag::Graph& g, const EncodedQuery& query, AttentionTrace* trace = nullptr) const;

  Parameter& embedding() const { return *embedding_; }

 private:
  bool positional_ = true;
  Parameter* embedding_ = nullptr;
  std::optional<Linear> projection_;
  std::vector<SelfAttentionBlock> blocks_;
};

// Reads {"token": str, "vec": [float...]} lines and overwrites the matching
// rows of the embedding table. Returns the number of rows replaced.
int load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, Parameter& table);

}  // namespace dtsg
