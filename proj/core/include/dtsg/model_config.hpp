#pragma once

#include <optional>

#include "dtsg/config.hpp"

namespace dtsg {

enum class HeadLoss { kBce, kSoftmax };

struct ModelConfig {
  int feature_dim = 64;   // D_in of the clip features
  int d_model = 32;       // D
  int heads = 2;
  int ffn_dim = 64;       // encoder feed-forward width
  int depth = 1;          // self-attention blocks per encoder
  int mlp_hidden = 32;    // hidden width of gate / fusion / scorer MLPs
  int max_query_len = 20; // M
  int embed_dim = 0;      // word-vector width; 0 = d_model (no projection)
  bool freeze_word_vectors = false;  // keep the embedding tables at their loaded values
  int vocab_size = 3;
  bool positional_encoding = true;
  bool coattention_scaled = false;  // divide similarity by sqrt(D)
  HeadLoss head_loss = HeadLoss::kBce;
  int label_radius = 0;             // neighbourhood label smoothing radius
  double contrast_temperature = 1.0;
  bool detach_debias_input = true;  // stop L_debias from reaching F
  bool detach_contrast_bias = false;  // L_contras moves F only, not F̃_bias

  int word_dim() const { return embed_dim > 0 ? embed_dim : d_model; }

  static ModelConfig from_config(const FlatConfig& cfg, ModelConfig defaults);
  static ModelConfig from_config(const FlatConfig& cfg);
  void write_to(FlatConfig& cfg) const;
  void validate() const;
};

}  // namespace dtsg
