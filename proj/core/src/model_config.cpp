#include "dtsg/model_config.hpp"

#include <cstdio>

#include "dtsg/error.hpp"

namespace dtsg {

ModelConfig ModelConfig::from_config(const FlatConfig& cfg) { return from_config(cfg, ModelConfig{}); }

ModelConfig ModelConfig::from_config(const FlatConfig& cfg, ModelConfig d) {
  ModelConfig m = d;
  m.feature_dim = static_cast<int>(cfg.get_int("model.feature_dim", d.feature_dim));
  m.d_model = static_cast<int>(cfg.get_int("model.d_model", d.d_model));
  m.heads = static_cast<int>(cfg.get_int("model.heads", d.heads));
  m.ffn_dim = static_cast<int>(cfg.get_int("model.ffn_dim", d.ffn_dim));
  m.depth = static_cast<int>(cfg.get_int("model.depth", d.depth));
  m.mlp_hidden = static_cast<int>(cfg.get_int("model.mlp_hidden", d.mlp_hidden));
  m.max_query_len = static_cast<int>(cfg.get_int("model.max_query_len", d.max_query_len));
  m.embed_dim = static_cast<int>(cfg.get_int("model.embed_dim", d.embed_dim));
  m.freeze_word_vectors = cfg.get_bool("model.freeze_word_vectors", d.freeze_word_vectors);
  m.vocab_size = static_cast<int>(cfg.get_int("model.vocab_size", d.vocab_size));
  m.positional_encoding = cfg.get_bool("model.positional_encoding", d.positional_encoding);
  m.coattention_scaled = cfg.get_bool("model.coattention_scaled", d.coattention_scaled);
  const std::string loss = cfg.get_string("head.loss", d.head_loss == HeadLoss::kBce ? "bce" : "softmax");
  if (loss == "bce") {
    m.head_loss = HeadLoss::kBce;
  } else if (loss == "softmax") {
    m.head_loss = HeadLoss::kSoftmax;
  } else {
    throw ConfigError("config", "head.loss must be bce or softmax, got " + loss);
  }
  m.label_radius = static_cast<int>(cfg.get_int("head.label_radius", d.label_radius));
  m.contrast_temperature = cfg.get_double("debias.temperature", d.contrast_temperature);
  m.detach_debias_input = cfg.get_bool("debias.detach_input", d.detach_debias_input);
  m.detach_contrast_bias = cfg.get_bool("debias.detach_contrast_bias", d.detach_contrast_bias);
  m.validate();
  return m;
}

void ModelConfig::write_to(FlatConfig& cfg) const {
  char buf[64];
  cfg.set("model.feature_dim", std::to_string(feature_dim));
  cfg.set("model.d_model", std::to_string(d_model));
  cfg.set("model.heads", std::to_string(heads));
  cfg.set("model.ffn_dim", std::to_string(ffn_dim));
  cfg.set("model.depth", std::to_string(depth));
  cfg.set("model.mlp_hidden", std::to_string(mlp_hidden));
  cfg.set("model.max_query_len", std::to_string(max_query_len));
  cfg.set("model.embed_dim", std::to_string(embed_dim));
  cfg.set("model.freeze_word_vectors", freeze_word_vectors ? "true" : "false");
  cfg.set("model.vocab_size", std::to_string(vocab_size));
  cfg.set("model.positional_encoding", positional_encoding ? "true" : "false");
  cfg.set("model.coattention_scaled", coattention_scaled ? "true" : "false");
  cfg.set("head.loss", head_loss == HeadLoss::kBce ? "bce" : "softmax");
  cfg.set("head.label_radius", std::to_string(label_radius));
  std::snprintf(buf, sizeof(buf), "%.17g", contrast_temperature);
  cfg.set("debias.temperature", buf);
  cfg.set("debias.detach_input", detach_debias_input ? "true" : "false");
  cfg.set("debias.detach_contrast_bias", detach_contrast_bias ? "true" : "false");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config", m); };
  if (feature_dim < 1 || d_model < 1 || heads < 1 || ffn_dim < 1 || depth < 1 || mlp_hidden < 1) {
    fail("model dimensions must be >= 1");
  }
  if (d_model % heads != 0) fail("model.d_model must be divisible by model.heads");
  if (max_query_len < 1) fail("model.max_query_len must be >= 1");
  if (vocab_size < 3) fail("model.vocab_size must cover the reserved tokens");
  if (label_radius < 0) fail("head.label_radius must be >= 0");
  if (!(contrast_temperature > 0.0)) fail("debias.temperature must be > 0");
}

}  // namespace dtsg
