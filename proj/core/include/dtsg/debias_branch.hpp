#pragma once

#include <span>
#include <vector>

#include "dtsg/boundary_head.hpp"
#include "dtsg/cross_modal.hpp"
#include "dtsg/encoders.hpp"

namespace dtsg {

// Biased model 1: sees the video only. Its own encoder, a video-only
// projection and its own boundary head.
class VideoBiasedModel {
 public:
  struct Output {
    ag::Var features;  // F_bias_1, T × D
    BoundaryHead::Logits logits;
  };

  VideoBiasedModel() = default;
  VideoBiasedModel(const ParamScope& scope, const ModelConfig& cfg);

  Output operator()(ag::Graph& g, const Matrix& clips) const;

 private:
  VideoEncoder video_;
  Linear projection_;
  BoundaryHead head_;
};

// Biased models 2 and 3: the backbone architecture fed a query reduced to its
// nouns (or verbs).
class PosBiasedModel {
 public:
  struct Output {
    ag::Var features;  // F_bias_i, T × D
    BoundaryHead::Logits logits;
  };

  PosBiasedModel() = default;
  PosBiasedModel(const ParamScope& scope, const ModelConfig& cfg);

  Output operator()(ag::Graph& g, const Matrix& clips, const EncodedQuery& pos_query) const;

  const QueryEncoder& query() const { return query_; }

 private:
  VideoEncoder video_;
  QueryEncoder query_;
  CrossModal cross_;
  BoundaryHead head_;
};

// Tokens of `query` tagged `which`, in order. May be empty.
std::vector<std::string> filter_by_pos(const QueryAnnotation& query, PosTag which);

// F̂ = F_bias ⊙ sigmoid(MLP(F_bias))
ag::Var identify_bias(ag::Graph& g, const ag::Var& biased, const Mlp& gate);

struct FusedBias {
  ag::Var weights;  // m, T × K (row-stochastic)
  ag::Var fused;    // F̃_bias, T × D
};

// Per clip: m_t = softmax(MLP([F̂^1_t; ...; F̂^K_t])), F̃_t = Σ_i m_t[i] F̂^i_t.
// Streams with stream_mask[i] == 0 (ablated biased models) get zero weight;
// an empty mask enables all streams.
FusedBias fuse_bias(ag::Graph& g, std::span<const ag::Var> gated, const Mlp& fusion, const Mask& stream_mask = {});

// F_debiased = F - F̃_bias
ag::Var debias(const ag::Var& features, const ag::Var& fused_bias);

// Cosine similarity with eps = 1e-8 in the denominator; 0 for two zero vectors.
double cosine_score(const RowVector& a, const RowVector& b);

// -(1/T) Σ_t log( e^{s⁺_t/τ} / (e^{s⁺_t/τ} + e^{s⁻_t/τ}) ), s⁺ = cos(f_t, f_debiased,t),
// s⁻ = cos(f_t, f̃_bias,t).
ag::Var feature_contrastive_loss(const ag::Var& features, const ag::Var& debiased, const ag::Var& fused_bias,
                                 double temperature = 1.0);

// Bias identification gates (one per stream) and the fusion MLP.
class BiasIdentification {
 public:
  BiasIdentification() = default;
  BiasIdentification(const ParamScope& scope, const ModelConfig& cfg, int streams);

  const Mlp& gate(int stream) const { return gates_.at(static_cast<std::size_t>(stream)); }
  const Mlp& fusion() const { return fusion_; }
  int streams() const { return static_cast<int>(gates_.size()); }

 private:
  std::vector<Mlp> gates_;
  Mlp fusion_;
};

// MLP(D→D) + boundary head, supervised on F_debiased.
class DebiasedModule {
 public:
  DebiasedModule() = default;
  DebiasedModule(const ParamScope& scope, const ModelConfig& cfg);

  BoundaryHead::Logits operator()(ag::Graph& g, const ag::Var& debiased) const;

 private:
  Linear mlp_;
  BoundaryHead head_;
};

}  // namespace dtsg
