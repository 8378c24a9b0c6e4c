#pragma once

#include <utility>

#include "dtsg/layers.hpp"
#include "dtsg/model_config.hpp"

namespace dtsg {

// Intermediate matrices of one co-attention pass (values only).
struct InteractionTrace {
  Matrix S;    // T × M similarity
  Matrix S_r;  // row softmax over valid query positions
  Matrix S_c;  // column softmax over clips
  Matrix A;    // T × D
  Matrix B;    // T × D
  Matrix F;    // T × D
};

// S = V (Q W_S)^T, optionally divided by sqrt(D).
ag::Var similarity(const ag::Var& video, const ag::Var& projected_query, bool scaled = false);

// A = S_r (Q W_S), B = S_r S_c^T V. Pad columns of S are excluded from both
// softmaxes.
std::pair<ag::Var, ag::Var> coattend(const ag::Var& sim, const ag::Var& video, const ag::Var& projected_query,
                                     const Mask& query_mask, InteractionTrace* trace = nullptr);

class CrossModal {
 public:
  CrossModal() = default;
  CrossModal(const ParamScope& scope, const ModelConfig& cfg);

  ag::Var project_query(ag::Graph& g, const ag::Var& query) const;
  // F = FFN([V; A; V⊙A; V⊙B])
  ag::Var fuse(ag::Graph& g, const ag::Var& video, const ag::Var& a, const ag::Var& b) const;

  // Full interaction: video T×D, query M×D -> F T×D.
  ag::Var operator()(ag::Graph& g, const ag::Var& video, const ag::Var& query, const Mask& query_mask,
                     InteractionTrace* trace = nullptr) const;

  Parameter& w_s() const { return *w_s_; }

 private:
  bool scaled_ = false;
  Parameter* w_s_ = nullptr;
  Linear ffn_in_;
  Linear ffn_out_;
};

}  // namespace dtsg
