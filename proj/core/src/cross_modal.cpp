#include "dtsg/cross_modal.hpp"

#include <array>
#include <cmath>

#include "dtsg/error.hpp"

namespace dtsg {

ag::Var similarity(const ag::Var& video, const ag::Var& projected_query, bool scaled) {
  if (video.cols() != projected_query.cols()) throw Error("cross-modal", "video and query widths differ");
  ag::Var s = ag::matmul(video, ag::transpose(projected_query));
  if (scaled) s = ag::scale(s, 1.0 / std::sqrt(static_cast<double>(video.cols())));
  return s;
}

std::pair<ag::Var, ag::Var> coattend(const ag::Var& sim, const ag::Var& video, const ag::Var& projected_query,
                                     const Mask& query_mask, InteractionTrace* trace) {
  if (sim.rows() != video.rows() || sim.cols() != projected_query.rows()) {
    throw Error("cross-modal", "similarity shape does not match inputs");
  }
  ag::Var s_r = ag::row_softmax(sim, query_mask);
  ag::Var s_c = ag::col_softmax(sim, query_mask);
  ag::Var a = ag::matmul(s_r, projected_query);
  ag::Var b = ag::matmul(s_r, ag::matmul(ag::transpose(s_c), video));
  if (trace != nullptr) {
    trace->S = sim.value();
    trace->S_r = s_r.value();
    trace->S_c = s_c.value();
    trace->A = a.value();
    trace->B = b.value();
  }
  return {a, b};
}

CrossModal::CrossModal(const ParamScope& scope, const ModelConfig& cfg)
    : scaled_(cfg.coattention_scaled),
      w_s_(&scope.add("W_S", xavier_uniform(cfg.d_model, cfg.d_model, scope.rng))),
      ffn_in_(scope.sub("ffn1"), 4 * cfg.d_model, cfg.d_model),
      ffn_out_(scope.sub("ffn2"), cfg.d_model, cfg.d_model) {}

ag::Var CrossModal::project_query(ag::Graph& g, const ag::Var& query) const {
  return ag::matmul(query, g.parameter(*w_s_));
}

ag::Var CrossModal::fuse(ag::Graph& g, const ag::Var& video, const ag::Var& a, const ag::Var& b) const {
  if (a.rows() != video.rows() || b.rows() != video.rows() || a.cols() != video.cols() || b.cols() != video.cols()) {
    throw Error("cross-modal", "fuse inputs must all be T x D");
  }
  const std::array<ag::Var, 4> parts{video, a, ag::mul(video, a), ag::mul(video, b)};
  return ffn_out_(g, ag::relu(ffn_in_(g, ag::concat_cols(parts))));
}

ag::Var CrossModal::operator()(ag::Graph& g, const ag::Var& video, const ag::Var& query, const Mask& query_mask,
                               InteractionTrace* trace) const {
  if (video.cols() != query.cols()) throw Error("cross-modal", "video and query widths differ");
  ag::Var qp = project_query(g, query);
  ag::Var s = similarity(video, qp, scaled_);
  auto [a, b] = coattend(s, video, qp, query_mask, trace);
  ag::Var f = fuse(g, video, a, b);
  if (trace != nullptr) trace->F = f.value();
  return f;
}

}  // namespace dtsg
