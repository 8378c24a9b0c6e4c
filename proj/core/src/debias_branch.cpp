#include "dtsg/debias_branch.hpp"

#include <cmath>

#include "dtsg/error.hpp"

namespace dtsg {

VideoBiasedModel::VideoBiasedModel(const ParamScope& scope, const ModelConfig& cfg)
    : video_(scope.sub("video_encoder"), cfg),
      projection_(scope.sub("video_projection"), cfg.d_model, cfg.d_model),
      head_(scope.sub("head"), cfg.d_model) {}

VideoBiasedModel::Output VideoBiasedModel::operator()(ag::Graph& g, const Matrix& clips) const {
  ag::Var f = projection_(g, video_(g, clips));
  return {f, head_(g, f)};
}

PosBiasedModel::PosBiasedModel(const ParamScope& scope, const ModelConfig& cfg)
    : video_(scope.sub("video_encoder"), cfg),
      query_(scope.sub("query_encoder"), cfg),
      cross_(scope.sub("cross_modal"), cfg),
      head_(scope.sub("head"), cfg.d_model) {}

PosBiasedModel::Output PosBiasedModel::operator()(ag::Graph& g, const Matrix& clips,
                                                  const EncodedQuery& pos_query) const {
  ag::Var f = cross_(g, video_(g, clips), query_(g, pos_query), pos_query.mask);
  return {f, head_(g, f)};
}

std::vector<std::string> filter_by_pos(const QueryAnnotation& query, PosTag which) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < query.tokens.size() && i < query.pos.size(); ++i) {
    if (query.pos[i] == which) out.push_back(query.tokens[i]);
  }
  return out;
}

ag::Var identify_bias(ag::Graph& g, const ag::Var& biased, const Mlp& gate) {
  return ag::mul(biased, ag::sigmoid(gate(g, biased)));
}

FusedBias fuse_bias(ag::Graph& g, std::span<const ag::Var> gated, const Mlp& fusion, const Mask& stream_mask) {
  if (gated.empty()) throw Error("debias-branch", "fuse_bias needs at least one stream");
  const Eigen::Index dim = gated[0].cols();
  for (const auto& s : gated) {
    if (s.rows() != gated[0].rows() || s.cols() != dim) throw Error("debias-branch", "bias streams differ in shape");
  }
  ag::Var weights = ag::row_softmax(fusion(g, ag::concat_cols(gated)), stream_mask);
  ag::Var fused;
  for (std::size_t i = 0; i < gated.size(); ++i) {
    if (!stream_mask.empty() && stream_mask[i] == 0) continue;
    // Broadcast column i of m across D features.
    ag::Var w = ag::matmul(ag::slice_cols(weights, static_cast<Eigen::Index>(i), 1), g.constant(Matrix::Ones(1, dim)));
    ag::Var term = ag::mul(w, gated[i]);
    fused = fused.valid() ? ag::add(fused, term) : term;
  }
  return {weights, fused};
}

ag::Var debias(const ag::Var& features, const ag::Var& fused_bias) { return ag::sub(features, fused_bias); }

double cosine_score(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 && nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb + 1e-8);
}

ag::Var feature_contrastive_loss(const ag::Var& features, const ag::Var& debiased, const ag::Var& fused_bias,
                                 double temperature) {
  ag::Var pos = ag::cosine_rows(features, debiased);
  ag::Var neg = ag::cosine_rows(features, fused_bias);
  // -log(e^a / (e^a + e^b)) = softplus(b - a)
  return ag::mean(ag::softplus(ag::scale(ag::sub(neg, pos), 1.0 / temperature)));
}

BiasIdentification::BiasIdentification(const ParamScope& scope, const ModelConfig& cfg, int streams) {
  for (int i = 0; i < streams; ++i) {
    gates_.emplace_back(scope.sub("gate" + std::to_string(i + 1)), cfg.d_model, cfg.mlp_hidden, cfg.d_model);
  }
  fusion_ = Mlp(scope.sub("fusion"), streams * cfg.d_model, cfg.mlp_hidden, streams);
}

DebiasedModule::DebiasedModule(const ParamScope& scope, const ModelConfig& cfg)
    : mlp_(scope.sub("mlp"), cfg.d_model, cfg.d_model), head_(scope.sub("head"), cfg.d_model) {}

BoundaryHead::Logits DebiasedModule::operator()(ag::Graph& g, const ag::Var& debiased) const {
  return head_(g, ag::relu(mlp_(g, debiased)));
}

}  // namespace dtsg
