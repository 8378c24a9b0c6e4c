#include "dtsg/model.hpp"

#include <array>

#include "dtsg/error.hpp"

namespace dtsg {

void LossToggles::validate() const {
  if ((debias || contras) && !any_bias()) {
    throw ConfigError("training-engine", "loss.debias / loss.contras need at least one biased model enabled");
  }
}

GroundingModel::GroundingModel(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed, bool with_branch)
    : config_(cfg), vocab_(std::move(vocab)) {
  config_.vocab_size = vocab_.size();
  config_.validate();
  std::mt19937_64 rng(seed);
  {
    ParamScope s{params_, "backbone", ComponentTag::kBackbone, rng};
    backbone_.video = VideoEncoder(s.sub("video_encoder"), config_);
    backbone_.query = QueryEncoder(s.sub("query_encoder"), config_);
    backbone_.cross = CrossModal(s.sub("cross_modal"), config_);
    backbone_.head = BoundaryHead(s.sub("head"), config_.d_model);
  }
  if (!with_branch) return;
  DebiasBranch b;
  b.model1 = VideoBiasedModel({params_, "bias1", ComponentTag::kBias1, rng}, config_);
  b.model2 = PosBiasedModel({params_, "bias2", ComponentTag::kBias2, rng}, config_);
  b.model3 = PosBiasedModel({params_, "bias3", ComponentTag::kBias3, rng}, config_);
  b.bim = BiasIdentification({params_, "bim", ComponentTag::kBim, rng}, config_, 3);
  b.debiased = DebiasedModule({params_, "debiased_module", ComponentTag::kDebiasedModule, rng}, config_);
  b.scorer = MatchScorer({params_, "sampler", ComponentTag::kSampler, rng}, config_);
  branch_ = std::move(b);
}

EncodedQuery GroundingModel::encode(const std::vector<std::string>& tokens) const {
  return vocab_.encode(tokens, config_.max_query_len);
}

int GroundingModel::load_word_vectors(const std::filesystem::path& path) {
  const int replaced = dtsg::load_word_vectors(path, vocab_, backbone_.query.embedding());
  if (branch_) {
    dtsg::load_word_vectors(path, vocab_, branch_->model2.query().embedding());
    dtsg::load_word_vectors(path, vocab_, branch_->model3.query().embedding());
  }
  return replaced;
}

ag::Var GroundingModel::features(ag::Graph& g, const Matrix& clips, const EncodedQuery& query,
                                 InteractionTrace* trace) const {
  ag::Var v = backbone_.video(g, clips);
  ag::Var q = backbone_.query(g, query);
  return backbone_.cross(g, v, q, query.mask, trace);
}

BoundaryScores GroundingModel::predict_scores(const Matrix& clips, const QueryAnnotation& query,
                                              std::vector<const Parameter*>* touched) const {
  ag::Graph g(false);
  BoundaryScores scores = to_scores(head(g, features(g, clips, encode(query.tokens))));
  if (touched != nullptr) *touched = g.touched();
  return scores;
}

LossTerms GroundingModel::loss_terms(ag::Graph& g, const Dataset& dataset, std::size_t index,
                                     const NegativeDraw& draw, const LossToggles& toggles,
                                     BiasBundle* bundle) const {
  toggles.validate();
  const GroundingSample& sample = dataset[index];
  const Matrix& clips = dataset.video_of(sample).clips;
  const ClipSpan gt = sample.clip_segment;
  const HeadLoss kind = config_.head_loss;
  const int radius = config_.label_radius;

  if (!branch_ && (toggles.uses_branch() || toggles.sample)) {
    throw Error("training-engine", "model was built without the debiasing branch");
  }

  LossTerms out;
  const EncodedQuery query = encode(sample.query.tokens);
  ag::Var video = backbone_.video(g, clips);
  ag::Var f = backbone_.cross(g, video, backbone_.query(g, query), query.mask);
  out.tsg = tsg_loss(backbone_.head(g, f), gt, kind, radius);

  if (toggles.sample && (draw.video || draw.query)) {
    const DebiasBranch& b = *branch_;
    std::optional<ag::Var> neg_video;
    std::optional<ag::Var> neg_query;
    if (draw.video) {
      neg_video = b.scorer(g, features(g, dataset.videos().at(*draw.video).clips, query));
    }
    if (draw.query) {
      const EncodedQuery other = encode(dataset[*draw.query].query.tokens);
      neg_query = b.scorer(g, backbone_.cross(g, video, backbone_.query(g, other), other.mask));
    }
    out.sample = sample_loss(g, b.scorer(g, f), neg_video, neg_query);
  }

  if (!toggles.uses_branch()) return out;
  const DebiasBranch& b = *branch_;

  std::vector<ag::Var> gated;
  Mask stream_mask;
  const std::array<bool, 3> active{toggles.bias1, toggles.bias2, toggles.bias3};
  for (int i = 0; i < 3; ++i) {
    if (!active[static_cast<std::size_t>(i)]) {
      gated.push_back(g.constant(Matrix::Zero(f.rows(), f.cols())));
      stream_mask.push_back(0);
      continue;
    }
    ag::Var raw;
    BoundaryHead::Logits logits;
    if (i == 0) {
      auto o = b.model1(g, clips);
      raw = o.features;
      logits = o.logits;
    } else {
      const PosTag which = i == 1 ? PosTag::kNoun : PosTag::kVerb;
      const EncodedQuery pos_query = encode(filter_by_pos(sample.query, which));
      auto o = (i == 1 ? b.model2 : b.model3)(g, clips, pos_query);
      raw = o.features;
      logits = o.logits;
    }
    ag::Var loss = tsg_loss(logits, gt, kind, radius);
    (i == 0 ? out.bias1 : i == 1 ? out.bias2 : out.bias3) = loss;
    gated.push_back(identify_bias(g, raw, b.bim.gate(i)));
    stream_mask.push_back(1);
    if (bundle != nullptr) {
      bundle->raw.push_back(raw.value());
      bundle->gated.push_back(gated.back().value());
    }
  }

  FusedBias fused = fuse_bias(g, gated, b.bim.fusion(), stream_mask);
  if (toggles.debias) {
    ag::Var base = config_.detach_debias_input ? ag::detach(f) : f;
    out.debias = tsg_loss(b.debiased(g, debias(base, fused.fused)), gt, kind, radius);
  }
  ag::Var debiased = debias(f, fused.fused);
  if (toggles.contras) {
    if (config_.detach_contrast_bias) {
      const ag::Var bias = ag::detach(fused.fused);
      out.contras = feature_contrastive_loss(f, debias(f, bias), bias, config_.contrast_temperature);
    } else {
      out.contras = feature_contrastive_loss(f, debiased, fused.fused, config_.contrast_temperature);
    }
  }
  if (bundle != nullptr) {
    bundle->weights = fused.weights.value();
    bundle->fused = fused.fused.value();
    bundle->debiased = debiased.value();
  }
  return out;
}

}  // namespace dtsg
