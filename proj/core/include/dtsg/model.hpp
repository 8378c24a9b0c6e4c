#pragma once

#include <filesystem>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dtsg/boundary_head.hpp"
#include "dtsg/contrastive_sampler.hpp"
#include "dtsg/cross_modal.hpp"
#include "dtsg/data_model.hpp"
#include "dtsg/debias_branch.hpp"
#include "dtsg/encoders.hpp"
#include "dtsg/vocabulary.hpp"

namespace dtsg {

// Which auxiliary losses take part in training. A biased model whose loss is
// off is also removed from the bias fusion.
struct LossToggles {
  bool bias1 = true;
  bool bias2 = true;
  bool bias3 = true;
  bool debias = true;
  bool contras = true;
  bool sample = true;

  bool any_bias() const { return bias1 || bias2 || bias3; }
  bool uses_branch() const { return any_bias() || debias || contras; }
  static LossToggles backbone_only() { return {false, false, false, false, false, false}; }
  void validate() const;
};

// Values of every loss component for one forward pass (0 when disabled).
struct LossParts {
  double tsg = 0.0;
  double bias1 = 0.0;
  double bias2 = 0.0;
  double bias3 = 0.0;
  double debias = 0.0;
  double contras = 0.0;
  double sample = 0.0;
};

// Graph nodes for the loss components of one sample. Disabled parts are
// invalid Vars.
struct LossTerms {
  ag::Var tsg;
  ag::Var bias1;
  ag::Var bias2;
  ag::Var bias3;
  ag::Var debias;
  ag::Var contras;
  ag::Var sample;
};

// Intermediate branch tensors of one forward pass, for inspection.
struct BiasBundle {
  std::vector<Matrix> raw;    // F_bias per active stream
  std::vector<Matrix> gated;  // F̂_bias per active stream
  Matrix weights;             // m, T × 3
  Matrix fused;               // F̃_bias
  Matrix debiased;            // F - F̃_bias
};

struct Backbone {
  VideoEncoder video;
  QueryEncoder query;
  CrossModal cross;
  BoundaryHead head;
};

struct DebiasBranch {
  VideoBiasedModel model1;
  PosBiasedModel model2;  // nouns
  PosBiasedModel model3;  // verbs
  BiasIdentification bim;
  DebiasedModule debiased;
  MatchScorer scorer;
};

// The grounding backbone plus, for training, the debiasing branch and the
// sample-level match scorer. Backbone parameters are registered first and
// drawn first from the seed, so a model with and without the branch start
// from the same backbone weights.
class GroundingModel {
 public:
  GroundingModel(const ModelConfig& cfg, Vocabulary vocab, std::uint64_t seed, bool with_branch = true);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool has_branch() const { return branch_.has_value(); }

  EncodedQuery encode(const std::vector<std::string>& tokens) const;

  // Overwrites matching rows of every query embedding table (backbone and
  // POS-biased models) from a word vector file. Returns the rows replaced in
  // the backbone table.
  int load_word_vectors(const std::filesystem::path& path);

  // F for (clips, query) through the backbone, T × D.
  ag::Var features(ag::Graph& g, const Matrix& clips, const EncodedQuery& query,
                   InteractionTrace* trace = nullptr) const;
  BoundaryHead::Logits head(ag::Graph& g, const ag::Var& features) const { return backbone_.head(g, features); }

  // Inference path: backbone only, no gradients. `touched` receives the
  // parameters the forward pass read.
  BoundaryScores predict_scores(const Matrix& clips, const QueryAnnotation& query,
                                std::vector<const Parameter*>* touched = nullptr) const;

  // All enabled loss terms for dataset[index]. Negatives for L_sample come
  // from `draw`; absent negatives drop their term.
  LossTerms loss_terms(ag::Graph& g, const Dataset& dataset, std::size_t index, const NegativeDraw& draw,
                       const LossToggles& toggles, BiasBundle* bundle = nullptr) const;

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParamStore params_;
  Backbone backbone_;
  std::optional<DebiasBranch> branch_;
};

}  // namespace dtsg
