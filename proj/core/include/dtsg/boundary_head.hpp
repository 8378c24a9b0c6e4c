#pragma once

#include <optional>
#include <vector>

#include "dtsg/data_model.hpp"
#include "dtsg/layers.hpp"
#include "dtsg/model_config.hpp"

namespace dtsg {

struct BoundaryScores {
  std::vector<double> start;  // C^s, one logit per clip
  std::vector<double> end;    // C^e
};

struct SegmentCandidate {
  int start = 0;
  int end = 0;
  double score = 0.0;
};

// Two left-to-right LSTMs; each clip's logit reads [f_t; h_t].
class BoundaryHead {
 public:
  struct Logits {
    ag::Var start;  // T × 1
    ag::Var end;    // T × 1
  };

  BoundaryHead() = default;
  BoundaryHead(const ParamScope& scope, int dim);

  Logits operator()(ag::Graph& g, const ag::Var& features) const;

 private:
  Lstm start_lstm_;
  Lstm end_lstm_;
  Linear start_score_;
  Linear end_score_;
};

BoundaryScores to_scores(const BoundaryHead::Logits& logits);

// Per-clip targets: 1 at `index`, decaying linearly to 0 over `radius` clips.
Matrix boundary_labels(int clip_count, int index, int radius = 0);

// (1/2T) Σ_t [CE(C^s_t) + CE(C^e_t)] with sigmoid BCE per clip (kBce), or the
// mean of two T-way softmax cross-entropies (kSoftmax).
ag::Var tsg_loss(const BoundaryHead::Logits& logits, const ClipSpan& gt, HeadLoss kind = HeadLoss::kBce,
                 int label_radius = 0);
double tsg_loss_value(const BoundaryScores& scores, const ClipSpan& gt);

// Top-n (s, e) pairs with s <= e (and e - s < max_len when set), scored by
// sigmoid(C^s_s) + sigmoid(C^e_e). Ties go to smaller s, then smaller e.
std::vector<SegmentCandidate> decode_top_n(const BoundaryScores& scores, int n,
                                           std::optional<int> max_len = std::nullopt);

// Intersection over union of half-open intervals [s, e).
double interval_iou(double s1, double e1, double s2, double e2);
// Clip spans are inclusive, so they cover [s, e + 1).
double iou(const ClipSpan& a, const ClipSpan& b);

}  // namespace dtsg
