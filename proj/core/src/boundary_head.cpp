#include "dtsg/boundary_head.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dtsg/error.hpp"

namespace dtsg {
namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double bce(double logit, double label) {
  const double sp = logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return sp - label * logit;
}

}  // namespace

BoundaryHead::BoundaryHead(const ParamScope& scope, int dim)
    : start_lstm_(scope.sub("start_lstm"), dim, dim),
      end_lstm_(scope.sub("end_lstm"), dim, dim),
      start_score_(scope.sub("start_score"), 2 * dim, 1),
      end_score_(scope.sub("end_score"), 2 * dim, 1) {}

BoundaryHead::Logits BoundaryHead::operator()(ag::Graph& g, const ag::Var& features) const {
  if (features.rows() < 1) throw Error("boundary-head", "need at least one clip");
  ag::Var hs = start_lstm_(g, features);
  ag::Var he = end_lstm_(g, features);
  const std::array<ag::Var, 2> s_in{features, hs};
  const std::array<ag::Var, 2> e_in{features, he};
  return {start_score_(g, ag::concat_cols(s_in)), end_score_(g, ag::concat_cols(e_in))};
}

BoundaryScores to_scores(const BoundaryHead::Logits& logits) {
  BoundaryScores s;
  const auto& a = logits.start.value();
  const auto& b = logits.end.value();
  s.start.assign(a.data(), a.data() + a.size());
  s.end.assign(b.data(), b.data() + b.size());
  return s;
}

Matrix boundary_labels(int clip_count, int index, int radius) {
  if (index < 0 || index >= clip_count) throw Error("boundary-head", "ground-truth index out of range");
  Matrix y = Matrix::Zero(clip_count, 1);
  for (int t = 0; t < clip_count; ++t) {
    const int d = std::abs(t - index);
    if (d <= radius) y(t, 0) = 1.0 - static_cast<double>(d) / (radius + 1);
  }
  return y;
}

ag::Var tsg_loss(const BoundaryHead::Logits& logits, const ClipSpan& gt, HeadLoss kind, int label_radius) {
  const int t_count = static_cast<int>(logits.start.rows());
  if (gt.start < 0 || gt.start > gt.end || gt.end >= t_count) throw Error("boundary-head", "invalid ground truth");
  if (kind == HeadLoss::kSoftmax) {
    return ag::scale(ag::add(ag::softmax_cross_entropy(logits.start, gt.start),
                             ag::softmax_cross_entropy(logits.end, gt.end)),
                     0.5);
  }
  ag::Var ls = ag::bce_with_logits_mean(logits.start, boundary_labels(t_count, gt.start, label_radius));
  ag::Var le = ag::bce_with_logits_mean(logits.end, boundary_labels(t_count, gt.end, label_radius));
  return ag::scale(ag::add(ls, le), 0.5);
}

double tsg_loss_value(const BoundaryScores& scores, const ClipSpan& gt) {
  const std::size_t t_count = scores.start.size();
  double total = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    total += bce(scores.start[t], static_cast<int>(t) == gt.start ? 1.0 : 0.0);
    total += bce(scores.end[t], static_cast<int>(t) == gt.end ? 1.0 : 0.0);
  }
  return total / (2.0 * static_cast<double>(t_count));
}

std::vector<SegmentCandidate> decode_top_n(const BoundaryScores& scores, int n, std::optional<int> max_len) {
  if (n < 1) throw Error("boundary-head", "n must be >= 1");
  const int t_count = static_cast<int>(scores.start.size());
  if (static_cast<int>(scores.end.size()) != t_count) throw Error("boundary-head", "start/end length mismatch");
  std::vector<double> ps(t_count);
  std::vector<double> pe(t_count);
  for (int t = 0; t < t_count; ++t) {
    ps[t] = sigmoid(scores.start[t]);
    pe[t] = sigmoid(scores.end[t]);
  }
  std::vector<SegmentCandidate> all;
  all.reserve(static_cast<std::size_t>(t_count) * (t_count + 1) / 2);
  for (int s = 0; s < t_count; ++s) {
    for (int e = s; e < t_count; ++e) {
      if (max_len && e - s >= *max_len) break;
      all.push_back({s, e, ps[s] + pe[e]});
    }
  }
  auto better = [](const SegmentCandidate& a, const SegmentCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  };
  const std::size_t keep = std::min(all.size(), static_cast<std::size_t>(n));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return all;
}

double interval_iou(double s1, double e1, double s2, double e2) {
  const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  const double uni = std::max(e1, e2) - std::min(s1, s2);
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou(const ClipSpan& a, const ClipSpan& b) { return interval_iou(a.start, a.end + 1.0, b.start, b.end + 1.0); }

}  // namespace dtsg
