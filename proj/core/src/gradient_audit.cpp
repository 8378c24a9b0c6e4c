#include "dtsg/gradient_audit.hpp"

#include <algorithm>
#include <cmath>

#include "dtsg/error.hpp"

namespace dtsg {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

AuditReport gradient_audit(GroundingModel& model, const Dataset& dataset, const std::vector<std::size_t>& batch,
                           const std::vector<NegativeDraw>& draws, const TrainConfig& cfg, double eps) {
  if (batch.size() != draws.size()) throw Error("training-engine", "one negative draw per audited sample");
  auto objective = [&](ag::Graph& g) {
    ag::Var sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ag::Var t = total_loss(model.loss_terms(g, dataset, batch[i], draws[i], cfg.toggles), cfg.lambda1, cfg.lambda2);
      sum = sum.valid() ? ag::add(sum, t) : t;
    }
    return ag::scale(sum, 1.0 / static_cast<double>(batch.size()));
  };
  // Detached tensors are held at their base values in the perturbed passes so
  // the numeric side differentiates the same stop-gradient objective.
  std::vector<Matrix> frozen;
  model.params().zero_grad();
  {
    ag::Graph g;
    g.record_detached(&frozen);
    g.backward(objective(g));
  }
  auto evaluate = [&] {
    ag::Graph g(false);
    g.replay_detached(&frozen);
    return objective(g).scalar();
  };

  AuditReport report;
  std::vector<Parameter*> params;
  for (Parameter* p : model.params().all()) {
    if (p->trainable) params.push_back(p);
  }
  report.total_tensors = params.size();
  for (Parameter* p : params) {
    TensorAudit t{p->name, p->tag, p->size(), 0.0, 0.0, 0.0};
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + eps;
      const double plus = evaluate();
      x = saved - eps;
      const double minus = evaluate();
      x = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = p->grad.data()[k];
      t.max_rel_err = std::max(t.max_rel_err, relative_error(analytic, numeric));
      t.max_abs_err = std::max(t.max_abs_err, std::abs(analytic - numeric));
      t.max_abs_grad = std::max(t.max_abs_grad, std::abs(analytic));
    }
    report.max_rel_err = std::max(report.max_rel_err, t.max_rel_err);
    report.tensors.push_back(std::move(t));
  }
  return report;
}

}  // namespace dtsg
