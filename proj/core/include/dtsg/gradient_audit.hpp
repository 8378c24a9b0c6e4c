#pragma once

#include <string>
#include <vector>

#include "dtsg/model.hpp"
#include "dtsg/training.hpp"

namespace dtsg {

struct TensorAudit {
  std::string name;
  ComponentTag tag = ComponentTag::kBackbone;
  std::size_t size = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  double max_abs_grad = 0.0;  // largest analytic entry, to spot dead tensors
};

struct AuditReport {
  std::vector<TensorAudit> tensors;
  std::size_t total_tensors = 0;  // trainable tensors in the model
  double max_rel_err = 0.0;

  double coverage() const {
    return total_tensors == 0 ? 1.0 : static_cast<double>(tensors.size()) / static_cast<double>(total_tensors);
  }
};

// Relative error used by the audit: |a - n| / max(|a|, |n|, floor). Below the
// floor, round-off in the differences (about 1e-10 absolute for losses of
// order 1) would dominate.
double relative_error(double analytic, double numeric, double floor = 1e-5);

// Compares the analytic gradient of the total loss over `batch` (fixed
// negative draws) with central differences (f(θ+ε) - f(θ-ε)) / 2ε for every
// scalar of every parameter tensor. Values cut by detach() are frozen at their
// unperturbed values on the numeric side.
AuditReport gradient_audit(GroundingModel& model, const Dataset& dataset, const std::vector<std::size_t>& batch,
                           const std::vector<NegativeDraw>& draws, const TrainConfig& cfg, double eps = 1e-5);

}  // namespace dtsg
