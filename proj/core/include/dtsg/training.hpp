#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dtsg/config.hpp"
#include "dtsg/contrastive_sampler.hpp"
#include "dtsg/model.hpp"

namespace dtsg {

struct TrainConfig {
  double lambda1 = 1.0;  // L_contras weight
  double lambda2 = 1.0;  // L_sample weight
  int epochs = 100;
  int batch_size = 8;
  double lr = 4e-4;
  double clip_norm = 1.0;
  int patience = 10;  // epochs without val improvement; 0 disables early stopping
                     // and best-epoch restore
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool recall_inclusive = false;  // IoU >= m instead of > m for the val metric
  LossToggles toggles;

  static TrainConfig from_config(const FlatConfig& cfg);
  void write_to(FlatConfig& cfg) const;
  void validate() const;
};

// L = L_TSG + L_bias1 + L_bias2 + L_bias3 + L_debias + λ1 L_contras + λ2 L_sample.
// Throws naming the first non-finite part.
double total_loss(const LossParts& parts, double lambda1, double lambda2);
ag::Var total_loss(const LossTerms& terms, double lambda1, double lambda2);
LossParts loss_values(const LossTerms& terms);

// lr0 (1 - epoch / epochs), floored at 0.
double learning_rate(double lr0, int epoch, int epochs);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_gradients(ParamStore& params, double max_norm);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, double lr);
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t steps) { steps_ = steps; }

 private:
  double beta1_;
  double beta2_;
  double eps_;
  std::int64_t steps_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  LossParts loss;  // means over samples
  double total = 0.0;
  double val_r1_03 = 0.0;
  double val_r1_05 = 0.0;
  double val_r1_07 = 0.0;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  std::string rng_state;
  double best_val = -1.0;
  int best_epoch = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  TrainState state;
  bool early_stopped = false;
};

struct TrainHooks {
  std::filesystem::path log_csv;  // empty = no log
  // Called after every epoch with the current parameters; the CLI writes a
  // checkpoint here so a later divergence leaves the last good one behind.
  std::function<void(const GroundingModel&, const TrainState&)> on_epoch;
};

// Mini-batch training with Adam, global-norm clipping and linear lr decay.
// With a non-empty validation set and patience > 0, early-stops on val
// R@1,IoU=0.5 and restores the best epoch's parameters.
TrainResult train(GroundingModel& model, const Dataset& train_set, const Dataset& val_set,
                  const NegativeTable* negatives, const TrainConfig& cfg, const TrainHooks& hooks = {});

// One optimizer update on the given samples, negatives drawn from `rng`.
// Returns the mean total loss before the update.
double train_step(GroundingModel& model, Adam& adam, const Dataset& dataset, const std::vector<std::size_t>& batch,
                  const NegativeTable* negatives, const TrainConfig& cfg, double lr, std::mt19937_64& rng,
                  LossParts* parts = nullptr);

// Mean total loss of a batch with fixed negative draws, no gradients.
double batch_loss(const GroundingModel& model, const Dataset& dataset, const std::vector<std::size_t>& batch,
                  const std::vector<NegativeDraw>& draws, const TrainConfig& cfg);

}  // namespace dtsg
