#include "dtsg/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dtsg/error.hpp"
#include "dtsg/evaluation.hpp"
#include "dtsg/log.hpp"

namespace dtsg {

TrainConfig TrainConfig::from_config(const FlatConfig& cfg) {
  TrainConfig t;
  t.lambda1 = cfg.get_double("train.lambda1", t.lambda1);
  t.lambda2 = cfg.get_double("train.lambda2", t.lambda2);
  t.epochs = static_cast<int>(cfg.get_int("train.epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
  t.lr = cfg.get_double("train.lr", t.lr);
  t.clip_norm = cfg.get_double("train.clip_norm", t.clip_norm);
  t.patience = static_cast<int>(cfg.get_int("train.patience", t.patience));
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(t.seed)));
  t.adam_beta1 = cfg.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = cfg.get_double("train.adam_beta2", t.adam_beta2);
  t.adam_eps = cfg.get_double("train.adam_eps", t.adam_eps);
  t.recall_inclusive = cfg.get_bool("eval.inclusive", t.recall_inclusive);
  t.toggles.bias1 = cfg.get_bool("loss.bias1", t.toggles.bias1);
  t.toggles.bias2 = cfg.get_bool("loss.bias2", t.toggles.bias2);
  t.toggles.bias3 = cfg.get_bool("loss.bias3", t.toggles.bias3);
  t.toggles.debias = cfg.get_bool("loss.debias", t.toggles.debias);
  t.toggles.contras = cfg.get_bool("loss.contras", t.toggles.contras);
  t.toggles.sample = cfg.get_bool("loss.sample", t.toggles.sample);
  t.validate();
  return t;
}

void TrainConfig::write_to(FlatConfig& cfg) const {
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  cfg.set("train.lambda1", num(lambda1));
  cfg.set("train.lambda2", num(lambda2));
  cfg.set("train.epochs", std::to_string(epochs));
  cfg.set("train.batch_size", std::to_string(batch_size));
  cfg.set("train.lr", num(lr));
  cfg.set("train.clip_norm", num(clip_norm));
  cfg.set("train.patience", std::to_string(patience));
  cfg.set("train.seed", std::to_string(seed));
  cfg.set("train.adam_beta1", num(adam_beta1));
  cfg.set("train.adam_beta2", num(adam_beta2));
  cfg.set("train.adam_eps", num(adam_eps));
  cfg.set("eval.inclusive", flag(recall_inclusive));
  cfg.set("loss.bias1", flag(toggles.bias1));
  cfg.set("loss.bias2", flag(toggles.bias2));
  cfg.set("loss.bias3", flag(toggles.bias3));
  cfg.set("loss.debias", flag(toggles.debias));
  cfg.set("loss.contras", flag(toggles.contras));
  cfg.set("loss.sample", flag(toggles.sample));
}

void TrainConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("training-engine", "lambda1 and lambda2 must be >= 0");
  if (!(clip_norm > 0)) throw ConfigError("training-engine", "clip_norm must be > 0");
  if (epochs < 1) throw ConfigError("training-engine", "epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("training-engine", "batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("training-engine", "lr must be > 0");
  if (patience < 0) throw ConfigError("training-engine", "patience must be >= 0");
  toggles.validate();
}

namespace {

void check_finite(double v, const char* part) {
  if (!std::isfinite(v)) {
    throw Error("training-engine", std::string("non-finite loss in ") + part + " (value " + std::to_string(v) + ")");
  }
}

}  // namespace

double total_loss(const LossParts& p, double lambda1, double lambda2) {
  check_finite(p.tsg, "L_TSG");
  check_finite(p.bias1, "L_bias1");
  check_finite(p.bias2, "L_bias2");
  check_finite(p.bias3, "L_bias3");
  check_finite(p.debias, "L_debias");
  check_finite(p.contras, "L_contras");
  check_finite(p.sample, "L_sample");
  return p.tsg + p.bias1 + p.bias2 + p.bias3 + p.debias + lambda1 * p.contras + lambda2 * p.sample;
}

LossParts loss_values(const LossTerms& t) {
  auto v = [](const ag::Var& x) { return x.valid() ? x.scalar() : 0.0; };
  return {v(t.tsg), v(t.bias1), v(t.bias2), v(t.bias3), v(t.debias), v(t.contras), v(t.sample)};
}

ag::Var total_loss(const LossTerms& t, double lambda1, double lambda2) {
  total_loss(loss_values(t), lambda1, lambda2);  // finiteness check
  ag::Var sum = t.tsg;
  for (const ag::Var* part : {&t.bias1, &t.bias2, &t.bias3, &t.debias}) {
    if (part->valid()) sum = ag::add(sum, *part);
  }
  if (t.contras.valid() && lambda1 != 0.0) sum = ag::add(sum, ag::scale(t.contras, lambda1));
  if (t.sample.valid() && lambda2 != 0.0) sum = ag::add(sum, ag::scale(t.sample, lambda2));
  return sum;
}

double learning_rate(double lr0, int epoch, int epochs) {
  return std::max(0.0, lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(epochs)));
}

double clip_gradients(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (Parameter* p : params.all()) {
    if (p->trainable) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params.all()) p->grad *= s;
  }
  return norm;
}

void Adam::step(ParamStore& params, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (Parameter* p : params.all()) {
    if (!p->trainable) continue;
    if (p->m.size() != p->value.size()) p->m.setZero(p->value.rows(), p->value.cols());
    if (p->v.size() != p->value.size()) p->v.setZero(p->value.rows(), p->value.cols());
    p->m = beta1_ * p->m + (1.0 - beta1_) * p->grad;
    p->v = beta2_ * p->v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + eps_);
  }
}

namespace {

NegativeDraw draw_for(const NegativeTable* negatives, const Dataset& dataset, std::size_t index, bool enabled,
                      std::mt19937_64& rng) {
  if (!enabled || negatives == nullptr) return {};
  return sample_negatives(*negatives, dataset, dataset[index].id, rng);
}

void accumulate(LossParts& into, const LossParts& p, double w) {
  into.tsg += w * p.tsg;
  into.bias1 += w * p.bias1;
  into.bias2 += w * p.bias2;
  into.bias3 += w * p.bias3;
  into.debias += w * p.debias;
  into.contras += w * p.contras;
  into.sample += w * p.sample;
}

}  // namespace

double train_step(GroundingModel& model, Adam& adam, const Dataset& dataset, const std::vector<std::size_t>& batch,
                  const NegativeTable* negatives, const TrainConfig& cfg, double lr, std::mt19937_64& rng,
                  LossParts* parts) {
  model.params().zero_grad();
  ag::Graph g;
  ag::Var sum;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t index : batch) {
    const NegativeDraw draw = draw_for(negatives, dataset, index, cfg.toggles.sample, rng);
    LossTerms terms = model.loss_terms(g, dataset, index, draw, cfg.toggles);
    if (parts != nullptr) accumulate(*parts, loss_values(terms), 1.0);
    ag::Var total = total_loss(terms, cfg.lambda1, cfg.lambda2);
    sum = sum.valid() ? ag::add(sum, total) : total;
  }
  ag::Var loss = ag::scale(sum, w);
  g.backward(loss);
  clip_gradients(model.params(), cfg.clip_norm);
  adam.step(model.params(), lr);
  return loss.scalar();
}

double batch_loss(const GroundingModel& model, const Dataset& dataset, const std::vector<std::size_t>& batch,
                  const std::vector<NegativeDraw>& draws, const TrainConfig& cfg) {
  ag::Graph g(false);
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LossTerms terms = model.loss_terms(g, dataset, batch[i], draws.at(i), cfg.toggles);
    sum += total_loss(loss_values(terms), cfg.lambda1, cfg.lambda2);
  }
  return sum / static_cast<double>(batch.size());
}

TrainResult train(GroundingModel& model, const Dataset& train_set, const Dataset& val_set,
                  const NegativeTable* negatives, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw Error("training-engine", "empty training set");
  if (cfg.toggles.sample && negatives == nullptr) {
    throw Error("training-engine", "L_sample is enabled but no negative table was given");
  }
  std::ofstream log_file;
  if (!hooks.log_csv.empty()) {
    log_file.open(hooks.log_csv, std::ios::trunc);
    if (!log_file) throw Error("training-engine", "cannot write " + hooks.log_csv.string());
    log_file << "epoch,lr,l_tsg,l_bias1,l_bias2,l_bias3,l_debias,l_contras,l_sample,total,val_r1_iou03,val_r1_iou05,"
                "val_r1_iou07\n";
    log_file.precision(8);
  }

  std::mt19937_64 rng(cfg.seed ^ 0x5eedc0ffee123457ULL);
  Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  TrainResult result;
  std::vector<Matrix> best_values;
  int bad_epochs = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const RecallOptions recall_opts{cfg.recall_inclusive};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg.lr, epoch, cfg.epochs);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      train_step(model, adam, train_set, batch, negatives, cfg, lr, rng, &rec.loss);
    }
    const double inv_n = 1.0 / static_cast<double>(train_set.size());
    LossParts mean;
    accumulate(mean, rec.loss, inv_n);
    rec.loss = mean;
    rec.total = total_loss(mean, cfg.lambda1, cfg.lambda2);

    bool improved = false;
    if (!val_set.empty()) {
      const auto preds = predict(model, val_set, 1);
      std::vector<ClipSpan> gts;
      for (const auto& s : val_set.samples()) gts.push_back(s.clip_segment);
      rec.val_r1_03 = recall_at(preds, gts, 1, 0.3, recall_opts);
      rec.val_r1_05 = recall_at(preds, gts, 1, 0.5, recall_opts);
      rec.val_r1_07 = recall_at(preds, gts, 1, 0.7, recall_opts);
      improved = rec.val_r1_05 > result.state.best_val;
    }
    result.history.push_back(rec);
    result.state.epoch = epoch + 1;
    result.state.step = adam.steps();
    {
      std::ostringstream s;
      s << rng;
      result.state.rng_state = s.str();
    }
    if (improved) {
      result.state.best_val = rec.val_r1_05;
      result.state.best_epoch = epoch + 1;
      best_values.clear();
      for (const Parameter* p : model.params().all()) best_values.push_back(p->value);
      bad_epochs = 0;
    } else {
      ++bad_epochs;
    }
    if (log_file) {
      const auto& l = rec.loss;
      log_file << rec.epoch << ',' << rec.lr << ',' << l.tsg << ',' << l.bias1 << ',' << l.bias2 << ',' << l.bias3
               << ',' << l.debias << ',' << l.contras << ',' << l.sample << ',' << rec.total << ','
               << rec.val_r1_03 << ',' << rec.val_r1_05 << ',' << rec.val_r1_07 << '\n';
      log_file.flush();
    }
    log::info("epoch " + std::to_string(rec.epoch) + " loss " + std::to_string(rec.total) + " val R@1,0.5 " +
              std::to_string(rec.val_r1_05));
    if (hooks.on_epoch) hooks.on_epoch(model, result.state);
    if (!val_set.empty() && cfg.patience > 0 && bad_epochs >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }

  // Only early stopping selects by validation; a fixed-length run keeps its
  // final weights.
  if (cfg.patience > 0 && !best_values.empty()) {
    auto params = model.params().all();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  return result;
}

}  // namespace dtsg
