#include "dtsg_tools/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dtsg/checkpoint.hpp"
#include "dtsg/error.hpp"
#include "dtsg/evaluation.hpp"
#include "dtsg/log.hpp"
#include "dtsg/pos_tagger.hpp"
#include "dtsg/synthetic.hpp"
#include "dtsg/training.hpp"
#include "dtsg_tools/ablation.hpp"

namespace dtsg::tools {
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cli", "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cli", "cannot write " + p.string());
  out << text;
}

void prepare_out(const RunOptions& opts, const FlatConfig& cfg) {
  fs::create_directories(opts.out);
  write_text(opts.out / "effective_config.cfg", cfg.dump());
}

void warn_unused(const FlatConfig& cfg) {
  for (const auto& k : cfg.unused_keys()) log::warn("config key '" + k + "' was not used by this command");
}

fs::path required_path(const FlatConfig& cfg, const std::string& key) {
  const std::string v = cfg.get_string(key, "");
  if (v.empty()) throw ConfigError("cli", "missing config key " + key);
  return v;
}

DataConfig data_config(const FlatConfig& cfg, const RunOptions& opts) {
  DataConfig d;
  d.clip_count = static_cast<int>(cfg.get_int("data.clip_count", d.clip_count));
  d.num_workers = opts.deterministic ? 1 : static_cast<int>(cfg.get_int("data.num_workers", 0));
  if (d.clip_count < 1) throw ConfigError("cli", "data.clip_count must be >= 1");
  return d;
}

Dataset load_split(const FlatConfig& cfg, const RunOptions& opts, const std::string& split) {
  const RuleBasedTagger tagger;
  Dataset d = load_dataset(required_path(cfg, "data.features"), required_path(cfg, "data." + split),
                           data_config(cfg, opts), &tagger);
  log::info("loaded " + std::to_string(d.size()) + " " + split + " samples (" +
            std::to_string(d.rejected_count()) + " rejected)");
  return d;
}

std::optional<Dataset> load_optional_split(const FlatConfig& cfg, const RunOptions& opts, const std::string& split) {
  if (cfg.get_string("data." + split, "").empty()) return std::nullopt;
  return load_split(cfg, opts, split);
}

ModelConfig model_config(const FlatConfig& cfg, const Dataset& train) {
  ModelConfig m = ModelConfig::from_config(cfg);
  const auto dim = static_cast<int>(train.feature_dim());
  if (!cfg.contains("model.feature_dim")) {
    m.feature_dim = dim;
  } else if (m.feature_dim != dim) {
    throw ConfigError("cli", "model.feature_dim = " + std::to_string(m.feature_dim) + " but the features have " +
                                 std::to_string(dim) + " dims");
  }
  m.validate();
  return m;
}

NegativeTable negatives_for(const FlatConfig& cfg, const Dataset& train, const fs::path& out) {
  const std::string path = cfg.get_string("data.negatives", "");
  if (!path.empty()) return NegativeTable::load(path);
  NegativeTable t = mine_negatives(train);
  t.save(out / "negatives.json");
  return t;
}

std::optional<fs::path> word_vectors_path(const FlatConfig& cfg) {
  const std::string path = cfg.get_string("data.word_vectors", "");
  if (path.empty()) return std::nullopt;
  return fs::path(path);
}

fs::path checkpoint_path(const RunOptions& opts, const FlatConfig& cfg) {
  if (opts.checkpoint) return *opts.checkpoint;
  return required_path(cfg, "eval.checkpoint");
}

Dataset eval_split(const FlatConfig& cfg, const RunOptions& opts) {
  return load_split(cfg, opts, cfg.get_string("eval.split", "test"));
}

}  // namespace

FlatConfig effective_config(const RunOptions& opts, const std::string& command) {
  FlatConfig cfg;
  for (const auto& p : opts.configs) cfg.merge(FlatConfig::load(p));
  for (const auto& o : opts.overrides) cfg.apply_override(o);
  if (opts.seed) cfg.set(command == "generate" ? "seed" : "train.seed", std::to_string(*opts.seed));
  return cfg;
}

int cmd_generate(const RunOptions& opts) {
  const FlatConfig cfg = effective_config(opts, "generate");
  const SyntheticSpec spec = SyntheticSpec::from_config(cfg);
  warn_unused(cfg);
  const SyntheticCorpus corpus = generate_synthetic(spec);
  fs::create_directories(opts.out / "features");
  const fs::path features = opts.out / "features";
  nlohmann::json files = nlohmann::json::object();
  auto emit = [&](const Dataset& d, const std::string& split) {
    const fs::path ann = opts.out / (split + ".jsonl");
    write_dataset(d, features, ann);
    files[split + ".jsonl"] = hex64(fnv1a64(read_file(ann)));
  };
  emit(corpus.train, "train");
  emit(corpus.val, "val");
  emit(corpus.test, "test");
  std::uint64_t feature_hash = fnv1a64("");
  for (const Dataset* d : {&corpus.train, &corpus.val, &corpus.test}) {
    for (const auto& v : d->videos()) {
      feature_hash ^= fnv1a64(read_file(feature_path(features, v.raw.id)));
      feature_hash *= 1099511628211ULL;
    }
  }
  files["features"] = hex64(feature_hash);
  if (spec.word_vector_dim > 0) {
    write_word_vectors(corpus, opts.out / "word_vectors.jsonl");
    files["word_vectors.jsonl"] = hex64(fnv1a64(read_file(opts.out / "word_vectors.jsonl")));
  }

  const std::string spec_text = spec.to_config().dump();
  write_text(opts.out / "spec.cfg", spec_text);
  nlohmann::json rare = nlohmann::json::array();
  for (std::size_t r = 0; r < corpus.rare_pairs.size(); ++r) {
    rare.push_back({{"noun", synthetic_noun(corpus.rare_pairs[r].first)},
                    {"verb", synthetic_verb(corpus.rare_pairs[r].second)},
                    {"train_count", corpus.rare_pair_counts[r]}});
  }
  nlohmann::json manifest = {{"generator", "dtsg synthetic"},
                             {"seed", spec.seed},
                             {"spec", spec.to_config().entries()},
                             {"spec_hash", hex64(fnv1a64(spec_text))},
                             {"files", files},
                             {"rare_pairs", rare}};
  write_text(opts.out / "manifest.json", manifest.dump(2) + "\n");

  FlatConfig data;
  data.set("data.features", fs::absolute(features).lexically_normal().string());
  for (const char* split : {"train", "val", "test"}) {
    data.set(std::string("data.") + split,
             fs::absolute(opts.out / (std::string(split) + ".jsonl")).lexically_normal().string());
  }
  data.set("data.clip_count", std::to_string(spec.clip_count));
  if (spec.word_vector_dim > 0) {
    data.set("data.word_vectors", fs::absolute(opts.out / "word_vectors.jsonl").lexically_normal().string());
  }
  write_text(opts.out / "data.cfg", data.dump());
  std::cout << "generated " << corpus.train.size() << " train / " << corpus.val.size() << " val / "
            << corpus.test.size() << " test samples in " << opts.out.string() << '\n';
  return 0;
}

int cmd_mine(const RunOptions& opts) {
  const FlatConfig cfg = effective_config(opts, "mine");
  const Dataset train = load_split(cfg, opts, "train");
  warn_unused(cfg);
  prepare_out(opts, cfg);
  const NegativeTable t = mine_negatives(train);
  t.save(opts.out / "negatives.json");
  std::size_t with_v = 0;
  std::size_t with_q = 0;
  for (const auto& [id, e] : t.entries()) {
    with_v += e.neg_videos.empty() ? 0 : 1;
    with_q += e.neg_queries.empty() ? 0 : 1;
  }
  std::cout << "mined negatives for " << t.size() << " samples: " << with_v << " with a negative video, " << with_q
            << " with a negative query\n";
  return 0;
}

int cmd_train(const RunOptions& opts) {
  FlatConfig cfg = effective_config(opts, "train");
  const Dataset train_set = load_split(cfg, opts, "train");
  const std::optional<Dataset> val = load_optional_split(cfg, opts, "val");
  const ModelConfig mc = model_config(cfg, train_set);
  const TrainConfig tc = TrainConfig::from_config(cfg);
  tc.validate();
  prepare_out(opts, cfg);
  const NegativeTable negatives = tc.toggles.sample ? negatives_for(cfg, train_set, opts.out) : NegativeTable{};
  warn_unused(cfg);

  FlatConfig run = cfg;
  mc.write_to(run);
  tc.write_to(run);
  GroundingModel model(mc, Vocabulary::build(train_set), tc.seed, tc.toggles.uses_branch() || tc.toggles.sample);
  if (const auto wv = word_vectors_path(cfg)) model.load_word_vectors(*wv);
  TrainHooks hooks;
  hooks.log_csv = opts.out / "train_log.csv";
  hooks.on_epoch = [&](const GroundingModel& m, const TrainState& s) {
    save_checkpoint(opts.out / "last.ckpt", m, s, run);
  };
  const TrainResult r = train(model, train_set, val ? *val : Dataset{}, &negatives, tc, hooks);
  save_checkpoint(opts.out / "model.ckpt", model, r.state, run);
  std::cout << "trained " << r.history.size() << " epochs" << (r.early_stopped ? " (early stop)" : "");
  if (r.state.best_epoch > 0) std::cout << ", best val R@1,IoU=0.5 " << r.state.best_val << " at epoch " << r.state.best_epoch;
  std::cout << "\nwrote " << (opts.out / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const RunOptions& opts) {
  const FlatConfig cfg = effective_config(opts, "eval");
  const Dataset data = eval_split(cfg, opts);
  const std::optional<Dataset> train_set = load_optional_split(cfg, opts, "train");
  const RecallOptions ro{cfg.get_bool("eval.inclusive", false)};
  const int threshold = static_cast<int>(cfg.get_int("data.rare_threshold", 10));
  prepare_out(opts, cfg);
  std::vector<Prediction> preds;
  if (opts.predictions) {
    preds = read_predictions(*opts.predictions);
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint_path(opts, cfg));
    preds = predict(*ck.model, data, static_cast<int>(cfg.get_int("eval.top_n", 5)));
    write_predictions(preds, opts.out / "predictions.jsonl");
  }
  warn_unused(cfg);
  WordCounts counts;
  if (train_set) counts = noun_verb_frequencies(*train_set);
  const auto cells = evaluate(preds, data, default_grid(), train_set ? &counts : nullptr, ro, threshold);
  write_report_csv(cells, opts.out / "report.csv");
  write_recall_svg(cells, opts.out / "report.svg", "R@n, IoU=m");
  for (const auto& c : cells) {
    std::printf("%-6s R@%d IoU=%.1f  %6.2f  (%zu)\n", c.split.c_str(), c.n, c.m, c.recall, c.count);
  }
  return 0;
}

int cmd_export(const RunOptions& opts) {
  const FlatConfig cfg = effective_config(opts, "export");
  const fs::path path = checkpoint_path(opts, cfg);
  warn_unused(cfg);
  fs::create_directories(opts.out);
  const Checkpoint ck = load_checkpoint(path);
  const auto backbone = export_backbone(*ck.model);
  FlatConfig run = FlatConfig::parse(ck.config_text, path.string());
  save_checkpoint(opts.out / "backbone.ckpt", *backbone, ck.state, run, false);
  std::cout << "exported " << backbone->params().count() << " of " << ck.model->params().count()
            << " parameters to " << (opts.out / "backbone.ckpt").string() << '\n';
  return 0;
}

int cmd_bench(const RunOptions& opts) {
  const FlatConfig cfg = effective_config(opts, "bench");
  const Dataset data = eval_split(cfg, opts);
  const fs::path path = checkpoint_path(opts, cfg);
  const int reps = static_cast<int>(cfg.get_int("bench.reps", 5));
  warn_unused(cfg);
  prepare_out(opts, cfg);
  const Checkpoint ck = load_checkpoint(path);
  const InferenceBenchmark b = benchmark_inference(*ck.model, data, reps);
  nlohmann::json j = {{"checkpoint", path.string()},
                      {"samples", b.samples},
                      {"reps", b.reps},
                      {"mean_ms_per_sample", b.mean_ms},
                      {"std_ms_per_sample", b.std_ms},
                      {"params_by_tag", b.params_by_tag},
                      {"inference_params", b.touched_params},
                      {"backbone_params", b.backbone_params}};
  write_text(opts.out / "bench.json", j.dump(2) + "\n");
  std::printf("%.4f ms/sample (sd %.4f) over %d reps; inference reads %zu params, backbone has %zu\n", b.mean_ms,
              b.std_ms, b.reps, b.touched_params, b.backbone_params);
  return 0;
}

int cmd_ablate(const RunOptions& opts) {
  FlatConfig cfg = effective_config(opts, "ablate");
  const Dataset train_set = load_split(cfg, opts, "train");
  const std::optional<Dataset> val = load_optional_split(cfg, opts, "val");
  const Dataset test = load_split(cfg, opts, "test");
  std::vector<AblationRow> rows;
  {
    std::stringstream list(cfg.get_string("ablate.rows", "backbone,sample,bias1,bias2,bias3,all"));
    std::string name;
    while (std::getline(list, name, ',')) {
      if (!name.empty()) rows.push_back(ablation_row(name));
    }
  }
  if (rows.empty()) throw ConfigError("cli", "ablate.rows is empty");
  AblationInputs in;
  in.train = &train_set;
  in.val = val ? &*val : nullptr;
  in.test = &test;
  in.model = model_config(cfg, train_set);
  in.train_config = TrainConfig::from_config(cfg);
  in.train_config.validate();
  in.rare_threshold = static_cast<int>(cfg.get_int("data.rare_threshold", 10));
  in.word_vectors = word_vectors_path(cfg);
  const int seeds = static_cast<int>(cfg.get_int("ablate.seeds", 5));
  prepare_out(opts, cfg);
  const NegativeTable negatives = negatives_for(cfg, train_set, opts.out);
  in.negatives = &negatives;
  warn_unused(cfg);

  const auto runs = run_ablation(in, rows, in.train_config.seed, seeds, [](const AblationRun& r) {
    std::printf("%-8s seed %llu  %3d epochs %7.1fs  R@1,IoU=0.5 all %6.2f rare %6.2f common %6.2f\n", r.row.c_str(),
                static_cast<unsigned long long>(r.seed), r.epochs_run, r.seconds, *run_recall(r, "all", 1, 0.5),
                *run_recall(r, "rare", 1, 0.5), *run_recall(r, "common", 1, 0.5));
    std::fflush(stdout);
  });
  write_ablation_runs_csv(runs, opts.out / "ablation_runs.csv");
  write_ablation_summary_csv(runs, rows, opts.out / "ablation.csv");
  std::cout << "wrote " << (opts.out / "ablation.csv").string() << '\n';
  return 0;
}

int run_command(const std::string& command, const RunOptions& opts) {
  try {
    if (command == "generate") return cmd_generate(opts);
    if (command == "mine") return cmd_mine(opts);
    if (command == "train") return cmd_train(opts);
    if (command == "eval") return cmd_eval(opts);
    if (command == "export") return cmd_export(opts);
    if (command == "bench") return cmd_bench(opts);
    if (command == "ablate") return cmd_ablate(opts);
    std::cerr << "cli: unknown command " << command << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << command << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dtsg::tools
