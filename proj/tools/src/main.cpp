#include <CLI11.hpp>

#include "dtsg/log.hpp"
#include "dtsg_tools/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dtsg: temporal sentence grounding with a training-only debiasing branch"};
  app.require_subcommand(1);
  dtsg::tools::RunOptions opts;
  bool quiet = false;
  bool verbose = false;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.configs, "config file(s), merged in order")->check(CLI::ExistingFile);
    sub->add_option("--set", opts.overrides, "key=value override (repeatable)");
    sub->add_option("--out", opts.out, "output directory");
    sub->add_option("--seed", seed, "seed override");
    sub->add_flag("--deterministic", opts.deterministic, "single reader thread");
    sub->add_flag("-q,--quiet", quiet, "errors only");
    sub->add_flag("-v,--verbose", verbose, "per-epoch progress");
  };
  auto* generate = app.add_subcommand("generate", "write a synthetic bias-planted corpus");
  auto* mine = app.add_subcommand("mine", "mine contrastive negatives for data.train");
  auto* train = app.add_subcommand("train", "train a model");
  auto* eval = app.add_subcommand("eval", "score a checkpoint or a predictions file");
  auto* exp = app.add_subcommand("export", "strip everything but the backbone");
  auto* bench = app.add_subcommand("bench", "time inference and count inference parameters");
  auto* ablate = app.add_subcommand("ablate", "train and evaluate loss/module toggle combinations");
  for (auto* sub : {generate, mine, train, eval, exp, bench, ablate}) common(sub);
  for (auto* sub : {eval, exp, bench}) {
    sub->add_option_function<std::string>("--ckpt", [&](const std::string& p) { opts.checkpoint = p; },
                                          "checkpoint file");
  }
  eval->add_option_function<std::string>("--predictions", [&](const std::string& p) { opts.predictions = p; },
                                         "JSON-lines predictions to score instead of a checkpoint");

  CLI11_PARSE(app, argc, argv);
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) opts.seed = seed;
  }
  dtsg::log::set_level(quiet ? dtsg::log::Level::kQuiet : verbose ? dtsg::log::Level::kInfo : dtsg::log::Level::kWarn);
  return dtsg::tools::run_command(app.get_subcommands().front()->get_name(), opts);
}
