#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtsg/config.hpp"

namespace dtsg::tools {

struct RunOptions {
  std::vector<std::filesystem::path> configs;  // merged in order
  std::vector<std::string> overrides;          // --set key=value, applied last
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> predictions;
};

// Config files, then --set overrides, then --seed (as train.seed, or seed for
// generate).
FlatConfig effective_config(const RunOptions& opts, const std::string& command);

int cmd_generate(const RunOptions& opts);
int cmd_mine(const RunOptions& opts);
int cmd_train(const RunOptions& opts);
int cmd_eval(const RunOptions& opts);
int cmd_export(const RunOptions& opts);
int cmd_bench(const RunOptions& opts);
int cmd_ablate(const RunOptions& opts);

// Dispatches by name and turns errors into exit codes: 2 for configuration
// errors, 1 for everything else. Messages go to stderr as "component: text".
int run_command(const std::string& command, const RunOptions& opts);

}  // namespace dtsg::tools
