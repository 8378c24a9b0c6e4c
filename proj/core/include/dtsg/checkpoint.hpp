#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "dtsg/config.hpp"
#include "dtsg/model.hpp"
#include "dtsg/training.hpp"

namespace dtsg {

// Single-file archive: "DTSGCKPT", u64 manifest length, JSON manifest
// (tensor name, tag, kind, shape, dtype, byte offset; model config; vocabulary;
// training state), then raw little-endian float64 payloads.
struct Checkpoint {
  std::unique_ptr<GroundingModel> model;
  TrainState state;
  std::string config_text;  // effective run configuration
  std::uint64_t config_hash = 0;
  bool has_optimizer_state = false;
};

void save_checkpoint(const std::filesystem::path& path, const GroundingModel& model, const TrainState& state,
                     const FlatConfig& run_config, bool with_optimizer = true);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// A backbone-only copy of `model`: every tensor not tagged backbone is dropped.
std::unique_ptr<GroundingModel> export_backbone(const GroundingModel& model);

}  // namespace dtsg
