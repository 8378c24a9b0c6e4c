#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dtsg/tensor.hpp"

namespace dtsg {

// Which part of the model owns a tensor. Only kBackbone tensors are reachable
// from the inference path.
enum class ComponentTag { kBackbone, kBias1, kBias2, kBias3, kBim, kDebiasedModule, kSampler };

std::string_view to_string(ComponentTag tag);
std::optional<ComponentTag> parse_component_tag(std::string_view s);

struct Parameter {
  std::string name;
  ComponentTag tag = ComponentTag::kBackbone;
  Matrix value;
  Matrix grad;
  // Adam moments.
  Matrix m;
  Matrix v;
  // Frozen tensors still receive gradients but the optimizer, clipping and
  // the gradient audit skip them.
  bool trainable = true;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Owns every trainable tensor. Registration order is stable and defines the
// iteration order used by the optimizer, checkpoints and the gradient audit.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& add(std::string name, ComponentTag tag, Matrix init);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  std::size_t count(std::optional<ComponentTag> tag = std::nullopt) const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

// Deterministic initializers. All draw from the caller's generator.
Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
Matrix uniform(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng);

}  // namespace dtsg
