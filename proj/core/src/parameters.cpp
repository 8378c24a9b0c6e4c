#include "dtsg/parameters.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "dtsg/error.hpp"

namespace dtsg {
namespace {

constexpr std::array<std::pair<ComponentTag, std::string_view>, 7> kTagNames{{
    {ComponentTag::kBackbone, "backbone"},
    {ComponentTag::kBias1, "bias1"},
    {ComponentTag::kBias2, "bias2"},
    {ComponentTag::kBias3, "bias3"},
    {ComponentTag::kBim, "bim"},
    {ComponentTag::kDebiasedModule, "debiased_module"},
    {ComponentTag::kSampler, "sampler"},
}};

}  // namespace

std::string_view to_string(ComponentTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "unknown";
}

std::optional<ComponentTag> parse_component_tag(std::string_view s) {
  for (const auto& [t, name] : kTagNames) {
    if (name == s) return t;
  }
  return std::nullopt;
}

Parameter& ParamStore::add(std::string name, ComponentTag tag, Matrix init) {
  if (index_.count(name) != 0) throw Error("params", "duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->tag = tag;
  p->value = std::move(init);
  p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
  p->m = Matrix::Zero(p->value.rows(), p->value.cols());
  p->v = Matrix::Zero(p->value.rows(), p->value.cols());
  Parameter& ref = *p;
  index_.emplace(ref.name, &ref);
  params_.push_back(std::move(p));
  return ref;
}

Parameter* ParamStore::find(std::string_view name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::count(std::optional<ComponentTag> tag) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!tag || p->tag == *tag) n += p->size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(fan_in, fan_out, -bound, bound, rng);
}

Matrix uniform(std::size_t rows, std::size_t cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace dtsg
