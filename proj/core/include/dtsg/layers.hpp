#pragma once

#include <random>
#include <string>

#include "dtsg/autograd.hpp"
#include "dtsg/parameters.hpp"

namespace dtsg {

// Shared constructor arguments for anything that registers parameters.
struct ParamScope {
  ParamStore& store;
  std::string prefix;
  ComponentTag tag;
  std::mt19937_64& rng;

  ParamScope sub(const std::string& name) const { return {store, prefix + "." + name, tag, rng}; }
  Parameter& add(const std::string& name, Matrix init) const { return store.add(prefix + "." + name, tag, std::move(init)); }
};

// y = x W + b
class Linear {
 public:
  Linear() = default;
  Linear(const ParamScope& scope, int in, int out, bool bias = true);
  ag::Var operator()(ag::Graph& g, const ag::Var& x) const;

  Parameter* weight() const { return weight_; }
  Parameter* bias() const { return bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

// Linear -> ReLU -> Linear
class Mlp {
 public:
  Mlp() = default;
  Mlp(const ParamScope& scope, int in, int hidden, int out);
  ag::Var operator()(ag::Graph& g, const ag::Var& x) const;

  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const ParamScope& scope, int dim);
  ag::Var operator()(ag::Graph& g, const ag::Var& x) const;

 private:
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
};

class Lstm {
 public:
  Lstm() = default;
  Lstm(const ParamScope& scope, int in, int hidden);
  ag::Var operator()(ag::Graph& g, const ag::Var& x) const;

 private:
  Parameter* w_ih_ = nullptr;
  Parameter* w_hh_ = nullptr;
  Parameter* bias_ = nullptr;
};

}  // namespace dtsg
