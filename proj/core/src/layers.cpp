#include "dtsg/layers.hpp"

namespace dtsg {

Linear::Linear(const ParamScope& scope, int in, int out, bool bias) {
  weight_ = &scope.add("W", xavier_uniform(in, out, scope.rng));
  if (bias) bias_ = &scope.add("b", Matrix::Zero(1, out));
}

ag::Var Linear::operator()(ag::Graph& g, const ag::Var& x) const {
  ag::Var y = ag::matmul(x, g.parameter(*weight_));
  if (bias_ != nullptr) y = ag::add_row(y, g.parameter(*bias_));
  return y;
}

Mlp::Mlp(const ParamScope& scope, int in, int hidden, int out)
    : first_(scope.sub("fc1"), in, hidden), second_(scope.sub("fc2"), hidden, out) {}

ag::Var Mlp::operator()(ag::Graph& g, const ag::Var& x) const { return second_(g, ag::relu(first_(g, x))); }

LayerNorm::LayerNorm(const ParamScope& scope, int dim) {
  gamma_ = &scope.add("gamma", Matrix::Ones(1, dim));
  beta_ = &scope.add("beta", Matrix::Zero(1, dim));
}

ag::Var LayerNorm::operator()(ag::Graph& g, const ag::Var& x) const {
  return ag::layer_norm(x, g.parameter(*gamma_), g.parameter(*beta_));
}

Lstm::Lstm(const ParamScope& scope, int in, int hidden) {
  w_ih_ = &scope.add("W_ih", xavier_uniform(in, 4 * hidden, scope.rng));
  w_hh_ = &scope.add("W_hh", xavier_uniform(hidden, 4 * hidden, scope.rng));
  Matrix b = Matrix::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget gate
  bias_ = &scope.add("b", std::move(b));
}

ag::Var Lstm::operator()(ag::Graph& g, const ag::Var& x) const {
  return ag::lstm(x, g.parameter(*w_ih_), g.parameter(*w_hh_), g.parameter(*bias_));
}

}  // namespace dtsg
