#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dtsg/autograd.hpp"

namespace dtsg::testing {

using OpFn = std::function<ag::Var(ag::Graph&, const std::vector<ag::Var>&)>;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces op(inputs) to a scalar with fixed random weights, differentiates it
// analytically and by central differences, and returns the max relative error
// |a - n| / max(|a|, |n|, 1e-8).
inline double max_fd_error(const OpFn& op, const std::vector<Matrix>& inputs, std::uint64_t seed = 9,
                           double eps = 1e-6) {
  ParamStore store;
  std::vector<Parameter*> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    leaves.push_back(&store.add("x" + std::to_string(i), ComponentTag::kBackbone, inputs[i]));
  }
  Matrix weights;
  auto forward = [&](ag::Graph& g) {
    std::vector<ag::Var> vars;
    for (Parameter* p : leaves) vars.push_back(g.parameter(*p));
    ag::Var out = op(g, vars);
    if (weights.size() == 0) {
      std::mt19937_64 rng(seed);
      weights = random_matrix(out.rows(), out.cols(), rng);
    }
    return ag::sum(ag::mul(out, g.constant(weights)));
  };
  store.zero_grad();
  {
    ag::Graph g;
    g.backward(forward(g));
  }
  double worst = 0.0;
  for (Parameter* p : leaves) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + eps;
      ag::Graph gp(false);
      const double plus = forward(gp).scalar();
      p->value.data()[k] = saved - eps;
      ag::Graph gm(false);
      const double minus = forward(gm).scalar();
      p->value.data()[k] = saved;
      const double numeric = (plus - minus) / (2 * eps);
      const double analytic = p->grad.data()[k];
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
    }
  }
  return worst;
}

}  // namespace dtsg::testing

namespace dtsg::testing {

// Same check over every tensor of a parameter store; `loss` builds a scalar.
// Gradients of exactly zero (e.g. attention key biases) come back from the
// differences as ~1e-10 round-off, hence the larger floor here.
inline double max_store_fd_error(ParamStore& store, const std::function<ag::Var(ag::Graph&)>& loss,
                                 double eps = 1e-6, double floor = 1e-5) {
  store.zero_grad();
  {
    ag::Graph g;
    g.backward(loss(g));
  }
  double worst = 0.0;
  for (Parameter* p : store.all()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + eps;
      ag::Graph gp(false);
      const double plus = loss(gp).scalar();
      p->value.data()[k] = saved - eps;
      ag::Graph gm(false);
      const double minus = loss(gm).scalar();
      p->value.data()[k] = saved;
      const double numeric = (plus - minus) / (2 * eps);
      const double analytic = p->grad.data()[k];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Fixed random weighting that turns a matrix output into a scalar loss.
inline ag::Var weighted_sum(ag::Graph& g, const ag::Var& out, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  return ag::sum(ag::mul(out, g.constant(random_matrix(out.rows(), out.cols(), rng))));
}

}  // namespace dtsg::testing
