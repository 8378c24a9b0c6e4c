#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Graph records nodes in creation order; Graph::backward walks them in
// reverse, so every op only needs to push its output gradient to its inputs.
// Ops are coarse (a whole LSTM sweep or layer norm is one node) and each has
// a hand-written backward pass. The gradient audit checks all of them
// against central finite differences.

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "dtsg/parameters.hpp"
#include "dtsg/tensor.hpp"

namespace dtsg::ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Graph;

// Handle to a node owned by a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;
  Var(Node* node, Graph* graph) : node_(node), graph_(graph) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }

  Node* node() const { return node_; }
  Graph& graph() const { return *graph_; }
  bool valid() const { return node_ != nullptr; }

 private:
  Node* node_ = nullptr;
  Graph* graph_ = nullptr;
};

class Graph {
 public:
  // grad_enabled = false builds a forward-only graph: no closures are kept and
  // parameter leaves do not require gradients.
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  // Records an op output. `parents` decide whether the output needs a gradient.
  Var emit(Matrix value, std::initializer_list<const Node*> parents,
           std::function<void(Node&)> backward);
  Var emit_n(Matrix value, const std::vector<Node*>& parents, std::function<void(Node&)> backward);

  // Seeds d(root)/d(root) = 1 and propagates to every parameter leaf.
  void backward(const Var& root);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Parameters whose values were read by this graph, in first-use order.
  const std::vector<const Parameter*>& touched() const { return touched_; }

  // Stop-gradient bookkeeping for finite-difference checks. A recording graph
  // appends the value of every detach() it performs; a replaying graph hands
  // those values back in the same order, so the detached inputs stay frozen
  // at their base values while a parameter is perturbed.
  void record_detached(std::vector<Matrix>* sink) { detach_sink_ = sink; }
  void replay_detached(const std::vector<Matrix>* source) {
    detach_source_ = source;
    detach_cursor_ = 0;
  }
  Var detached(const Matrix& value);

 private:
  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::vector<const Parameter*> touched_;
  std::vector<Matrix>* detach_sink_ = nullptr;
  const std::vector<Matrix>* detach_source_ = nullptr;
  std::size_t detach_cursor_ = 0;
};

// ---- elementwise / structural ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_constant(const Var& a, const Matrix& c);
// a (R×C) + b (1×C) broadcast over rows.
Var add_row(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var detach(const Var& a);
// Rows of `table` selected by ids (embedding lookup); gradient scatter-adds.
Var gather_rows(const Var& table, std::span<const int> ids);

// ---- nonlinearities ----
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
// Max over rows of a column vector (R×1) -> 1×1.
Var max_rows(const Var& a);

// ---- normalization / attention ----
// Softmax along each row. Columns with col_mask[j] == 0 get exactly zero
// weight. An empty mask means all columns are valid.
Var row_softmax(const Var& a, const Mask& col_mask = {});
// Softmax along each column over all rows. Masked columns are all-zero.
Var col_softmax(const Var& a, const Mask& col_mask = {});
// Row-wise layer normalization with learned scale/shift (both 1×C).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Single-layer LSTM over the rows of x with zero initial state.
// x: T×I, w_ih: I×4H, w_hh: H×4H, bias: 1×4H, gate order (i, f, g, o).
// Returns the T×H hidden states.
Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& bias);

// ---- losses (all return 1×1) ----
// mean over entries of BCE(sigmoid(logits), labels); labels constant.
Var bce_with_logits_mean(const Var& logits, const Matrix& labels);
// -log softmax(logits column)[target].
Var softmax_cross_entropy(const Var& logits_column, Eigen::Index target);
// Row-wise cosine similarity of two R×C matrices -> R×1. eps in denominator.
Var cosine_rows(const Var& a, const Var& b, double eps = 1e-8);
// log(1 + exp(x)) elementwise, stable.
Var softplus(const Var& a);
// -log( exp(x_0) / sum_k exp(x_k) ) for a 1×K row of logits.
Var neg_log_softmax_first(const Var& logits_row);

}  // namespace dtsg::ag
