#include "dtsg/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtsg/error.hpp"

namespace dtsg::ag {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("autograd", std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool column_valid(const Mask& mask, Eigen::Index j) { return mask.empty() || mask[static_cast<std::size_t>(j)] != 0; }

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Graph::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(&n, this);
}

Var Graph::detached(const Matrix& value) {
  if (detach_source_ != nullptr) {
    if (detach_cursor_ >= detach_source_->size()) throw Error("autograd", "detach replay ran out of values");
    return constant((*detach_source_)[detach_cursor_++]);
  }
  if (detach_sink_ != nullptr) detach_sink_->push_back(value);
  return constant(value);
}

Var Graph::parameter(Parameter& p) {
  if (std::find(touched_.begin(), touched_.end(), &p) == touched_.end()) touched_.push_back(&p);
  Node& n = nodes_.emplace_back();
  n.value = p.value;
  if (grad_enabled_) {
    n.requires_grad = true;
    Parameter* target = &p;
    n.backward = [target](Node& self) {
      if (target->grad.size() == 0) target->zero_grad();
      target->grad += self.grad;
    };
  }
  return Var(&n, this);
}

Var Graph::emit(Matrix value, std::initializer_list<const Node*> parents, std::function<void(Node&)> backward) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Node* p : parents) {
      if (p->requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return Var(&n, this);
}

Var Graph::emit_n(Matrix value, const std::vector<Node*>& parents, std::function<void(Node&)> backward) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  if (grad_enabled_) {
    n.requires_grad = std::any_of(parents.begin(), parents.end(), [](const Node* p) { return p->requires_grad; });
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return Var(&n, this);
}

void Graph::backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw Error("autograd", "backward root must be 1x1");
  if (!root.requires_grad()) return;
  root.node()->grad = Matrix::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(n);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Node* na = a.node();
  Node* nb = b.node();
  return a.graph().emit(na->value + nb->value, {na, nb}, [na, nb](Node& out) {
    if (na->requires_grad) na->accumulate(out.grad);
    if (nb->requires_grad) nb->accumulate(out.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Node* na = a.node();
  Node* nb = b.node();
  return a.graph().emit(na->value - nb->value, {na, nb}, [na, nb](Node& out) {
    if (na->requires_grad) na->accumulate(out.grad);
    if (nb->requires_grad) nb->accumulate(-out.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Node* na = a.node();
  Node* nb = b.node();
  return a.graph().emit(na->value.cwiseProduct(nb->value), {na, nb}, [na, nb](Node& out) {
    if (na->requires_grad) na->accumulate(out.grad.cwiseProduct(nb->value));
    if (nb->requires_grad) nb->accumulate(out.grad.cwiseProduct(na->value));
  });
}

Var scale(const Var& a, double s) {
  Node* na = a.node();
  return a.graph().emit(na->value * s, {na}, [na, s](Node& out) { na->accumulate(out.grad * s); });
}

Var add_constant(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw Error("autograd", "add_constant: shape mismatch");
  Node* na = a.node();
  return a.graph().emit(na->value + c, {na}, [na](Node& out) { na->accumulate(out.grad); });
}

Var add_row(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw Error("autograd", "add_row: bias must be 1xC");
  Node* na = a.node();
  Node* nb = b.node();
  Matrix v = na->value.rowwise() + nb->value.row(0);
  return a.graph().emit(std::move(v), {na, nb}, [na, nb](Node& out) {
    if (na->requires_grad) na->accumulate(out.grad);
    if (nb->requires_grad) nb->accumulate(out.grad.colwise().sum());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw Error("autograd", "matmul: inner dimension mismatch " + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
  }
  Node* na = a.node();
  Node* nb = b.node();
  return a.graph().emit(na->value * nb->value, {na, nb}, [na, nb](Node& out) {
    if (na->requires_grad) na->accumulate(out.grad * nb->value.transpose());
    if (nb->requires_grad) nb->accumulate(na->value.transpose() * out.grad);
  });
}

Var transpose(const Var& a) {
  Node* na = a.node();
  Matrix v = na->value.transpose();
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    Matrix g = out.grad.transpose();
    na->accumulate(g);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error("autograd", "concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error("autograd", "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<Node*> nodes;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    nodes.push_back(p.node());
  }
  return parts[0].graph().emit_n(std::move(v), nodes, [nodes](Node& out) {
    Eigen::Index off = 0;
    for (Node* n : nodes) {
      const Eigen::Index c = n->value.cols();
      if (n->requires_grad) n->accumulate(out.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw Error("autograd", "slice_cols: out of range");
  Node* na = a.node();
  Matrix v = na->value.middleCols(start, count);
  return a.graph().emit(std::move(v), {na}, [na, start, count](Node& out) {
    Matrix g = Matrix::Zero(na->value.rows(), na->value.cols());
    g.middleCols(start, count) = out.grad;
    na->accumulate(g);
  });
}

Var detach(const Var& a) { return a.graph().detached(a.value()); }

Var gather_rows(const Var& table, std::span<const int> ids) {
  Node* nt = table.node();
  const Eigen::Index n_rows = table.rows();
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.cols());
  std::vector<int> idx(ids.begin(), ids.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n_rows) throw Error("autograd", "gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(i)) = nt->value.row(idx[i]);
  }
  return table.graph().emit(std::move(v), {nt}, [nt, idx = std::move(idx)](Node& out) {
    Matrix g = Matrix::Zero(nt->value.rows(), nt->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += out.grad.row(static_cast<Eigen::Index>(i));
    nt->accumulate(g);
  });
}

Var relu(const Var& a) {
  Node* na = a.node();
  Matrix v = na->value.cwiseMax(0.0);
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    Matrix g = out.grad.array() * (na->value.array() > 0.0).cast<double>();
    na->accumulate(g);
  });
}

Var sigmoid(const Var& a) {
  Node* na = a.node();
  Matrix v = na->value.unaryExpr([](double x) { return stable_sigmoid(x); });
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    Matrix g = out.grad.array() * out.value.array() * (1.0 - out.value.array());
    na->accumulate(g);
  });
}

Var tanh(const Var& a) {
  Node* na = a.node();
  Matrix v = na->value.array().tanh();
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    Matrix g = out.grad.array() * (1.0 - out.value.array().square());
    na->accumulate(g);
  });
}

Var sum(const Var& a) {
  Node* na = a.node();
  Matrix v(1, 1);
  v(0, 0) = na->value.sum();
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    na->accumulate(Matrix::Constant(na->value.rows(), na->value.cols(), out.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var max_rows(const Var& a) {
  if (a.cols() != 1 || a.rows() < 1) throw Error("autograd", "max_rows: expects a nonempty column");
  Node* na = a.node();
  Eigen::Index arg = 0;
  Matrix v(1, 1);
  v(0, 0) = na->value.col(0).maxCoeff(&arg);
  return a.graph().emit(std::move(v), {na}, [na, arg](Node& out) {
    Matrix g = Matrix::Zero(na->value.rows(), 1);
    g(arg, 0) = out.grad(0, 0);
    na->accumulate(g);
  });
}

Var row_softmax(const Var& a, const Mask& col_mask) {
  if (!col_mask.empty() && static_cast<Eigen::Index>(col_mask.size()) != a.cols()) {
    throw Error("autograd", "row_softmax: mask length mismatch");
  }
  bool any_valid = col_mask.empty();
  for (auto m : col_mask) any_valid = any_valid || m != 0;
  if (!any_valid) throw Error("autograd", "row_softmax: every column is masked");
  Node* na = a.node();
  const Matrix& x = na->value;
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (column_valid(col_mask, j)) mx = std::max(mx, x(i, j));
    }
    double z = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (column_valid(col_mask, j)) {
        p(i, j) = std::exp(x(i, j) - mx);
        z += p(i, j);
      }
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) p(i, j) /= z;
  }
  return a.graph().emit(std::move(p), {na}, [na](Node& out) {
    const Matrix& pv = out.value;
    Eigen::VectorXd dots = (out.grad.cwiseProduct(pv)).rowwise().sum();
    Matrix g = pv.cwiseProduct(out.grad - dots.replicate(1, pv.cols()));
    na->accumulate(g);
  });
}

Var col_softmax(const Var& a, const Mask& col_mask) {
  if (!col_mask.empty() && static_cast<Eigen::Index>(col_mask.size()) != a.cols()) {
    throw Error("autograd", "col_softmax: mask length mismatch");
  }
  Node* na = a.node();
  const Matrix& x = na->value;
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!column_valid(col_mask, j)) continue;
    const double mx = x.col(j).maxCoeff();
    double z = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      p(i, j) = std::exp(x(i, j) - mx);
      z += p(i, j);
    }
    p.col(j) /= z;
  }
  return a.graph().emit(std::move(p), {na}, [na](Node& out) {
    const Matrix& pv = out.value;
    RowVector dots = (out.grad.cwiseProduct(pv)).colwise().sum();
    Matrix g = pv.cwiseProduct(out.grad - dots.replicate(pv.rows(), 1));
    na->accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw Error("autograd", "layer_norm: scale/shift must be 1xC");
  }
  Node* nx = x.node();
  Node* ng = gamma.node();
  Node* nb = beta.node();
  const Matrix& xv = nx->value;
  Matrix xhat(xv.rows(), c);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * ng->value.row(0).array()).rowwise() + nb->value.row(0).array();
  return x.graph().emit(std::move(y), {nx, ng, nb},
                        [nx, ng, nb, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& out) {
                          const Matrix& dy = out.grad;
                          if (ng->requires_grad) ng->accumulate(dy.cwiseProduct(xhat).colwise().sum());
                          if (nb->requires_grad) nb->accumulate(dy.colwise().sum());
                          if (nx->requires_grad) {
                            Matrix dxhat = dy.array().rowwise() * ng->value.row(0).array();
                            const double n = static_cast<double>(dxhat.cols());
                            Matrix dx(dxhat.rows(), dxhat.cols());
                            for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                              const double m1 = dxhat.row(i).sum() / n;
                              const double m2 = dxhat.row(i).dot(xhat.row(i)) / n;
                              dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                            }
                            nx->accumulate(dx);
                          }
                        });
}

Var lstm(const Var& x, const Var& w_ih, const Var& w_hh, const Var& bias) {
  const Eigen::Index steps = x.rows();
  const Eigen::Index hidden = w_hh.rows();
  if (w_ih.rows() != x.cols() || w_ih.cols() != 4 * hidden || w_hh.cols() != 4 * hidden || bias.rows() != 1 ||
      bias.cols() != 4 * hidden) {
    throw Error("autograd", "lstm: parameter shapes inconsistent with input");
  }
  Node* nx = x.node();
  Node* nwi = w_ih.node();
  Node* nwh = w_hh.node();
  Node* nb = bias.node();

  // Row t of `gates` holds activated (i, f, g, o); c holds cell states.
  Matrix pre = (nx->value * nwi->value).rowwise() + nb->value.row(0);
  Matrix gates(steps, 4 * hidden);
  Matrix h(steps, hidden);
  Matrix c(steps, hidden);
  RowVector h_prev = RowVector::Zero(hidden);
  RowVector c_prev = RowVector::Zero(hidden);
  for (Eigen::Index t = 0; t < steps; ++t) {
    RowVector z = pre.row(t) + h_prev * nwh->value;
    for (Eigen::Index k = 0; k < hidden; ++k) {
      gates(t, k) = stable_sigmoid(z(k));
      gates(t, hidden + k) = stable_sigmoid(z(hidden + k));
      gates(t, 2 * hidden + k) = std::tanh(z(2 * hidden + k));
      gates(t, 3 * hidden + k) = stable_sigmoid(z(3 * hidden + k));
    }
    for (Eigen::Index k = 0; k < hidden; ++k) {
      c(t, k) = gates(t, hidden + k) * c_prev(k) + gates(t, k) * gates(t, 2 * hidden + k);
      h(t, k) = gates(t, 3 * hidden + k) * std::tanh(c(t, k));
    }
    h_prev = h.row(t);
    c_prev = c.row(t);
  }

  return x.graph().emit(
      h, {nx, nwi, nwh, nb}, [nx, nwi, nwh, nb, gates = std::move(gates), c = std::move(c), h](Node& out) {
        const Eigen::Index steps = gates.rows();
        const Eigen::Index hidden = c.cols();
        Matrix dz(steps, 4 * hidden);
        RowVector dh_next = RowVector::Zero(hidden);
        RowVector dc_next = RowVector::Zero(hidden);
        for (Eigen::Index t = steps - 1; t >= 0; --t) {
          RowVector dh = out.grad.row(t) + dh_next;
          for (Eigen::Index k = 0; k < hidden; ++k) {
            const double i = gates(t, k);
            const double f = gates(t, hidden + k);
            const double g = gates(t, 2 * hidden + k);
            const double o = gates(t, 3 * hidden + k);
            const double tc = std::tanh(c(t, k));
            const double c_prev = t > 0 ? c(t - 1, k) : 0.0;
            const double dc = dh(k) * o * (1.0 - tc * tc) + dc_next(k);
            dz(t, k) = dc * g * i * (1.0 - i);
            dz(t, hidden + k) = dc * c_prev * f * (1.0 - f);
            dz(t, 2 * hidden + k) = dc * i * (1.0 - g * g);
            dz(t, 3 * hidden + k) = dh(k) * tc * o * (1.0 - o);
            dc_next(k) = dc * f;
          }
          dh_next = dz.row(t) * nwh->value.transpose();
        }
        if (nwi->requires_grad) nwi->accumulate(nx->value.transpose() * dz);
        if (nb->requires_grad) nb->accumulate(dz.colwise().sum());
        if (nx->requires_grad) nx->accumulate(dz * nwi->value.transpose());
        if (nwh->requires_grad && steps > 1) {
          // h_{t-1} for t >= 1; h_{-1} = 0 contributes nothing.
          Matrix g = h.topRows(steps - 1).transpose() * dz.bottomRows(steps - 1);
          nwh->accumulate(g);
        } else if (nwh->requires_grad) {
          nwh->accumulate(Matrix::Zero(nwh->value.rows(), nwh->value.cols()));
        }
      });
}

Var bce_with_logits_mean(const Var& logits, const Matrix& labels) {
  if (labels.rows() != logits.rows() || labels.cols() != logits.cols()) {
    throw Error("autograd", "bce_with_logits_mean: label shape mismatch");
  }
  Node* nl = logits.node();
  const Matrix& z = nl->value;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double x = z.data()[i];
    const double y = labels.data()[i];
    // -[y log s(x) + (1-y) log(1-s(x))] = softplus(x) - y x
    total += stable_softplus(x) - y * x;
  }
  const double n = static_cast<double>(z.size());
  Matrix v(1, 1);
  v(0, 0) = total / n;
  return logits.graph().emit(std::move(v), {nl}, [nl, labels, n](Node& out) {
    Matrix g = nl->value.unaryExpr([](double x) { return stable_sigmoid(x); }) - labels;
    nl->accumulate(g * (out.grad(0, 0) / n));
  });
}

Var softmax_cross_entropy(const Var& logits_column, Eigen::Index target) {
  if (logits_column.cols() != 1 || target < 0 || target >= logits_column.rows()) {
    throw Error("autograd", "softmax_cross_entropy: bad target or shape");
  }
  Node* nl = logits_column.node();
  const Eigen::VectorXd z = nl->value.col(0);
  const double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp();
  const double s = e.sum();
  Matrix v(1, 1);
  v(0, 0) = -(z(target) - mx - std::log(s));
  Eigen::VectorXd p = e / s;
  return logits_column.graph().emit(std::move(v), {nl}, [nl, p, target](Node& out) {
    Matrix g = p;
    g(target, 0) -= 1.0;
    nl->accumulate(g * out.grad(0, 0));
  });
}

Var cosine_rows(const Var& a, const Var& b, double eps) {
  require_same_shape(a, b, "cosine_rows");
  Node* na = a.node();
  Node* nb = b.node();
  const Matrix& av = na->value;
  const Matrix& bv = nb->value;
  const Eigen::Index r = av.rows();
  Eigen::VectorXd na_norm = av.rowwise().norm();
  Eigen::VectorXd nb_norm = bv.rowwise().norm();
  Eigen::VectorXd dots = av.cwiseProduct(bv).rowwise().sum();
  Matrix v(r, 1);
  for (Eigen::Index i = 0; i < r; ++i) v(i, 0) = dots(i) / (na_norm(i) * nb_norm(i) + eps);
  return a.graph().emit(std::move(v), {na, nb}, [na, nb, na_norm, nb_norm, dots, eps](Node& out) {
    const Matrix& av = na->value;
    const Matrix& bv = nb->value;
    const Eigen::Index r = av.rows();
    Matrix ga = Matrix::Zero(av.rows(), av.cols());
    Matrix gb = Matrix::Zero(bv.rows(), bv.cols());
    for (Eigen::Index i = 0; i < r; ++i) {
      const double den = na_norm(i) * nb_norm(i) + eps;
      const double g = out.grad(i, 0);
      // d/da [a.b / (|a||b| + eps)] = b/den - a.b * |b| * a/|a| / den^2
      if (na_norm(i) > 0.0) {
        ga.row(i) = g * (bv.row(i) / den - dots(i) * nb_norm(i) / (na_norm(i) * den * den) * av.row(i));
      } else {
        ga.row(i) = g * bv.row(i) / den;
      }
      if (nb_norm(i) > 0.0) {
        gb.row(i) = g * (av.row(i) / den - dots(i) * na_norm(i) / (nb_norm(i) * den * den) * bv.row(i));
      } else {
        gb.row(i) = g * av.row(i) / den;
      }
    }
    if (na->requires_grad) na->accumulate(ga);
    if (nb->requires_grad) nb->accumulate(gb);
  });
}

Var softplus(const Var& a) {
  Node* na = a.node();
  Matrix v = na->value.unaryExpr([](double x) { return stable_softplus(x); });
  return a.graph().emit(std::move(v), {na}, [na](Node& out) {
    Matrix g = out.grad.cwiseProduct(na->value.unaryExpr([](double x) { return stable_sigmoid(x); }));
    na->accumulate(g);
  });
}

Var neg_log_softmax_first(const Var& logits_row) {
  if (logits_row.rows() != 1 || logits_row.cols() < 1) throw Error("autograd", "neg_log_softmax_first: expects 1xK");
  Node* nl = logits_row.node();
  const RowVector z = nl->value.row(0);
  const double mx = z.maxCoeff();
  RowVector e = (z.array() - mx).exp();
  const double s = e.sum();
  Matrix v(1, 1);
  v(0, 0) = -(z(0) - mx - std::log(s));
  RowVector p = e / s;
  return logits_row.graph().emit(std::move(v), {nl}, [nl, p](Node& out) {
    Matrix g = p;
    g(0, 0) -= 1.0;
    nl->accumulate(g * out.grad(0, 0));
  });
}

}  // namespace dtsg::ag
