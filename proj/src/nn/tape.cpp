#include "dynembed/nn/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dynembed/errors.hpp"

namespace dynembed::nn {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string shape(const SparseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void mismatch(const char* op, const std::string& a, const std::string& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a + " and " + b);
}

Matrix loss_weights(const Matrix& target, double beta) {
  return (target.array() > 0.0).select(Matrix::Constant(target.rows(), target.cols(), beta),
                                       Matrix::Ones(target.rows(), target.cols()));
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw ArgumentError("unknown activation '" + name + "'");
}

const Matrix& Tape::val(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Matrix& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = val(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

const Matrix& Tape::value(Var v) const {
  if (!v.valid() || v.id() >= static_cast<int>(nodes_.size())) {
    throw ArgumentError("variable does not belong to this tape");
  }
  return val(v.id());
}

const Matrix& Tape::grad(Var v) const {
  value(v);
  return nodes_[v.id()].grad;
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> backward) {
  if (!value.allFinite()) throw std::domain_error("non-finite value produced on tape");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(ParamStore& store, const std::string& name) {
  Param& p = store.at(name);
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(id);
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.cols() != y.rows()) mismatch("matmul", shape(x), shape(y));
  const int ia = a.id(), ib = b.id();
  Matrix out = x * y;
  return push(std::move(out), needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    if (t.needs(ia)) t.grad_slot(ia).noalias() += self.grad * t.val(ib).transpose();
    if (t.needs(ib)) t.grad_slot(ib).noalias() += t.val(ia).transpose() * self.grad;
  });
}

Var Tape::matmul_nt(Var x, Var w) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  if (xv.cols() != wv.cols()) mismatch("matmul_nt", shape(xv), shape(wv));
  const int ix = x.id(), iw = w.id();
  Matrix out = xv * wv.transpose();
  return push(std::move(out), needs(ix) || needs(iw), [ix, iw](Tape& t, Node& self) {
    if (t.needs(ix)) t.grad_slot(ix).noalias() += self.grad * t.val(iw);
    if (t.needs(iw)) t.grad_slot(iw).noalias() += self.grad.transpose() * t.val(ix);
  });
}

Var Tape::matmul(const SparseMatrix& x, Var w) {
  const Matrix& wv = value(w);
  if (x.cols() != wv.rows()) mismatch("matmul", shape(x), shape(wv));
  const int iw = w.id();
  Matrix out = x * wv;
  return push(std::move(out), needs(iw), [iw, x](Tape& t, Node& self) {
    t.grad_slot(iw).noalias() += x.transpose() * self.grad;
  });
}

Var Tape::linear(const Input& x, Var w) {
  return x.sparse ? matmul(*x.sparse, w) : matmul(x.var, w);
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) mismatch("add", shape(x), shape(y));
  const int ia = a.id(), ib = b.id();
  return push(x + y, needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    if (t.needs(ia)) t.grad_slot(ia) += self.grad;
    if (t.needs(ib)) t.grad_slot(ib) += self.grad;
  });
}

Var Tape::add_bias(Var x, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) mismatch("add_bias", shape(xv), shape(bv));
  const int ix = x.id(), ib = bias.id();
  Matrix out = xv.rowwise() + bv.row(0);
  return push(std::move(out), needs(ix) || needs(ib), [ix, ib](Tape& t, Node& self) {
    if (t.needs(ix)) t.grad_slot(ix) += self.grad;
    if (t.needs(ib)) t.grad_slot(ib) += self.grad.colwise().sum();
  });
}

Var Tape::hadamard(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) mismatch("hadamard", shape(x), shape(y));
  const int ia = a.id(), ib = b.id();
  Matrix out = x.cwiseProduct(y);
  return push(std::move(out), needs(ia) || needs(ib), [ia, ib](Tape& t, Node& self) {
    if (t.needs(ia)) t.grad_slot(ia) += self.grad.cwiseProduct(t.val(ib));
    if (t.needs(ib)) t.grad_slot(ib) += self.grad.cwiseProduct(t.val(ia));
  });
}

Var Tape::scale(Var x, double factor) {
  const int ix = x.id();
  return push(value(x) * factor, needs(ix), [ix, factor](Tape& t, Node& self) {
    t.grad_slot(ix) += self.grad * factor;
  });
}

Var Tape::activate(Var x, Activation a) {
  const Matrix& xv = value(x);
  const int ix = x.id();
  Matrix out;
  switch (a) {
    case Activation::kIdentity: out = xv; break;
    case Activation::kRelu: out = xv.cwiseMax(0.0); break;
    case Activation::kSigmoid: out = (1.0 + (-xv.array()).exp()).inverse().matrix(); break;
    case Activation::kTanh: out = xv.array().tanh().matrix(); break;
  }
  return push(std::move(out), needs(ix), [ix, a](Tape& t, Node& self) {
    const auto y = self.value.array();
    Matrix& g = t.grad_slot(ix);
    switch (a) {
      case Activation::kIdentity: g += self.grad; break;
      case Activation::kRelu:
        g.array() += (t.val(ix).array() > 0.0).select(self.grad.array(), 0.0);
        break;
      case Activation::kSigmoid: g.array() += self.grad.array() * y * (1.0 - y); break;
      case Activation::kTanh: g.array() += self.grad.array() * (1.0 - y.square()); break;
    }
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.rows() != y.rows()) mismatch("concat_cols", shape(x), shape(y));
  const int ia = a.id(), ib = b.id();
  const Eigen::Index split = x.cols();
  Matrix out(x.rows(), x.cols() + y.cols());
  out << x, y;
  return push(std::move(out), needs(ia) || needs(ib), [ia, ib, split](Tape& t, Node& self) {
    if (t.needs(ia)) t.grad_slot(ia) += self.grad.leftCols(split);
    if (t.needs(ib)) t.grad_slot(ib) += self.grad.rightCols(self.grad.cols() - split);
  });
}

Var Tape::slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
  const Matrix& xv = value(x);
  if (start < 0 || count < 0 || start + count > xv.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") outside " + shape(xv));
  }
  const int ix = x.id();
  Matrix out = xv.middleCols(start, count);
  return push(std::move(out), needs(ix), [ix, start, count](Tape& t, Node& self) {
    t.grad_slot(ix).middleCols(start, count) += self.grad;
  });
}

Var Tape::weighted_recon_loss(Var pred, const Matrix& target, double beta) {
  const Matrix& p = value(pred);
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    mismatch("weighted_recon_loss", shape(p), shape(target));
  }
  LossValue loss = nn::weighted_recon_loss(p, target, beta);
  const int ip = pred.id();
  Matrix out(1, 1);
  out(0, 0) = loss.value;
  return push(std::move(out), needs(ip),
              [ip, g = std::move(loss.gradient)](Tape& t, Node& self) {
                t.grad_slot(ip) += self.grad(0, 0) * g;
              });
}

Var Tape::sum(Var x) {
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = value(x).sum();
  return push(std::move(out), needs(ix), [ix](Tape& t, Node& self) {
    t.grad_slot(ix).array() += self.grad(0, 0);
  });
}

void Tape::backward(Var output) {
  const Matrix& out = value(output);
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError("backward needs a 1x1 output, got " + shape(out));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  grad_slot(output.id())(0, 0) = 1.0;
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n);
    if (n.param) n.param->grad += n.grad;
  }
}

LossValue weighted_recon_loss(const Matrix& pred, const Matrix& target, double beta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    mismatch("weighted_recon_loss", shape(pred), shape(target));
  }
  if (!(beta >= 1.0)) throw ArgumentError("beta must be >= 1");
  const Matrix b2 = loss_weights(target, beta).array().square().matrix();
  const Matrix diff = pred - target;
  LossValue out;
  out.value = (b2.array() * diff.array().square()).sum();
  out.gradient = (2.0 * b2.array() * diff.array()).matrix();
  return out;
}

}  // namespace dynembed::nn
