#include "arflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace arflow::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::div: return "div";
    case Op::neg: return "neg";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::tanh: return "tanh";
    case Op::square: return "square";
    case Op::sqrt: return "sqrt";
    case Op::affine: return "affine";
    case Op::sum: return "sum";
    case Op::exp_clamped: return "exp_clamped";
  }
  return "?";
}

double Gradients::wrt(const Var& leaf) const {
  if (leaf.tape() != tape_) throw AutodiffError("gradient requested for a variable of another tape");
  auto it = std::lower_bound(leaf_ids_.begin(), leaf_ids_.end(), leaf.index());
  if (it == leaf_ids_.end() || *it != leaf.index()) {
    throw AutodiffError("gradient requested for non-leaf node " + std::to_string(leaf.index()));
  }
  return values_[static_cast<std::size_t>(it - leaf_ids_.begin())];
}

void Tape::clear() {
  nodes_.clear();
  edge_parent_.clear();
  edge_partial_.clear();
  clamp_events_ = 0;
}

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  nodes_.reserve(nodes);
  edge_parent_.reserve(edges);
  edge_partial_.reserve(edges);
}

std::span<const std::uint32_t> Tape::parents(std::uint32_t node) const {
  const Node& n = nodes_.at(node);
  return {edge_parent_.data() + n.first_edge, n.edge_count};
}

std::span<const double> Tape::partials(std::uint32_t node) const {
  const Node& n = nodes_.at(node);
  return {edge_partial_.data() + n.first_edge, n.edge_count};
}

void Tape::check_owned(const Var& v, Op op) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw AutodiffError(std::string("operand of '") + op_name(op) + "' does not belong to this tape");
  }
}

void Tape::domain_error(Op op, const Var& arg, const std::string& what) const {
  std::ostringstream os;
  os << "domain error in '" << op_name(op) << "' at node " << nodes_.size() << ": " << what
     << " (operand node " << arg.index_ << ", value " << arg.value_ << ")";
  throw AutodiffError(os.str());
}

Var Tape::push(Op op, double value) {
  nodes_.push_back(Node{op, static_cast<std::uint32_t>(edge_parent_.size()), 0, value});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

void Tape::edge(const Var& parent, double partial) {
  edge_parent_.push_back(parent.index_);
  edge_partial_.push_back(partial);
  ++nodes_.back().edge_count;
}

Var Tape::lift(double x) {
  if (!std::isfinite(x)) throw AutodiffError("lift: non-finite input");
  return push(Op::leaf, x);
}

Var Tape::apply(Op op, const Var& a) {
  check_owned(a, op);
  const double x = a.value_;
  switch (op) {
    case Op::neg: {
      Var out = push(op, -x);
      edge(a, -1.0);
      return out;
    }
    case Op::exp: {
      const double y = std::exp(x);
      Var out = push(op, y);
      edge(a, y);
      return out;
    }
    case Op::log: {
      if (!(x > 0.0)) domain_error(op, a, "argument must be positive");
      Var out = push(op, std::log(x));
      edge(a, 1.0 / x);
      return out;
    }
    case Op::tanh: {
      const double y = std::tanh(x);
      Var out = push(op, y);
      edge(a, 1.0 - y * y);
      return out;
    }
    case Op::square: {
      Var out = push(op, x * x);
      edge(a, 2.0 * x);
      return out;
    }
    case Op::sqrt: {
      if (x < 0.0) domain_error(op, a, "argument must be non-negative");
      const double y = std::sqrt(x);
      // d/dx sqrt at 0 is unbounded; the node is still recorded.
      Var out = push(op, y);
      edge(a, y > 0.0 ? 0.5 / y : INFINITY);
      return out;
    }
    default:
      throw AutodiffError(std::string("'") + op_name(op) + "' is not a unary operation");
  }
}

Var Tape::apply(Op op, const Var& a, const Var& b) {
  check_owned(a, op);
  check_owned(b, op);
  const double x = a.value_;
  const double y = b.value_;
  Var out;
  switch (op) {
    case Op::add:
      out = push(op, x + y);
      edge(a, 1.0);
      edge(b, 1.0);
      return out;
    case Op::sub:
      out = push(op, x - y);
      edge(a, 1.0);
      edge(b, -1.0);
      return out;
    case Op::mul:
      out = push(op, x * y);
      edge(a, y);
      edge(b, x);
      return out;
    case Op::div:
      if (y == 0.0) domain_error(op, b, "division by zero");
      out = push(op, x / y);
      edge(a, 1.0 / y);
      edge(b, -x / (y * y));
      return out;
    default:
      throw AutodiffError(std::string("'") + op_name(op) + "' is not a binary operation");
  }
}

Var Tape::add(const Var& a, double c) {
  check_owned(a, Op::add);
  Var out = push(Op::add, a.value_ + c);
  edge(a, 1.0);
  return out;
}

Var Tape::scale(const Var& a, double c) {
  check_owned(a, Op::mul);
  Var out = push(Op::mul, a.value_ * c);
  edge(a, c);
  return out;
}

Var Tape::rsub(double c, const Var& a) {
  check_owned(a, Op::sub);
  Var out = push(Op::sub, c - a.value_);
  edge(a, -1.0);
  return out;
}

Var Tape::rdiv(double c, const Var& a) {
  check_owned(a, Op::div);
  const double x = a.value_;
  if (x == 0.0) domain_error(Op::div, a, "division by zero");
  Var out = push(Op::div, c / x);
  edge(a, -c / (x * x));
  return out;
}

Var Tape::exp_clamped(const Var& a, double cap) {
  check_owned(a, Op::exp_clamped);
  if (a.value_ > cap) {
    ++clamp_events_;
    Var out = push(Op::exp_clamped, std::exp(cap));
    edge(a, 0.0);
    return out;
  }
  const double y = std::exp(a.value_);
  Var out = push(Op::exp_clamped, y);
  edge(a, y);
  return out;
}

Var Tape::affine(std::span<const Var> w, std::span<const Var> x, const Var& bias) {
  if (w.size() != x.size()) throw AutodiffError("affine: length mismatch");
  check_owned(bias, Op::affine);
  double acc = bias.value_;
  for (std::size_t i = 0; i < w.size(); ++i) {
    check_owned(w[i], Op::affine);
    check_owned(x[i], Op::affine);
    acc += w[i].value_ * x[i].value_;
  }
  Var out = push(Op::affine, acc);
  for (std::size_t i = 0; i < w.size(); ++i) {
    edge(w[i], x[i].value_);
    edge(x[i], w[i].value_);
  }
  edge(bias, 1.0);
  return out;
}

Var Tape::affine(std::span<const Var> w, std::span<const double> x, const Var& bias) {
  if (w.size() != x.size()) throw AutodiffError("affine: length mismatch");
  check_owned(bias, Op::affine);
  double acc = bias.value_;
  for (std::size_t i = 0; i < w.size(); ++i) {
    check_owned(w[i], Op::affine);
    acc += w[i].value_ * x[i];
  }
  Var out = push(Op::affine, acc);
  for (std::size_t i = 0; i < w.size(); ++i) edge(w[i], x[i]);
  edge(bias, 1.0);
  return out;
}

Var Tape::sum(std::span<const Var> terms) {
  if (terms.empty()) throw AutodiffError("sum: no terms");
  double acc = 0.0;
  for (const Var& t : terms) {
    check_owned(t, Op::sum);
    acc += t.value_;
  }
  Var out = push(Op::sum, acc);
  for (const Var& t : terms) edge(t, 1.0);
  return out;
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape_ != this || loss.index_ >= nodes_.size()) {
    throw AutodiffError("backward: loss does not belong to this tape");
  }
  std::vector<double> adjoint(loss.index_ + 1, 0.0);
  adjoint[loss.index_] = 1.0;
  for (std::uint32_t i = loss.index_ + 1; i-- > 0;) {
    const double g = adjoint[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    const std::uint32_t end = n.first_edge + n.edge_count;
    for (std::uint32_t e = n.first_edge; e < end; ++e) {
      adjoint[edge_parent_[e]] += g * edge_partial_[e];
    }
  }

  Gradients out;
  out.tape_ = this;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != Op::leaf) continue;
    out.leaf_ids_.push_back(i);
    out.values_.push_back(i <= loss.index_ ? adjoint[i] : 0.0);
  }
  return out;
}

namespace {
Tape* tape_of(const Var& a) {
  if (!a.valid()) throw AutodiffError("operation on an unbound variable");
  return a.tape();
}
}  // namespace

Var operator+(const Var& a, const Var& b) { return tape_of(a)->apply(Op::add, a, b); }
Var operator-(const Var& a, const Var& b) { return tape_of(a)->apply(Op::sub, a, b); }
Var operator*(const Var& a, const Var& b) { return tape_of(a)->apply(Op::mul, a, b); }
Var operator/(const Var& a, const Var& b) { return tape_of(a)->apply(Op::div, a, b); }
Var operator-(const Var& a) { return tape_of(a)->apply(Op::neg, a); }
Var operator+(const Var& a, double c) { return tape_of(a)->add(a, c); }
Var operator+(double c, const Var& a) { return tape_of(a)->add(a, c); }
Var operator-(const Var& a, double c) { return tape_of(a)->add(a, -c); }
Var operator-(double c, const Var& a) { return tape_of(a)->rsub(c, a); }
Var operator*(const Var& a, double c) { return tape_of(a)->scale(a, c); }
Var operator*(double c, const Var& a) { return tape_of(a)->scale(a, c); }
Var operator/(const Var& a, double c) {
  if (c == 0.0) throw AutodiffError("domain error in 'div': division by constant zero");
  return tape_of(a)->scale(a, 1.0 / c);
}
Var operator/(double c, const Var& a) { return tape_of(a)->rdiv(c, a); }

Var exp(const Var& a) { return tape_of(a)->apply(Op::exp, a); }
Var log(const Var& a) { return tape_of(a)->apply(Op::log, a); }
Var tanh(const Var& a) { return tape_of(a)->apply(Op::tanh, a); }
Var sqrt(const Var& a) { return tape_of(a)->apply(Op::sqrt, a); }
Var square(const Var& a) { return tape_of(a)->apply(Op::square, a); }
Var exp_clamped(const Var& a, double cap) { return tape_of(a)->exp_clamped(a, cap); }
Var affine(std::span<const Var> w, std::span<const Var> x, const Var& bias) {
  return tape_of(bias)->affine(w, x, bias);
}
Var affine(std::span<const Var> w, std::span<const double> x, const Var& bias) {
  return tape_of(bias)->affine(w, x, bias);
}
Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw AutodiffError("sum: no terms");
  return tape_of(terms.front())->sum(terms);
}

}  // namespace arflow::ad
