#pragma once

// Scalar reverse-mode differentiation on an append-only tape.
//
// Every node stores its operation kind, its value, and the local partial
// derivative with respect to each parent. Parents always have smaller indices
// than their children, so a single reverse sweep over the node array
// propagates adjoints in topological order.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arflow::ad {

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  div,
  neg,
  exp,
  log,
  tanh,
  square,
  sqrt,
  affine,       // sum_i w_i * x_i + bias, fused
  sum,          // n-ary sum
  exp_clamped,  // exp(min(x, cap))
};

const char* op_name(Op op);

/// Raised for domain violations (log of non-positive, division by zero, ...)
/// and for misuse such as mixing variables from different tapes.
class AutodiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; does not own the tape.
class Var {
 public:
  Var() = default;

  double value() const { return value_; }
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index, double value)
      : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  double value_ = 0.0;
};

/// Adjoints of the leaves reached by one backward sweep. Intermediate
/// adjoints are not retained.
class Gradients {
 public:
  /// d(loss)/d(leaf). Throws if `leaf` is not a leaf of the originating tape.
  double wrt(const Var& leaf) const;

  /// Leaf adjoints in the order the leaves were lifted.
  std::span<const double> leaf_values() const { return values_; }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<std::uint32_t> leaf_ids_;
  std::vector<double> values_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Drops every node but keeps allocated storage.
  void clear();
  void reserve(std::size_t nodes, std::size_t edges);

  Var lift(double x);

  Var apply(Op op, const Var& a);
  Var apply(Op op, const Var& a, const Var& b);

  // Mixed constant forms. Constants are folded into the local partials and
  // never become nodes.
  Var add(const Var& a, double c);
  Var scale(const Var& a, double c);
  Var rsub(double c, const Var& a);  // c - a
  Var rdiv(double c, const Var& a);  // c / a

  Var exp_clamped(const Var& a, double cap);

  Var affine(std::span<const Var> w, std::span<const Var> x, const Var& bias);
  Var affine(std::span<const Var> w, std::span<const double> x, const Var& bias);
  Var sum(std::span<const Var> terms);

  Gradients backward(const Var& loss) const;

  std::size_t size() const { return nodes_.size(); }
  Op kind(std::uint32_t node) const { return nodes_.at(node).kind; }
  double value(std::uint32_t node) const { return nodes_.at(node).value; }
  std::span<const std::uint32_t> parents(std::uint32_t node) const;
  std::span<const double> partials(std::uint32_t node) const;

  /// Number of exp_clamped evaluations whose argument exceeded the cap.
  std::size_t clamp_events() const { return clamp_events_; }

 private:
  struct Node {
    Op kind;
    std::uint32_t first_edge;
    std::uint32_t edge_count;
    double value;
  };

  void check_owned(const Var& v, Op op) const;
  Var push(Op op, double value);
  void edge(const Var& parent, double partial);
  [[noreturn]] void domain_error(Op op, const Var& arg, const std::string& what) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> edge_parent_;
  std::vector<double> edge_partial_;
  std::size_t clamp_events_ = 0;
};

// Operator sugar. All forms route through Tape::apply or the constant forms.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var exp_clamped(const Var& a, double cap);
Var affine(std::span<const Var> w, std::span<const Var> x, const Var& bias);
Var affine(std::span<const Var> w, std::span<const double> x, const Var& bias);
Var sum(std::span<const Var> terms);

}  // namespace arflow::ad
