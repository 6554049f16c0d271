#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dhgnet/tensor.hpp"

namespace dhgnet {

/// Named trainable tensors. Ordered so that iteration (and therefore
/// optimizer updates and checkpoints) is deterministic.
using ParamStore = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

/// CSR grouping of entries into segments. Entry range
/// [offsets[s], offsets[s+1]) belongs to segment s, whose result lands in
/// output row targets[s]. Every segment must be non-empty.
struct Segments {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> targets;
  std::size_t num_outputs = 0;

  std::size_t num_segments() const { return targets.size(); }
  std::size_t num_entries() const { return offsets.back(); }

  void validate() const {
    if (offsets.empty() || offsets.front() != 0 || offsets.size() != targets.size() + 1) {
      throw ShapeError("segments: malformed offsets");
    }
    for (std::size_t s = 0; s < targets.size(); ++s) {
      if (offsets[s + 1] <= offsets[s]) throw ShapeError("segments: empty segment");
      if (targets[s] >= num_outputs) throw ShapeError("segments: target out of range");
    }
  }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive applications in execution order and replays their
/// backward rules in exact reverse order. A tape built with `record = false`
/// keeps only forward values (evaluation mode).
class Tape {
 public:
  /// Receives the tape and the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Tape&, const Tensor&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value) { return push(std::move(value), false, {}, "constant"); }

  /// Anonymous differentiable leaf.
  Var variable(Tensor value) { return push(std::move(value), record_, {}, "variable"); }

  /// Named parameter leaf; registering the same name twice returns the same node.
  Var param(const std::string& name, const Tensor& value) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) {
      return Var(this, it->second);
    }
    Var v = push(value, record_, {}, "param");
    param_ids_.emplace(name, v.id());
    param_order_.push_back(name);
    return v;
  }

  Var param(const ParamStore& store, const std::string& name) {
    auto it = store.find(name);
    if (it == store.end()) throw std::out_of_range("unknown parameter: " + name);
    return param(name, it->second);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Records a node. `backward` runs only when some input requires a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward, const char* op) {
    bool needs = false;
    for (const Var& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
    needs = needs && record_;
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{}, op);
  }

  /// Gradient buffer of a node (allocated lazily as zeros).
  Tensor& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
    return n.grad;
  }
  const Tensor& grad(Var v) { return grad_ref(v.id()); }
  bool wants_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Reverse sweep from a scalar root. Returns the gradient of every
  /// registered parameter; parameters the root does not depend on get zeros.
  Gradients backward(Var loss) {
    const Tensor& root = nodes_.at(loss.id()).value;
    if (root.rows() != 1 || root.cols() != 1) {
      throw ShapeError("backward: root must be a 1x1 scalar, got " + root.shape_string());
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_ref(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
    }
    Gradients out;
    for (const auto& name : param_order_) {
      const std::size_t id = param_ids_.at(name);
      out.emplace(name, grad_ref(id));
    }
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(backward)});
    return Var(this, nodes_.size() - 1);
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
  std::vector<std::string> param_order_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

namespace detail {

inline Tape& tape_of(Var a) { return *a.tape(); }

inline void accumulate(Tape& t, Var v, const Tensor& g) {
  if (t.wants_grad(v)) t.grad_ref(v.id()) += g;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace detail


}  // namespace dhgnet
