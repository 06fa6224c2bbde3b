#pragma once

#include <functional>
#include <string>
#include <vector>

#include "expe/numerics/tensor.hpp"

namespace expe::num {

// Records differentiable operations in execution order. Execution order is a
// topological order of the computation graph, so walking the list backwards
// visits every consumer before its producers.
template <typename T>
class Tape {
 public:
  struct Operation {
    std::string name;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  void record(std::string name, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward) {
    ops_.push_back({std::move(name), std::move(inputs), std::move(output), std::move(backward)});
  }

  const std::vector<Operation>& operations() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  bool empty() const { return ops_.empty(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<Operation> ops_;
};

template <typename T>
Tape<T>*& active_tape_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

template <typename T>
Tape<T>* active_tape() {
  return active_tape_slot<T>();
}

// Makes `tape` the recording target on this thread for the scope's lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(active_tape_slot<T>()) {
    active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { active_tape_slot<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Suspends recording on this thread for the scope's lifetime.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(active_tape_slot<T>()) { active_tape_slot<T>() = nullptr; }
  ~NoGradScope() { active_tape_slot<T>() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in reverse.
// Gradients accumulate; zero them between steps.
template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss was not produced on a tape");
  }
  loss.grad()[0] += T{1};
  const auto& ops = tape.operations();
  for (auto it = ops.rbegin(); it != ops.rend(); ++it) it->backward();
}

namespace detail {

template <typename T>
bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Non-null when an op with these inputs must be recorded.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  auto* tape = active_tape<T>();
  return (tape && any_requires_grad<T>(inputs)) ? tape : nullptr;
}

}  // namespace detail

}  // namespace expe::num
