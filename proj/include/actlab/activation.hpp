#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "actlab/eval.hpp"
#include "actlab/expr.hpp"
#include "actlab/tensor.hpp"

namespace actlab {

enum class Trainability { ExactAd, FiniteDifference, ForwardOnly };

const char* to_string(Trainability t) noexcept;

/// Per-call state an activation needs for its backward pass.
struct ActivationCache {
  Trace trace;                   // DSL activations
  std::optional<Tensor2> input;  // native activations
};

/// Central-difference derivative of a scalar function, applied elementwise.
Tensor2 central_difference(const std::function<double(double)>& f, const Tensor2& x,
                           double h = 1e-5);

/// A nonlinearity the MLP can run: a compiled DSL expression, a native
/// pointwise function differentiated numerically, or a native tensor
/// function that can only run forward.
class Activation {
 public:
  static Activation from_expr(const Expr& expr);
  static Activation pointwise(std::string name, std::function<double(double)> f,
                              double fd_step = 1e-5);
  static Activation forward_only(std::string name,
                                 std::function<Tensor2(const Tensor2&)> f);

  const std::string& name() const noexcept;
  Trainability trainability() const noexcept;
  bool trainable() const noexcept { return trainability() != Trainability::ForwardOnly; }
  /// The DSL expression, when there is one.
  const std::optional<Expr>& expr() const noexcept;

  Tensor2 forward(const Tensor2& z) const;
  Tensor2 forward(const Tensor2& z, ActivationCache& cache) const;
  /// Throws NotTrainable for forward-only activations.
  Tensor2 backward(const ActivationCache& cache, const Tensor2& upstream) const;

  class Impl;

 private:
  explicit Activation(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace actlab
