#pragma once

#include <cstddef>
#include <vector>

#include "actlab/expr.hpp"
#include "actlab/tensor.hpp"

namespace actlab {

/// Additive epsilon on batch-std outputs.
inline constexpr double kStdEpsilon = 1e-6;
/// Magnitude added to divisors, keeping their sign.
inline constexpr double kDivEpsilon = 1e-12;
/// log1p inputs are clamped from below to -1 + kLog1pMargin.
inline constexpr double kLog1pMargin = 1e-12;

/// Scalar kernels shared by the evaluator and the zoo.
/// tanh through exp/expm1; within a few ulp of std::tanh and about twice as fast.
double fast_tanh(double x) noexcept;
double gelu(double x) noexcept;
double gelu_grad(double x) noexcept;
/// Normalized sinc, sin(pi x) / (pi x), with sinc(0) = 1.
double sinc(double x) noexcept;
double sinc_grad(double x) noexcept;
double sigmoid(double x) noexcept;

/// Node values recorded by a forward pass; input to backward().
/// Slots whose value is the same for every element (constants, batch
/// statistics and anything computed only from them) hold a single value.
struct Trace {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> values;  // one per program slot
  // Side values backward() can reuse: tanh inside gelu, cos for sin.
  std::vector<std::vector<double>> aux;
};

/// An expression flattened into postorder. Slot i holds the values of the
/// i-th node visited in postorder, so slot ids double as node ids in
/// NonFiniteOutput errors.
class CompiledExpr {
 public:
  explicit CompiledExpr(const Expr& expr);

  std::size_t size() const noexcept { return code_.size(); }

  Tensor2 forward(const Tensor2& input) const;
  /// Forward pass that keeps every intermediate for backward().
  Tensor2 forward(const Tensor2& input, Trace& trace) const;
  /// Vector-Jacobian product: gradient of sum(upstream * output) with respect
  /// to the input. Batch statistics contribute their full cross-element
  /// terms.
  Tensor2 backward(const Trace& trace, const Tensor2& upstream) const;

 private:
  struct Instr {
    Op op;
    double value;
    std::size_t lhs;
    std::size_t rhs;
  };
  void emit(const Expr& e);
  Tensor2 run(const Tensor2& input, Trace& trace, bool keep_aux) const;

  std::vector<Instr> code_;
};

Tensor2 forward(const Expr& expr, const Tensor2& input);

struct ForwardBackward {
  Tensor2 output;
  Tensor2 grad;
};

/// Output and d(sum of outputs)/d(input). For pointwise expressions this is
/// the elementwise derivative.
ForwardBackward forward_backward(const Expr& expr, const Tensor2& input);

}  // namespace actlab
