#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actlab {

/// Node kinds of the activation DSL.
enum class Op : std::uint8_t {
  Input,
  Const,
  // unary
  Neg,
  Abs,
  Sign,
  Sin,
  Cos,
  Tanh,
  Exp,
  Log1p,
  Sqrt,
  Relu,
  Gelu,
  Sinc,
  Sigmoid,
  // binary
  Add,
  Sub,
  Mul,
  Div,
  Min,
  Max,
  Pow,
  // whole-tensor statistics, broadcast back as a scalar
  BatchMean,
  BatchStd,
};

inline constexpr std::size_t kOpCount = static_cast<std::size_t>(Op::BatchStd) + 1;

enum class OpClass { Leaf, Unary, Binary, BatchStat };

struct OpInfo {
  Op op;
  std::string_view name;
  OpClass op_class;
  std::size_t arity;
};

const OpInfo& op_info(Op op) noexcept;
std::optional<Op> op_from_name(std::string_view name) noexcept;
std::span<const Op> unary_ops() noexcept;
std::span<const Op> binary_ops() noexcept;
std::span<const Op> batch_stat_ops() noexcept;

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  static Expr input();
  static Expr constant(double value);
  static Expr unary(Op op, Expr child);
  /// Throws NonConstExponent when `op` is Pow and `right` is not a constant.
  static Expr binary(Op op, Expr left, Expr right);
  static Expr batch_stat(Op op, Expr child);
  /// Generic constructor used by rewriting code; validates arity and the
  /// pow rule.
  static Expr make(Op op, std::vector<Expr> children, double value = 0.0);

  Op op() const noexcept;
  /// Literal value; meaningful only for Const nodes.
  double value() const noexcept;
  std::span<const Expr> children() const noexcept;
  const Expr& child(std::size_t i) const noexcept { return children()[i]; }
  bool is_leaf() const noexcept;

  std::size_t node_count() const noexcept;
  /// A single leaf has depth 1.
  std::size_t depth() const noexcept;
  bool uses_batch_stats() const noexcept;

  /// Structural equality; constants compare by bit pattern.
  friend bool operator==(const Expr& a, const Expr& b) noexcept;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

/// Parses the s-expression grammar:
///   expr := "x" | number | "(" op expr+ ")"
/// Throws SyntaxError, ArityError or Error{NonConstExponent}.
Expr parse(std::string_view text);

/// Like parse(), but the bare symbol `slot` is accepted as a constant with
/// the given value. Used to instantiate sweep templates.
Expr parse_template(std::string_view text, std::string_view slot, double value);

/// Canonical form: lowercase names, single spaces, shortest round-trip
/// numerals.
std::string print(const Expr& expr);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

/// Per-element FLOP charges.
class CostModel {
 public:
  static CostModel default_model();

  std::uint64_t cost(Op op) const noexcept {
    return table_[static_cast<std::size_t>(op)];
  }
  /// Leaves always cost zero; every other node must cost at least one.
  void set_cost(Op op, std::uint64_t flops);

 private:
  std::array<std::uint64_t, kOpCount> table_{};
};

struct FlopBudget {
  std::uint64_t max_flops_per_element = 64;
};

std::uint64_t cost(const Expr& expr, const CostModel& model = CostModel::default_model());
bool check_budget(const Expr& expr, const FlopBudget& budget,
                  const CostModel& model = CostModel::default_model());

}  // namespace actlab
