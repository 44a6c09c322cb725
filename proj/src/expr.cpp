#include "actlab/expr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <system_error>

#include "actlab/error.hpp"

namespace actlab {

struct Expr::Node {
  Op op;
  double value = 0.0;
  std::vector<Expr> children;
  std::size_t node_count = 1;
  std::size_t depth = 1;
  bool batch_stats = false;
};

namespace {

constexpr std::array<OpInfo, kOpCount> kOps{{
    {Op::Input, "x", OpClass::Leaf, 0},
    {Op::Const, "const", OpClass::Leaf, 0},
    {Op::Neg, "neg", OpClass::Unary, 1},
    {Op::Abs, "abs", OpClass::Unary, 1},
    {Op::Sign, "sign", OpClass::Unary, 1},
    {Op::Sin, "sin", OpClass::Unary, 1},
    {Op::Cos, "cos", OpClass::Unary, 1},
    {Op::Tanh, "tanh", OpClass::Unary, 1},
    {Op::Exp, "exp", OpClass::Unary, 1},
    {Op::Log1p, "log1p", OpClass::Unary, 1},
    {Op::Sqrt, "sqrt", OpClass::Unary, 1},
    {Op::Relu, "relu", OpClass::Unary, 1},
    {Op::Gelu, "gelu", OpClass::Unary, 1},
    {Op::Sinc, "sinc", OpClass::Unary, 1},
    {Op::Sigmoid, "sigmoid", OpClass::Unary, 1},
    {Op::Add, "add", OpClass::Binary, 2},
    {Op::Sub, "sub", OpClass::Binary, 2},
    {Op::Mul, "mul", OpClass::Binary, 2},
    {Op::Div, "div", OpClass::Binary, 2},
    {Op::Min, "min", OpClass::Binary, 2},
    {Op::Max, "max", OpClass::Binary, 2},
    {Op::Pow, "pow", OpClass::Binary, 2},
    {Op::BatchMean, "batch-mean", OpClass::BatchStat, 1},
    {Op::BatchStd, "batch-std", OpClass::BatchStat, 1},
}};

constexpr std::array kUnary{Op::Neg,  Op::Abs,   Op::Sign, Op::Sin,  Op::Cos,
                            Op::Tanh, Op::Exp,   Op::Log1p, Op::Sqrt, Op::Relu,
                            Op::Gelu, Op::Sinc,  Op::Sigmoid};
constexpr std::array kBinary{Op::Add, Op::Sub, Op::Mul, Op::Div,
                             Op::Min, Op::Max, Op::Pow};
constexpr std::array kBatchStat{Op::BatchMean, Op::BatchStd};

constexpr std::size_t kMaxParseNesting = 256;

[[noreturn]] void throw_nonconst_exponent(std::size_t position) {
  throw Error(ErrorKind::NonConstExponent,
              "pow at offset " + std::to_string(position) +
                  " requires a constant exponent");
}

}  // namespace

const OpInfo& op_info(Op op) noexcept { return kOps[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) noexcept {
  for (const auto& info : kOps) {
    if (info.op_class != OpClass::Leaf && info.name == name) return info.op;
  }
  return std::nullopt;
}

std::span<const Op> unary_ops() noexcept { return kUnary; }
std::span<const Op> binary_ops() noexcept { return kBinary; }
std::span<const Op> batch_stat_ops() noexcept { return kBatchStat; }

// ---------------------------------------------------------------------------
// Expr

Expr Expr::make(Op op, std::vector<Expr> children, double value) {
  const auto& info = op_info(op);
  if (children.size() != info.arity) {
    throw ArityError(std::string(info.name), children.size(), info.arity, 0);
  }
  if (op == Op::Pow && children[1].op() != Op::Const) throw_nonconst_exponent(0);
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value = op == Op::Const ? value : 0.0;
  node->batch_stats = info.op_class == OpClass::BatchStat;
  std::size_t max_child_depth = 0;
  for (const auto& c : children) {
    node->node_count += c.node_count();
    max_child_depth = std::max(max_child_depth, c.depth());
    node->batch_stats = node->batch_stats || c.uses_batch_stats();
  }
  node->depth = 1 + max_child_depth;
  node->children = std::move(children);
  return Expr(std::move(node));
}

Expr Expr::input() { return make(Op::Input, {}); }

Expr Expr::constant(double value) { return make(Op::Const, {}, value); }

Expr Expr::unary(Op op, Expr child) {
  if (op_info(op).op_class != OpClass::Unary) {
    throw Error(ErrorKind::InvalidArgument, "not a unary operator");
  }
  return make(op, {std::move(child)});
}

Expr Expr::binary(Op op, Expr left, Expr right) {
  if (op_info(op).op_class != OpClass::Binary) {
    throw Error(ErrorKind::InvalidArgument, "not a binary operator");
  }
  return make(op, {std::move(left), std::move(right)});
}

Expr Expr::batch_stat(Op op, Expr child) {
  if (op_info(op).op_class != OpClass::BatchStat) {
    throw Error(ErrorKind::InvalidArgument, "not a batch statistic");
  }
  return make(op, {std::move(child)});
}

Op Expr::op() const noexcept { return node_->op; }
double Expr::value() const noexcept { return node_->value; }
std::span<const Expr> Expr::children() const noexcept { return node_->children; }
bool Expr::is_leaf() const noexcept { return node_->children.empty(); }
std::size_t Expr::node_count() const noexcept { return node_->node_count; }
std::size_t Expr::depth() const noexcept { return node_->depth; }
bool Expr::uses_batch_stats() const noexcept { return node_->batch_stats; }

bool operator==(const Expr& a, const Expr& b) noexcept {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op() || a.node_count() != b.node_count()) return false;
  if (a.op() == Op::Const) {
    return std::bit_cast<std::uint64_t>(a.value()) ==
           std::bit_cast<std::uint64_t>(b.value());
  }
  const auto ca = a.children();
  const auto cb = b.children();
  return std::equal(ca.begin(), ca.end(), cb.begin(), cb.end());
}

// ---------------------------------------------------------------------------
// Parser

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// [sign] digits [. digits] [(e|E) [sign] digits], with at least one mantissa
// digit on either side of the point.
bool is_decimal_literal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t mantissa = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++mantissa;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++mantissa;
  }
  if (mantissa == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  return i == s.size();
}

class Parser {
 public:
  Parser(std::string_view text, std::string_view slot, double slot_value)
      : text_(text), slot_(slot), slot_value_(slot_value) {}

  Expr parse_all() {
    Expr e = parse_expr(0);
    skip_space();
    if (pos_ != text_.size()) {
      throw SyntaxError(pos_, {"end of input"}, peek_token());
    }
    return e;
  }

 private:
  enum class Tok { End, Open, Close, Atom };

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  Tok peek() {
    skip_space();
    if (pos_ >= text_.size()) return Tok::End;
    if (text_[pos_] == '(') return Tok::Open;
    if (text_[pos_] == ')') return Tok::Close;
    return Tok::Atom;
  }

  std::string_view read_atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  std::string peek_token() {
    switch (peek()) {
      case Tok::End: return "";
      case Tok::Open: return "(";
      case Tok::Close: return ")";
      case Tok::Atom: {
        const std::size_t save = pos_;
        std::string atom(read_atom());
        pos_ = save;
        return atom;
      }
    }
    return "";
  }

  Expr parse_expr(std::size_t nesting) {
    static const std::vector<std::string> kExprStart{"'x'", "number", "'('"};
    switch (peek()) {
      case Tok::End:
        throw SyntaxError(pos_, kExprStart, "");
      case Tok::Close:
        throw SyntaxError(pos_, kExprStart, ")");
      case Tok::Atom:
        return parse_atom();
      case Tok::Open:
        break;
    }
    if (nesting >= kMaxParseNesting) {
      throw SyntaxError(pos_, {"expression nested at most 256 deep"}, "(");
    }
    const std::size_t open_pos = pos_;
    ++pos_;
    if (peek() != Tok::Atom) {
      throw SyntaxError(pos_, {"operator name"}, peek_token());
    }
    const std::size_t op_pos = pos_;
    const std::string_view name = read_atom();
    const auto op = op_from_name(name);
    if (!op) throw SyntaxError(op_pos, {"operator name"}, std::string(name));

    std::vector<Expr> args;
    while (true) {
      const Tok t = peek();
      if (t == Tok::Close) {
        ++pos_;
        break;
      }
      if (t == Tok::End) {
        throw SyntaxError(pos_, {"expression", "')'"}, "");
      }
      args.push_back(parse_expr(nesting + 1));
    }
    const auto& info = op_info(*op);
    if (args.size() != info.arity) {
      throw ArityError(std::string(info.name), args.size(), info.arity, open_pos);
    }
    if (*op == Op::Pow && args[1].op() != Op::Const) {
      throw_nonconst_exponent(open_pos);
    }
    return Expr::make(*op, std::move(args));
  }

  Expr parse_atom() {
    const std::size_t start = pos_;
    const std::string_view atom = read_atom();
    if (atom == "x") return Expr::input();
    if (!slot_.empty() && atom == slot_) return Expr::constant(slot_value_);
    if (!is_decimal_literal(atom)) {
      throw SyntaxError(start, {"'x'", "number", "'('"}, std::string(atom));
    }
    std::string_view digits = atom;
    if (digits.front() == '+') digits.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() ||
        !std::isfinite(value)) {
      throw SyntaxError(start, {"finite number"}, std::string(atom));
    }
    return Expr::constant(value);
  }

  std::string_view text_;
  std::string_view slot_;
  double slot_value_;
  std::size_t pos_ = 0;
};

void print_into(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Input:
      out += 'x';
      return;
    case Op::Const:
      out += format_double(e.value());
      return;
    default:
      break;
  }
  out += '(';
  out += op_info(e.op()).name;
  for (const auto& c : e.children()) {
    out += ' ';
    print_into(c, out);
  }
  out += ')';
}

}  // namespace

Expr parse(std::string_view text) { return Parser(text, {}, 0.0).parse_all(); }

Expr parse_template(std::string_view text, std::string_view slot, double value) {
  if (slot.empty() || slot == "x" || is_decimal_literal(slot) ||
      op_from_name(slot)) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid template slot name '" + std::string(slot) + "'");
  }
  return Parser(text, slot, value).parse_all();
}

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string print(const Expr& expr) {
  std::string out;
  print_into(expr, out);
  return out;
}

// ---------------------------------------------------------------------------
// Cost

CostModel CostModel::default_model() {
  CostModel m;
  for (Op op : {Op::Add, Op::Sub, Op::Mul, Op::Neg, Op::Abs, Op::Sign, Op::Min,
                Op::Max, Op::Relu}) {
    m.table_[static_cast<std::size_t>(op)] = 1;
  }
  for (Op op : {Op::Div, Op::Sin, Op::Cos, Op::Tanh, Op::Sigmoid, Op::Exp,
                Op::Log1p, Op::Sqrt}) {
    m.table_[static_cast<std::size_t>(op)] = 4;
  }
  m.table_[static_cast<std::size_t>(Op::Gelu)] = 8;
  m.table_[static_cast<std::size_t>(Op::Sinc)] = 6;
  m.table_[static_cast<std::size_t>(Op::Pow)] = 8;
  m.table_[static_cast<std::size_t>(Op::BatchMean)] = 2;
  m.table_[static_cast<std::size_t>(Op::BatchStd)] = 4;
  return m;
}

void CostModel::set_cost(Op op, std::uint64_t flops) {
  const bool leaf = op_info(op).op_class == OpClass::Leaf;
  if (leaf ? flops != 0 : flops < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "invalid cost for '" + std::string(op_info(op).name) + "'");
  }
  table_[static_cast<std::size_t>(op)] = flops;
}

std::uint64_t cost(const Expr& expr, const CostModel& model) {
  std::uint64_t total = model.cost(expr.op());
  for (const auto& c : expr.children()) total += cost(c, model);
  return total;
}

bool check_budget(const Expr& expr, const FlopBudget& budget, const CostModel& model) {
  return cost(expr, model) <= budget.max_flops_per_element;
}

}  // namespace actlab
