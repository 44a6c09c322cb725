// Random expression trees and malformed inputs for parser properties.
#pragma once

#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "actlab/expr.hpp"

namespace testsupport {

// Independent random tree generator: builds trees through the public
// constructors only, with literals drawn from awkward corners of double.
class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed) : rng_(seed) {}

  actlab::Expr tree(int depth) {
    if (depth <= 1 || coin(0.3)) return leaf();
    const int kind = pick(3);
    if (kind == 0) return actlab::Expr::unary(actlab::unary_ops()[pick(actlab::unary_ops().size())], tree(depth - 1));
    if (kind == 1) {
      const actlab::Op op = actlab::binary_ops()[pick(actlab::binary_ops().size())];
      if (op == actlab::Op::Pow) return actlab::Expr::binary(op, tree(depth - 1), actlab::Expr::constant(literal()));
      return actlab::Expr::binary(op, tree(depth - 1), tree(depth - 1));
    }
    return actlab::Expr::batch_stat(actlab::batch_stat_ops()[pick(2)], tree(depth - 1));
  }

 private:
  actlab::Expr leaf() { return coin(0.5) ? actlab::Expr::input() : actlab::Expr::constant(literal()); }

  double literal() {
    switch (pick(6)) {
      case 0: return static_cast<double>(pick(10));
      case 1: return std::uniform_real_distribution<double>(-1, 1)(rng_);
      case 2: return std::ldexp(std::uniform_real_distribution<double>(1, 2)(rng_), pick(600) - 300);
      case 3: return -0.0;
      case 4: return 0.1 * static_cast<double>(pick(100));
      default: {
        // Any finite bit pattern.
        for (;;) {
          const double d = std::bit_cast<double>(rng_());
          if (std::isfinite(d)) return d;
        }
      }
    }
  }

  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::mt19937_64 rng_;
};

// Inputs that must fail to parse, with the byte offset of the error.
struct MalformedCase {
  const char* text;
  std::size_t pos;
};

inline const std::vector<MalformedCase>& malformed_corpus() {
  static const std::vector<MalformedCase> corpus = {
      {"", 0},           {")", 0},           {"(", 1},          {"(add x", 6},
      {"(foo x)", 1},    {"x y", 2},         {"(add 1.2.3 x)", 5}, {"1e999", 0},
      {"nan", 0},        {"inf", 0},         {"(ADD x 1)", 1},  {"(add x ())", 8},
      {"((add x 1))", 1}, {"(sin x))", 7},   {"(x)", 1},        {"(sin 1e)", 5},
      {"\xc3\xa9", 0},   {"(sin x", 6},      {"( )", 2},        {"(sin\tx\n", 7},
      {"xx", 0},         {"(add x 0x10)", 7}, {"(sin ,x)", 5},  {"0.1.", 0},
  };
  return corpus;
}

}  // namespace testsupport
