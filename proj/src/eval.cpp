#include "actlab/eval.hpp"

#include <cmath>
#include <numbers>

#include "actlab/error.hpp"

namespace actlab {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluK = 0.044715;

double guarded_divisor(double d) noexcept {
  return d < 0.0 ? d - kDivEpsilon : d + kDivEpsilon;
}

double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

bool all_finite(const std::vector<double>& v) noexcept {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double mean_of(const std::vector<double>& v) noexcept {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std_of(const std::vector<double>& v, double mean) noexcept {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double gelu(double x) noexcept {
  const double t = fast_tanh(kGeluC * (x + kGeluK * x * x * x));
  return 0.5 * x * (1.0 + t);
}

double gelu_grad(double x) noexcept {
  const double t = fast_tanh(kGeluC * (x + kGeluK * x * x * x));
  return 0.5 * (1.0 + t) +
         0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluK * x * x);
}

double sinc(double x) noexcept {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double sinc_grad(double x) noexcept {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  if (std::abs(x) < 1e-3) {
    // Series of the derivative; the closed form cancels catastrophically.
    const double x2 = x * x;
    return x * (-pi2 / 3.0 + x2 * (pi2 * pi2 / 30.0 - x2 * pi2 * pi2 * pi2 / 840.0));
  }
  return (std::cos(std::numbers::pi * x) - sinc(x)) / x;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CompiledExpr::CompiledExpr(const Expr& expr) {
  code_.reserve(expr.node_count());
  emit(expr);
}

void CompiledExpr::emit(const Expr& e) {
  std::size_t lhs = 0, rhs = 0;
  const auto children = e.children();
  if (!children.empty()) {
    emit(children[0]);
    lhs = code_.size() - 1;
  }
  if (children.size() > 1) {
    emit(children[1]);
    rhs = code_.size() - 1;
  }
  code_.push_back(Instr{e.op(), e.value(), lhs, rhs});
}

Tensor2 CompiledExpr::forward(const Tensor2& input) const {
  Trace trace;
  return run(input, trace, false);
}

Tensor2 CompiledExpr::forward(const Tensor2& input, Trace& trace) const {
  return run(input, trace, true);
}

namespace {

// A slot holds either n values or a single value broadcast over the batch.
struct Operand {
  const double* p;
  bool scalar;
};

Operand operand(const std::vector<double>& v) noexcept { return {v.data(), v.size() == 1}; }

template <class F>
void unary(std::vector<double>& out, Operand a, std::size_t n, F f) {
  const std::size_t m = a.scalar ? 1 : n;
  out.resize(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = f(a.p[k]);
}

template <class F>
void binary(std::vector<double>& out, Operand a, Operand b, std::size_t n, F f) {
  if (a.scalar && b.scalar) {
    out.assign(1, f(a.p[0], b.p[0]));
    return;
  }
  out.resize(n);
  if (a.scalar) {
    const double x = a.p[0];
    for (std::size_t k = 0; k < n; ++k) out[k] = f(x, b.p[k]);
  } else if (b.scalar) {
    const double y = b.p[0];
    for (std::size_t k = 0; k < n; ++k) out[k] = f(a.p[k], y);
  } else {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(a.p[k], b.p[k]);
  }
}

// Gradient sink for one slot; scalar slots sum the contributions of every
// batch element.
struct Sink {
  double* p;
  bool scalar;
  void add(std::size_t k, double v) const noexcept { p[scalar ? 0 : k] += v; }
};

}  // namespace

double fast_tanh(double x) noexcept {
  const double ax = std::abs(x);
  if (ax > 20.0) return std::copysign(1.0, x);
  if (ax < 0.625) {
    const double t = std::expm1(2.0 * ax);
    return std::copysign(t / (t + 2.0), x);
  }
  const double e = std::exp(2.0 * ax);
  return std::copysign(1.0 - 2.0 / (e + 1.0), x);
}

Tensor2 CompiledExpr::run(const Tensor2& input, Trace& trace, bool keep_aux) const {
  const std::size_t n = input.size();
  trace.rows = input.rows();
  trace.cols = input.cols();
  trace.values.assign(code_.size(), {});
  trace.aux.assign(code_.size(), {});
  const auto in = input.data();

  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    auto& out = trace.values[i];
    const auto cls = op_info(ins.op).op_class;
    const Operand a = cls == OpClass::Leaf ? Operand{nullptr, true}
                                           : operand(trace.values[ins.lhs]);
    const Operand b = cls == OpClass::Binary ? operand(trace.values[ins.rhs])
                                             : Operand{nullptr, true};
    switch (ins.op) {
      case Op::Input:
        out.assign(in.begin(), in.end());
        break;
      case Op::Const:
        out.assign(1, ins.value);
        break;
      case Op::Neg:
        unary(out, a, n, [](double x) { return -x; });
        break;
      case Op::Abs:
        unary(out, a, n, [](double x) { return std::abs(x); });
        break;
      case Op::Sign:
        unary(out, a, n, sign_of);
        break;
      case Op::Sin:
        if (keep_aux) {
          // One loop so the compiler can pair sin and cos into sincos.
          const std::size_t m = a.scalar ? 1 : n;
          auto& c = trace.aux[i];
          out.resize(m);
          c.resize(m);
          for (std::size_t k = 0; k < m; ++k) {
            out[k] = std::sin(a.p[k]);
            c[k] = std::cos(a.p[k]);
          }
        } else {
          unary(out, a, n, [](double x) { return std::sin(x); });
        }
        break;
      case Op::Cos:
        unary(out, a, n, [](double x) { return std::cos(x); });
        break;
      case Op::Tanh:
        unary(out, a, n, fast_tanh);
        break;
      case Op::Exp:
        unary(out, a, n, [](double x) { return std::exp(x); });
        break;
      case Op::Log1p:
        unary(out, a, n, [](double x) { return std::log1p(std::max(x, -1.0 + kLog1pMargin)); });
        break;
      case Op::Sqrt:
        unary(out, a, n, [](double x) { return std::sqrt(std::max(x, 0.0)); });
        break;
      case Op::Relu:
        unary(out, a, n, [](double x) { return x > 0.0 ? x : 0.0; });
        break;
      case Op::Gelu:
        if (keep_aux) {
          unary(trace.aux[i], a, n,
                [](double x) { return fast_tanh(kGeluC * (x + kGeluK * x * x * x)); });
          const double* t = trace.aux[i].data();
          out.resize(trace.aux[i].size());
          for (std::size_t k = 0; k < out.size(); ++k) out[k] = 0.5 * a.p[k] * (1.0 + t[k]);
        } else {
          unary(out, a, n, gelu);
        }
        break;
      case Op::Sinc:
        unary(out, a, n, sinc);
        break;
      case Op::Sigmoid:
        unary(out, a, n, sigmoid);
        break;
      case Op::Add:
        binary(out, a, b, n, [](double x, double y) { return x + y; });
        break;
      case Op::Sub:
        binary(out, a, b, n, [](double x, double y) { return x - y; });
        break;
      case Op::Mul:
        binary(out, a, b, n, [](double x, double y) { return x * y; });
        break;
      case Op::Div:
        binary(out, a, b, n, [](double x, double y) { return x / guarded_divisor(y); });
        break;
      case Op::Min:
        binary(out, a, b, n, [](double x, double y) { return x <= y ? x : y; });
        break;
      case Op::Max:
        binary(out, a, b, n, [](double x, double y) { return x >= y ? x : y; });
        break;
      case Op::Pow:
        binary(out, a, b, n, [](double x, double y) { return std::pow(x, y); });
        break;
      case Op::BatchMean:
        out.assign(1, a.scalar ? a.p[0] : mean_of(trace.values[ins.lhs]));
        break;
      case Op::BatchStd: {
        const auto& src = trace.values[ins.lhs];
        out.assign(1, (a.scalar ? 0.0 : pop_std_of(src, mean_of(src))) + kStdEpsilon);
        break;
      }
    }
  }

  const auto& result = trace.values.back();
  if (!all_finite(result)) {
    for (std::size_t i = 0; i < trace.values.size(); ++i) {
      if (!all_finite(trace.values[i])) throw NonFiniteOutput(i);
    }
  }
  if (result.size() == 1) return Tensor2(trace.rows, trace.cols, result[0]);
  return Tensor2(trace.rows, trace.cols, result);
}

Tensor2 CompiledExpr::backward(const Trace& trace, const Tensor2& upstream) const {
  if (upstream.rows() != trace.rows || upstream.cols() != trace.cols ||
      trace.values.size() != code_.size() || trace.aux.size() != code_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "backward: upstream does not match trace");
  }
  const std::size_t n = upstream.size();
  std::vector<std::vector<double>> grads(code_.size());
  if (trace.values.back().size() == 1) {
    double total = 0.0;
    for (double u : upstream.data()) total += u;
    grads.back().assign(1, total);
  } else {
    grads.back().assign(upstream.data().begin(), upstream.data().end());
  }
  Tensor2 result(trace.rows, trace.cols);
  auto dx = result.data();

  auto sink = [&](std::size_t slot) -> Sink {
    auto& g = grads[slot];
    if (g.empty()) g.assign(trace.values[slot].size(), 0.0);
    return {g.data(), g.size() == 1};
  };

  for (std::size_t idx = code_.size(); idx-- > 0;) {
    const Instr& ins = code_[idx];
    if (grads[idx].empty()) continue;
    const double* g = grads[idx].data();
    const std::size_t m = grads[idx].size();  // 1 for scalar slots
    const double* y = trace.values[idx].data();
    const auto cls = op_info(ins.op).op_class;
    const double* a = cls == OpClass::Leaf ? nullptr : trace.values[ins.lhs].data();
    const double* b = cls == OpClass::Binary ? trace.values[ins.rhs].data() : nullptr;
    // Element k of a (possibly scalar) operand slot.
    const bool a_scalar = a && trace.values[ins.lhs].size() == 1;
    const bool b_scalar = b && trace.values[ins.rhs].size() == 1;
    auto av = [&](std::size_t k) { return a[a_scalar ? 0 : k]; };
    auto bv = [&](std::size_t k) { return b[b_scalar ? 0 : k]; };

    switch (ins.op) {
      case Op::Input:
        for (std::size_t k = 0; k < n; ++k) dx[k] += g[k];
        break;
      case Op::Const:
        break;
      case Op::Neg: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, -g[k]);
        break;
      }
      case Op::Abs: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * sign_of(a[k]));
        break;
      }
      case Op::Sign:
        sink(ins.lhs);
        break;
      case Op::Sin: {
        const Sink ga = sink(ins.lhs);
        const auto& c = trace.aux[idx];
        if (c.size() == m) {
          for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * c[k]);
        } else {
          for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * std::cos(a[k]));
        }
        break;
      }
      case Op::Cos: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, -g[k] * std::sin(a[k]));
        break;
      }
      case Op::Tanh: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * (1.0 - y[k] * y[k]));
        break;
      }
      case Op::Exp: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * y[k]);
        break;
      }
      case Op::Log1p: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k)
          if (a[k] > -1.0 + kLog1pMargin) ga.add(k, g[k] / (1.0 + a[k]));
        break;
      }
      case Op::Sqrt: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k)
          if (a[k] > 0.0) ga.add(k, g[k] * 0.5 / y[k]);
        break;
      }
      case Op::Relu: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k)
          if (a[k] > 0.0) ga.add(k, g[k]);
        break;
      }
      case Op::Gelu: {
        const Sink ga = sink(ins.lhs);
        const auto& t = trace.aux[idx];
        if (t.size() == m) {
          for (std::size_t k = 0; k < m; ++k) {
            const double x = a[k];
            const double d = 0.5 * (1.0 + t[k]) + 0.5 * x * (1.0 - t[k] * t[k]) * kGeluC *
                                                      (1.0 + 3.0 * kGeluK * x * x);
            ga.add(k, g[k] * d);
          }
        } else {
          for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * gelu_grad(a[k]));
        }
        break;
      }
      case Op::Sinc: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * sinc_grad(a[k]));
        break;
      }
      case Op::Sigmoid: {
        const Sink ga = sink(ins.lhs);
        for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * y[k] * (1.0 - y[k]));
        break;
      }
      case Op::Add: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) {
          ga.add(k, g[k]);
          gb.add(k, g[k]);
        }
        break;
      }
      case Op::Sub: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) {
          ga.add(k, g[k]);
          gb.add(k, -g[k]);
        }
        break;
      }
      case Op::Mul: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) {
          ga.add(k, g[k] * bv(k));
          gb.add(k, g[k] * av(k));
        }
        break;
      }
      case Op::Div: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) {
          const double d = guarded_divisor(bv(k));
          ga.add(k, g[k] / d);
          gb.add(k, -g[k] * av(k) / (d * d));
        }
        break;
      }
      case Op::Min: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) (av(k) <= bv(k) ? ga : gb).add(k, g[k]);
        break;
      }
      case Op::Max: {
        const Sink ga = sink(ins.lhs);
        const Sink gb = sink(ins.rhs);
        for (std::size_t k = 0; k < m; ++k) (av(k) >= bv(k) ? ga : gb).add(k, g[k]);
        break;
      }
      case Op::Pow: {
        const Sink ga = sink(ins.lhs);
        const double e = code_[ins.rhs].value;
        if (e != 0.0) {
          for (std::size_t k = 0; k < m; ++k) ga.add(k, g[k] * e * std::pow(av(k), e - 1.0));
        }
        break;
      }
      case Op::BatchMean: {
        // g is the scalar total of the broadcast gradient.
        const Sink ga = sink(ins.lhs);
        if (a_scalar) {
          ga.add(0, g[0]);
        } else {
          const double share = g[0] / static_cast<double>(n);
          for (std::size_t k = 0; k < n; ++k) ga.add(k, share);
        }
        break;
      }
      case Op::BatchStd: {
        const Sink ga = sink(ins.lhs);
        if (a_scalar) break;
        const auto& src = trace.values[ins.lhs];
        const double mu = mean_of(src);
        const double sigma = pop_std_of(src, mu);
        if (sigma > 0.0) {
          const double scale = g[0] / (static_cast<double>(n) * sigma);
          for (std::size_t k = 0; k < n; ++k) ga.add(k, scale * (a[k] - mu));
        }
        break;
      }
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(dx[k])) {
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!grads[i].empty() && !all_finite(grads[i])) throw NonFiniteOutput(i);
      }
      throw NonFiniteOutput(0);
    }
  }
  return result;
}

Tensor2 forward(const Expr& expr, const Tensor2& input) {
  return CompiledExpr(expr).forward(input);
}

ForwardBackward forward_backward(const Expr& expr, const Tensor2& input) {
  CompiledExpr program(expr);
  Trace trace;
  Tensor2 out = program.forward(input, trace);
  Tensor2 ones(input.rows(), input.cols(), 1.0);
  Tensor2 grad = program.backward(trace, ones);
  return {std::move(out), std::move(grad)};
}

}  // namespace actlab
