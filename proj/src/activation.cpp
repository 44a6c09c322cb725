#include "actlab/activation.hpp"

#include <cmath>

#include "actlab/error.hpp"

namespace actlab {

const char* to_string(Trainability t) noexcept {
  switch (t) {
    case Trainability::ExactAd: return "exact-AD";
    case Trainability::FiniteDifference: return "finite-difference";
    case Trainability::ForwardOnly: return "forward-only";
  }
  return "unknown";
}

Tensor2 central_difference(const std::function<double(double)>& f, const Tensor2& x,
                           double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  Tensor2 out(x.rows(), x.cols());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = (f(in[i] + h) - f(in[i] - h)) / (2.0 * h);
  }
  return out;
}

class Activation::Impl {
 public:
  virtual ~Impl() = default;
  virtual Trainability trainability() const noexcept = 0;
  virtual Tensor2 forward(const Tensor2& z, ActivationCache* cache) const = 0;
  virtual Tensor2 backward(const ActivationCache& cache, const Tensor2& upstream) const = 0;

  std::string name;
  std::optional<Expr> expr;
};

namespace {

void require_finite(const Tensor2& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteOutput(0);
  }
}

class ExprImpl final : public Activation::Impl {
 public:
  explicit ExprImpl(const Expr& e) : program_(e) {
    name = print(e);
    expr = e;
  }
  Trainability trainability() const noexcept override { return Trainability::ExactAd; }
  Tensor2 forward(const Tensor2& z, ActivationCache* cache) const override {
    if (cache) return program_.forward(z, cache->trace);
    return program_.forward(z);
  }
  Tensor2 backward(const ActivationCache& cache, const Tensor2& upstream) const override {
    return program_.backward(cache.trace, upstream);
  }

 private:
  CompiledExpr program_;
};

class PointwiseImpl final : public Activation::Impl {
 public:
  PointwiseImpl(std::string n, std::function<double(double)> f, double h)
      : f_(std::move(f)), h_(h) {
    name = std::move(n);
  }
  Trainability trainability() const noexcept override {
    return Trainability::FiniteDifference;
  }
  Tensor2 forward(const Tensor2& z, ActivationCache* cache) const override {
    if (cache) cache->input = z;
    Tensor2 out = map(z, f_);
    require_finite(out);
    return out;
  }
  Tensor2 backward(const ActivationCache& cache, const Tensor2& upstream) const override {
    if (!cache.input) throw Error(ErrorKind::InvalidArgument, "missing activation cache");
    Tensor2 d = central_difference(f_, *cache.input, h_);
    Tensor2 out = elementwise(d, upstream, BinaryOp::Mul);
    require_finite(out);
    return out;
  }

 private:
  std::function<double(double)> f_;
  double h_;
};

class ForwardOnlyImpl final : public Activation::Impl {
 public:
  ForwardOnlyImpl(std::string n, std::function<Tensor2(const Tensor2&)> f)
      : f_(std::move(f)) {
    name = std::move(n);
  }
  Trainability trainability() const noexcept override { return Trainability::ForwardOnly; }
  Tensor2 forward(const Tensor2& z, ActivationCache*) const override {
    Tensor2 out = f_(z);
    require_finite(out);
    return out;
  }
  Tensor2 backward(const ActivationCache&, const Tensor2&) const override {
    throw Error(ErrorKind::NotTrainable, "activation '" + name + "' is forward-only");
  }

 private:
  std::function<Tensor2(const Tensor2&)> f_;
};

}  // namespace

Activation Activation::from_expr(const Expr& expr) {
  return Activation(std::make_shared<ExprImpl>(expr));
}

Activation Activation::pointwise(std::string name, std::function<double(double)> f,
                                 double fd_step) {
  if (!(fd_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  return Activation(std::make_shared<PointwiseImpl>(std::move(name), std::move(f), fd_step));
}

Activation Activation::forward_only(std::string name,
                                    std::function<Tensor2(const Tensor2&)> f) {
  return Activation(std::make_shared<ForwardOnlyImpl>(std::move(name), std::move(f)));
}

const std::string& Activation::name() const noexcept { return impl_->name; }
Trainability Activation::trainability() const noexcept { return impl_->trainability(); }
const std::optional<Expr>& Activation::expr() const noexcept { return impl_->expr; }

Tensor2 Activation::forward(const Tensor2& z) const { return impl_->forward(z, nullptr); }

Tensor2 Activation::forward(const Tensor2& z, ActivationCache& cache) const {
  return impl_->forward(z, &cache);
}

Tensor2 Activation::backward(const ActivationCache& cache, const Tensor2& upstream) const {
  return impl_->backward(cache, upstream);
}

}  // namespace actlab
