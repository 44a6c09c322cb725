#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace actlab {

/// Dense row-major matrix of doubles (batch x features).
///
/// Every constructor rejects zero dimensions, so a Tensor2 always holds at
/// least one element.
class Tensor2 {
 public:
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols_, cols_);
  }

  bool same_shape(const Tensor2& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  /// Bitwise equality of shape and contents.
  bool identical(const Tensor2& other) const noexcept;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
/// a^T * b.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
/// a * b^T.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);

enum class BinaryOp { Add, Sub, Mul, Div };

Tensor2 elementwise(const Tensor2& a, const Tensor2& b, BinaryOp op);
Tensor2 elementwise(const Tensor2& a, double b, BinaryOp op);
Tensor2 map(const Tensor2& a, const std::function<double(double)>& f);

double reduce_mean(const Tensor2& a);
/// Population standard deviation (divides by N).
double reduce_std(const Tensor2& a);
Tensor2 add_row_bias(const Tensor2& a, const Tensor2& bias);
/// Column sums as a 1 x cols tensor.
Tensor2 sum_rows(const Tensor2& a);

}  // namespace actlab
