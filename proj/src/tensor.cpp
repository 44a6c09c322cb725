#include "actlab/tensor.hpp"

#include <cmath>
#include <cstring>
#include <string>

#if defined(__x86_64__)
#include <immintrin.h>
#endif

#include "actlab/error.hpp"

namespace actlab {

namespace {

void require_nonzero(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw Error(ErrorKind::ShapeMismatch, "tensor dimensions must be nonzero");
  }
}

std::string shape_str(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor2& a,
                                 const Tensor2& b) {
  throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + shape_str(a) +
                                            " vs " + shape_str(b));
}

double apply(double x, double y, BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return x + y;
    case BinaryOp::Sub: return x - y;
    case BinaryOp::Mul: return x * y;
    case BinaryOp::Div: return x / y;
  }
  return 0.0;
}

}  // namespace

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  require_nonzero(rows, cols);
  data_.assign(rows * cols, fill);
}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_nonzero(rows, cols);
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

Tensor2 Tensor2::identity(std::size_t n) {
  Tensor2 t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor2::identical(const Tensor2& other) const noexcept {
  return same_shape(other) &&
         std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

// Row blocks of 4 and column blocks of 8 held in local accumulators. Each
// output element still sums over k in ascending order with separate
// multiply and add roundings, so every path matches the plain triple loop
// bit for bit.
namespace {

void matmul_tail_rows(const double* pa, const double* pb, double* po, std::size_t i0,
                      std::size_t i1, std::size_t j0, std::size_t k, std::size_t m) {
  for (std::size_t r = i0; r < i1; ++r)
    for (std::size_t j = j0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += pa[r * k + p] * pb[p * m + j];
      po[r * m + j] = s;
    }
}

void matmul_generic(const double* pa, const double* pb, double* po, std::size_t n,
                    std::size_t k, std::size_t m) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::size_t j0 = 0;
    for (; j0 + 8 <= m; j0 += 8) {
      double acc[4][8] = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = pb + p * m + j0;
        for (int r = 0; r < 4; ++r) {
          const double av = pa[(i + r) * k + p];
          for (int j = 0; j < 8; ++j) acc[r][j] += av * brow[j];
        }
      }
      for (int r = 0; r < 4; ++r)
        for (int j = 0; j < 8; ++j) po[(i + r) * m + j0 + j] = acc[r][j];
    }
    matmul_tail_rows(pa, pb, po, i, i + 4, j0, k, m);
  }
  matmul_tail_rows(pa, pb, po, i, n, 0, k, m);
}

#if defined(__x86_64__)
__attribute__((target("avx2"))) void matmul_avx2(const double* pa, const double* pb,
                                                  double* po, std::size_t n, std::size_t k,
                                                  std::size_t m) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    std::size_t j0 = 0;
    for (; j0 + 8 <= m; j0 += 8) {
      __m256d c[4][2];
      for (auto& row : c) row[0] = row[1] = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const double* br = pb + p * m + j0;
        const __m256d b0 = _mm256_loadu_pd(br);
        const __m256d b1 = _mm256_loadu_pd(br + 4);
        for (int r = 0; r < 4; ++r) {
          const __m256d av = _mm256_broadcast_sd(pa + (i + r) * k + p);
          c[r][0] = _mm256_add_pd(c[r][0], _mm256_mul_pd(av, b0));
          c[r][1] = _mm256_add_pd(c[r][1], _mm256_mul_pd(av, b1));
        }
      }
      for (int r = 0; r < 4; ++r) {
        _mm256_storeu_pd(po + (i + r) * m + j0, c[r][0]);
        _mm256_storeu_pd(po + (i + r) * m + j0 + 4, c[r][1]);
      }
    }
    matmul_tail_rows(pa, pb, po, i, i + 4, j0, k, m);
  }
  matmul_tail_rows(pa, pb, po, i, n, 0, k, m);
}

const bool kHaveAvx2 = __builtin_cpu_supports("avx2");
#endif

void matmul_kernel(const double* pa, const double* pb, double* po, std::size_t n,
                   std::size_t k, std::size_t m) {
#if defined(__x86_64__)
  if (kHaveAvx2) return matmul_avx2(pa, pb, po, n, k, m);
#endif
  matmul_generic(pa, pb, po, n, k, m);
}

}  // namespace

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor2 out(a.rows(), b.cols());
  matmul_kernel(a.data().data(), b.data().data(), out.data().data(), a.rows(), a.cols(),
                b.cols());
  return out;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  return matmul(transpose(a), b);
}

// Summation order matches a row-by-row dot product; transposing first lets
// the inner loop run contiguously.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  return matmul(a, transpose(b));
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor2 elementwise(const Tensor2& a, const Tensor2& b, BinaryOp op) {
  if (!a.same_shape(b)) shape_mismatch("elementwise", a, b);
  Tensor2 out(a.rows(), a.cols());
  auto pa = a.data();
  auto pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = apply(pa[i], pb[i], op);
  return out;
}

Tensor2 elementwise(const Tensor2& a, double b, BinaryOp op) {
  Tensor2 out(a.rows(), a.cols());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = apply(pa[i], b, op);
  return out;
}

Tensor2 map(const Tensor2& a, const std::function<double(double)>& f) {
  Tensor2 out(a.rows(), a.cols());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = f(pa[i]);
  return out;
}

double reduce_mean(const Tensor2& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s / static_cast<double>(a.size());
}

double reduce_std(const Tensor2& a) {
  const double mean = reduce_mean(a);
  double s = 0.0;
  for (double v : a.data()) s += (v - mean) * (v - mean);
  return std::sqrt(s / static_cast<double>(a.size()));
}

Tensor2 add_row_bias(const Tensor2& a, const Tensor2& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    shape_mismatch("add_row_bias", a, bias);
  Tensor2 out = a;
  auto b = bias.data();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return out;
}

Tensor2 sum_rows(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  auto o = out.data();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) o[j] += row[j];
  }
  return out;
}

}  // namespace actlab
