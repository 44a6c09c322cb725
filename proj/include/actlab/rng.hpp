#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "actlab/tensor.hpp"

namespace actlab {

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Conversions to floating point are done here rather than with
/// the <random> distributions, whose algorithms vary between standard
/// libraries. Substreams are keyed by a label so that drawing from one
/// substream never shifts another.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream derived from (seed, label).
  SeededRng substream(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform on [lo, hi); throws BadRange unless lo < hi.
  double uniform(double lo, double hi);
  /// Uniform integer on [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal(double mean = 0.0, double sd = 1.0);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) noexcept;

Tensor2 rand_uniform(SeededRng& rng, std::size_t rows, std::size_t cols,
                     double lo, double hi);
Tensor2 rand_normal(SeededRng& rng, std::size_t rows, std::size_t cols,
                    double mean, double sd);

}  // namespace actlab
