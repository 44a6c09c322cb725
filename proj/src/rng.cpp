#include "actlab/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "actlab/error.hpp"

namespace actlab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) noexcept {
  return splitmix64(splitmix64(seed) ^ fnv1a(label));
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

SeededRng SeededRng::substream(std::string_view label) const {
  return SeededRng(mix_seed(seed_, label));
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorKind::BadRange, "uniform range requires finite lo < hi");
  }
  double v = lo + (hi - lo) * uniform01();
  // Rounding can land exactly on hi for wide intervals.
  if (v >= hi) v = std::nextafter(hi, lo);
  return v;
}

std::int64_t SeededRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error(ErrorKind::BadRange, "uniform_int requires lo <= hi");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next_u64());
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<std::int64_t>(v % span);
}

// Box-Muller; the second variate of each pair is kept for the next call.
double SeededRng::normal(double mean, double sd) {
  if (!(sd >= 0.0)) throw Error(ErrorKind::BadRange, "normal requires sd >= 0");
  double z;
  if (has_spare_) {
    has_spare_ = false;
    z = spare_;
  } else {
    double u1;
    do {
      u1 = uniform01();
    } while (u1 == 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    z = r * std::cos(theta);
    spare_ = r * std::sin(theta);
    has_spare_ = true;
  }
  return mean + sd * z;
}

Tensor2 rand_uniform(SeededRng& rng, std::size_t rows, std::size_t cols,
                     double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorKind::BadRange, "rand_uniform requires lo < hi");
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Tensor2 rand_normal(SeededRng& rng, std::size_t rows, std::size_t cols,
                    double mean, double sd) {
  if (!(sd >= 0.0)) throw Error(ErrorKind::BadRange, "rand_normal requires sd >= 0");
  Tensor2 t(rows, cols);
  for (double& v : t.data()) v = rng.normal(mean, sd);
  return t;
}

}  // namespace actlab
