#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "actlab/mlp.hpp"

namespace actlab {

enum class Family { Poly1d, Poly20d, SinProduct, SphericalHarmonic, Feynman };

const char* to_string(Family f) noexcept;
Family family_from_string(const std::string& name);

/// Half-open interval [lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double x) const noexcept { return x >= lo && x < hi; }
  bool overlaps(const Interval& o) const noexcept { return lo < o.hi && o.lo < hi; }
  bool operator==(const Interval&) const = default;
};

// Family parameters. Anything left unset is drawn at realization time from
// the DatasetSpec's "target" substream.

struct Poly1dParams {
  std::optional<int> degree;         // 0..9
  std::vector<double> coefficients;  // c_0 .. c_k; overrides degree when set
  bool operator==(const Poly1dParams&) const = default;
};

struct Monomial {
  double coefficient = 1.0;
  std::vector<int> exponents;  // one per input dimension
  bool operator==(const Monomial&) const = default;
};

struct Poly20dParams {
  int dim = 20;
  int max_degree = 3;  // per term, total degree
  int max_terms = 8;
  Interval coefficient_range{0.0, 1.0};
  std::vector<Monomial> terms;  // fixed terms; drawn when empty
  bool operator==(const Poly20dParams&) const = default;
};

struct SinProductParams {
  std::optional<std::array<double, 3>> frequencies;  // theta, phi, psi
  Interval frequency_range{1.0, 10.0};
  bool operator==(const SinProductParams&) const = default;
};

struct SphericalParams {
  std::optional<int> degree;  // l in 0..4
  std::optional<int> order;   // m in -l..l
  bool operator==(const SphericalParams&) const = default;
};

struct FeynmanParams {
  std::string equation_id;
  bool operator==(const FeynmanParams&) const = default;
};

using FamilyParams =
    std::variant<Poly1dParams, Poly20dParams, SinProductParams, SphericalParams, FeynmanParams>;

struct DatasetSpec {
  FamilyParams params;
  std::vector<Interval> id_range;   // one per input dimension
  std::vector<Interval> ood_range;  // one per input dimension
  std::size_t n_train = 4096;
  std::size_t n_test = 1024;
  std::uint64_t seed = 0;

  Family family() const noexcept;
  /// Throws BadRange / InvalidArgument / UnknownEquationId.
  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

// Realized target functions.

struct Poly1dTarget {
  std::vector<double> coefficients;
};
struct Poly20dTarget {
  int dim = 20;
  std::vector<Monomial> terms;
};
struct SinProductTarget {
  double theta = 0.0, phi = 0.0, psi = 0.0;
};
struct SphericalTarget {
  int degree = 0;
  int order = 0;
};
struct FeynmanTarget {
  std::string equation_id;
};

using Target =
    std::variant<Poly1dTarget, Poly20dTarget, SinProductTarget, SphericalTarget, FeynmanTarget>;

std::size_t input_dim(const Target& target);

/// Exact target value at x (length input_dim). Throws Domain for points a
/// physics equation is undefined on.
double target_eval(const Target& target, std::span<const double> x);

struct SampleSet {
  Split train;  // ID inputs
  Split test;   // OOD inputs
  std::optional<Target> target;  // absent for sets read back from CSV
};

SampleSet realize(const DatasetSpec& spec);

/// The curated Feynman subset.
struct FeynmanEquation {
  const char* id;
  const char* formula;
  std::vector<Interval> box;  // sampling box per input
};
const std::vector<FeynmanEquation>& feynman_equations();
const FeynmanEquation& feynman_equation(const std::string& id);

/// The two range patterns applied per dimension:
/// pattern 0 trains on [0, 0.5) and tests on [0.5, 1); pattern 1 trains on
/// [0, 1) and tests on [-1, 0).
std::pair<std::vector<Interval>, std::vector<Interval>> canonical_ranges(int pattern,
                                                                         std::size_t dim);

/// Spec with default parameters and canonical ranges for a family. Feynman
/// specs take the equation box split in half; spherical harmonics take
/// azimuth/polar sub-boxes.
DatasetSpec make_spec(Family family, int pattern, std::uint64_t seed,
                      const std::string& equation_id = "");

/// 20 poly1d, 10 poly20d, 20 sin_product, 10 spherical_harmonic and 10
/// feynman specs, in that order.
std::vector<DatasetSpec> default_suite(std::uint64_t seed);

/// CSV with header x0..x{d-1},y,split. Numbers use the shortest form that
/// reads back to the same double.
void write_csv(std::ostream& out, const SampleSet& set);
SampleSet read_csv(std::istream& in);

}  // namespace actlab
