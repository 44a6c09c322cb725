#include "actlab/datagen.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <numbers>
#include <ostream>
#include <sstream>

#include "actlab/error.hpp"
#include "actlab/expr.hpp"
#include "actlab/rng.hpp"

namespace actlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxPoly1dDegree = 9;
constexpr int kMaxSphericalDegree = 4;
constexpr int kMaxDomainAttempts = 1000;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorKind::Domain, what);
}

// Physics equations, evaluated literally. Inputs follow the order of the
// database's variable list.
double eval_feynman(const std::string& id, std::span<const double> x) {
  double r = 0.0;
  if (id == "I.6.2a") {
    r = std::exp(-x[0] * x[0] / 2.0) / std::sqrt(2.0 * kPi);
  } else if (id == "I.10.7") {
    const double ratio = x[1] * x[1] / (x[2] * x[2]);
    if (!(ratio < 1.0)) domain_error("I.10.7 needs v < c");
    r = x[0] / std::sqrt(1.0 - ratio);
  } else if (id == "I.12.4") {
    r = x[0] / (4.0 * kPi * x[1] * x[2] * x[2]);
  } else if (id == "I.14.4") {
    r = 0.5 * x[0] * x[1] * x[1];
  } else if (id == "I.25.13") {
    r = x[0] / x[1];
  } else if (id == "I.29.4") {
    r = x[0] / x[1];
  } else if (id == "I.34.27") {
    r = x[0] / (2.0 * kPi) * x[1];
  } else if (id == "I.39.1") {
    r = 1.5 * x[0] * x[1];
  } else if (id == "I.50.26") {
    const double c = std::cos(x[1] * x[2]);
    r = x[0] * (c + x[3] * c * c);
  } else if (id == "II.3.24") {
    r = x[0] / (4.0 * kPi * x[1] * x[1]);
  } else {
    throw Error(ErrorKind::UnknownEquationId, "unknown Feynman equation '" + id + "'");
  }
  if (!std::isfinite(r)) domain_error(id + " is undefined at the sampled point");
  return r;
}

double eval_spherical(int l, int m, double azimuth, double polar) {
  const unsigned ul = static_cast<unsigned>(l);
  const unsigned am = static_cast<unsigned>(std::abs(m));
  const double base = std::sph_legendre(ul, am, polar);
  if (m == 0) return base;
  const double s = std::numbers::sqrt2 * base;
  return m > 0 ? s * std::cos(m * azimuth) : s * std::sin(-m * azimuth);
}

double draw_open_unit(SeededRng& rng, const Interval& r) {
  // Coefficient ranges are open; reject the (rare) lower endpoint.
  for (;;) {
    const double v = rng.uniform(r.lo, r.hi);
    if (v != r.lo) return v;
  }
}

void check_interval(const Interval& r, const char* what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi)) {
    throw Error(ErrorKind::BadRange, std::string(what) + " interval must satisfy lo < hi");
  }
}

std::size_t spec_dim(const DatasetSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Poly1dParams&) -> std::size_t { return 1; },
          [](const Poly20dParams& p) -> std::size_t { return static_cast<std::size_t>(p.dim); },
          [](const SinProductParams&) -> std::size_t { return 1; },
          [](const SphericalParams&) -> std::size_t { return 2; },
          [](const FeynmanParams& p) -> std::size_t {
            return feynman_equation(p.equation_id).box.size();
          },
      },
      spec.params);
}

Target draw_target(const DatasetSpec& spec, SeededRng& rng) {
  return std::visit(
      Overloaded{
          [&](const Poly1dParams& p) -> Target {
            if (!p.coefficients.empty()) return Poly1dTarget{p.coefficients};
            const int degree =
                p.degree ? *p.degree : static_cast<int>(rng.uniform_int(0, kMaxPoly1dDegree));
            Poly1dTarget t;
            for (int i = 0; i <= degree; ++i) t.coefficients.push_back(draw_open_unit(rng, {0.0, 1.0}));
            return t;
          },
          [&](const Poly20dParams& p) -> Target {
            Poly20dTarget t{p.dim, p.terms};
            if (!t.terms.empty()) return t;
            const auto n_terms = rng.uniform_int(1, p.max_terms);
            for (std::int64_t k = 0; k < n_terms; ++k) {
              Monomial m;
              m.coefficient = draw_open_unit(rng, p.coefficient_range);
              m.exponents.assign(static_cast<std::size_t>(p.dim), 0);
              const auto degree = rng.uniform_int(1, p.max_degree);
              for (std::int64_t d = 0; d < degree; ++d) {
                ++m.exponents[static_cast<std::size_t>(rng.uniform_int(0, p.dim - 1))];
              }
              t.terms.push_back(std::move(m));
            }
            return t;
          },
          [&](const SinProductParams& p) -> Target {
            if (p.frequencies) {
              const auto& f = *p.frequencies;
              return SinProductTarget{f[0], f[1], f[2]};
            }
            SinProductTarget t;
            t.theta = rng.uniform(p.frequency_range.lo, p.frequency_range.hi);
            t.phi = rng.uniform(p.frequency_range.lo, p.frequency_range.hi);
            t.psi = rng.uniform(p.frequency_range.lo, p.frequency_range.hi);
            return t;
          },
          [&](const SphericalParams& p) -> Target {
            const int l = p.degree ? *p.degree
                                   : static_cast<int>(rng.uniform_int(0, kMaxSphericalDegree));
            const int m = p.order ? *p.order : static_cast<int>(rng.uniform_int(-l, l));
            return SphericalTarget{l, m};
          },
          [&](const FeynmanParams& p) -> Target { return FeynmanTarget{p.equation_id}; },
      },
      spec.params);
}

Split draw_split(const Target& target, const std::vector<Interval>& box, std::size_t n,
                 SeededRng& rng) {
  // Latin hypercube: each dimension is cut into n equal strata and every
  // stratum gets exactly one sample, so both ends of every interval are
  // reached to within 1/n of its width. Rows pair strata at random.
  const std::size_t d = box.size();
  std::vector<std::vector<std::size_t>> strata(d, std::vector<std::size_t>(n));
  for (auto& perm : strata) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(perm[i - 1], perm[k]);
    }
  }
  auto draw = [&](std::size_t j, std::size_t stratum) {
    const Interval& b = box[j];
    const double v = b.lo + (static_cast<double>(stratum) + rng.uniform01()) / static_cast<double>(n) * (b.hi - b.lo);
    return v < b.hi ? v : std::nextafter(b.hi, b.lo);
  };
  Tensor2 x(n, d);
  Tensor2 y(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    for (int attempt = 0;; ++attempt) {
      // A point outside a physics domain is redrawn inside the same strata.
      for (std::size_t j = 0; j < d; ++j) row[j] = draw(j, strata[j][r]);
      try {
        y(r, 0) = target_eval(target, row);
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Domain || attempt + 1 >= kMaxDomainAttempts) throw;
      }
    }
    if (!std::isfinite(y(r, 0))) domain_error("target is not finite at a sampled point");
  }
  return {std::move(x), std::move(y)};
}

double parse_csv_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Io, "bad number '" + std::string(s) + "' in dataset CSV");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

const char* to_string(Family f) noexcept {
  switch (f) {
    case Family::Poly1d: return "poly1d";
    case Family::Poly20d: return "poly20d";
    case Family::SinProduct: return "sin_product";
    case Family::SphericalHarmonic: return "spherical_harmonic";
    case Family::Feynman: return "feynman";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::Poly1d, Family::Poly20d, Family::SinProduct,
                   Family::SphericalHarmonic, Family::Feynman}) {
    if (name == to_string(f)) return f;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown dataset family '" + name + "'");
}

Family DatasetSpec::family() const noexcept { return static_cast<Family>(params.index()); }

void DatasetSpec::validate() const {
  std::visit(
      Overloaded{
          [](const Poly1dParams& p) {
            if (p.degree && (*p.degree < 0 || *p.degree > kMaxPoly1dDegree))
              throw Error(ErrorKind::InvalidArgument, "poly1d degree must be in [0, 9]");
            if (p.coefficients.size() > kMaxPoly1dDegree + 1)
              throw Error(ErrorKind::InvalidArgument, "poly1d has at most 10 coefficients");
            for (double c : p.coefficients)
              if (!std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "poly1d coefficient not finite");
          },
          [](const Poly20dParams& p) {
            if (p.dim < 1 || p.dim > 20 || p.max_degree < 1 || p.max_terms < 1)
              throw Error(ErrorKind::InvalidArgument, "poly20d needs 1 <= dim <= 20 and positive limits");
            check_interval(p.coefficient_range, "coefficient");
            for (const auto& m : p.terms) {
              if (m.exponents.size() != static_cast<std::size_t>(p.dim) || !std::isfinite(m.coefficient))
                throw Error(ErrorKind::InvalidArgument, "poly20d term does not match dim");
              for (int e : m.exponents)
                if (e < 0) throw Error(ErrorKind::InvalidArgument, "negative exponent");
            }
          },
          [](const SinProductParams& p) {
            check_interval(p.frequency_range, "frequency");
            if (p.frequencies)
              for (double f : *p.frequencies)
                if (!std::isfinite(f)) throw Error(ErrorKind::InvalidArgument, "frequency not finite");
          },
          [](const SphericalParams& p) {
            if (p.degree && (*p.degree < 0 || *p.degree > kMaxSphericalDegree))
              throw Error(ErrorKind::InvalidArgument, "spherical harmonic degree must be in [0, 4]");
            if (p.order && (!p.degree || std::abs(*p.order) > *p.degree))
              throw Error(ErrorKind::InvalidArgument, "spherical harmonic order needs |m| <= l");
          },
          [](const FeynmanParams& p) { feynman_equation(p.equation_id); },
      },
      params);

  const std::size_t d = spec_dim(*this);
  if (id_range.size() != d || ood_range.size() != d) {
    throw Error(ErrorKind::BadRange, "ranges need one interval per input dimension (" +
                                         std::to_string(d) + ")");
  }
  for (std::size_t j = 0; j < d; ++j) {
    check_interval(id_range[j], "ID");
    check_interval(ood_range[j], "OOD");
    if (id_range[j].overlaps(ood_range[j])) {
      throw Error(ErrorKind::BadRange,
                  "ID and OOD intervals overlap in dimension " + std::to_string(j));
    }
  }
  if (n_train < 128) throw Error(ErrorKind::InvalidArgument, "n_train must be at least 128");
  if (n_test < 1) throw Error(ErrorKind::InvalidArgument, "n_test must be positive");
}

std::size_t input_dim(const Target& target) {
  return std::visit(
      Overloaded{
          [](const Poly1dTarget&) -> std::size_t { return 1; },
          [](const Poly20dTarget& t) -> std::size_t { return static_cast<std::size_t>(t.dim); },
          [](const SinProductTarget&) -> std::size_t { return 1; },
          [](const SphericalTarget&) -> std::size_t { return 2; },
          [](const FeynmanTarget& t) -> std::size_t {
            return feynman_equation(t.equation_id).box.size();
          },
      },
      target);
}

double target_eval(const Target& target, std::span<const double> x) {
  if (x.size() != input_dim(target)) {
    throw Error(ErrorKind::ShapeMismatch, "point has " + std::to_string(x.size()) +
                                              " coordinates, target expects " +
                                              std::to_string(input_dim(target)));
  }
  return std::visit(
      Overloaded{
          [&](const Poly1dTarget& t) {
            double acc = 0.0;
            for (std::size_t i = t.coefficients.size(); i-- > 0;) acc = acc * x[0] + t.coefficients[i];
            return acc;
          },
          [&](const Poly20dTarget& t) {
            double acc = 0.0;
            for (const auto& m : t.terms) {
              double term = m.coefficient;
              for (std::size_t j = 0; j < m.exponents.size(); ++j)
                for (int e = 0; e < m.exponents[j]; ++e) term *= x[j];
              acc += term;
            }
            return acc;
          },
          [&](const SinProductTarget& t) {
            return std::sin(t.theta * x[0]) * std::sin(t.phi * x[0]) * std::sin(t.psi * x[0]);
          },
          [&](const SphericalTarget& t) { return eval_spherical(t.degree, t.order, x[0], x[1]); },
          [&](const FeynmanTarget& t) { return eval_feynman(t.equation_id, x); },
      },
      target);
}

SampleSet realize(const DatasetSpec& spec) {
  spec.validate();
  const SeededRng root(spec.seed);
  SeededRng target_rng = root.substream("target");
  SeededRng input_rng = root.substream("inputs");
  Target target = draw_target(spec, target_rng);
  Split train = draw_split(target, spec.id_range, spec.n_train, input_rng);
  Split test = draw_split(target, spec.ood_range, spec.n_test, input_rng);
  return {std::move(train), std::move(test), std::move(target)};
}

const std::vector<FeynmanEquation>& feynman_equations() {
  static const std::vector<FeynmanEquation> table = {
      {"I.6.2a", "exp(-theta^2/2)/sqrt(2*pi)", {{1, 3}}},
      {"I.10.7", "m_0/sqrt(1-v^2/c^2)", {{1, 5}, {1, 2}, {3, 10}}},
      {"I.12.4", "q1/(4*pi*epsilon*r^2)", {{1, 5}, {1, 5}, {1, 5}}},
      {"I.14.4", "1/2*k_spring*x^2", {{1, 5}, {1, 5}}},
      {"I.25.13", "q/C", {{1, 5}, {1, 5}}},
      {"I.29.4", "omega/c", {{1, 10}, {1, 10}}},
      {"I.34.27", "h/(2*pi)*omega", {{1, 5}, {1, 5}}},
      {"I.39.1", "3/2*pr*V", {{1, 5}, {1, 5}}},
      {"I.50.26", "x1*(cos(omega*t)+alpha*cos(omega*t)^2)", {{1, 3}, {1, 3}, {1, 3}, {1, 3}}},
      {"II.3.24", "Pwr/(4*pi*r^2)", {{1, 5}, {1, 5}}},
  };
  return table;
}

const FeynmanEquation& feynman_equation(const std::string& id) {
  for (const auto& eq : feynman_equations()) {
    if (id == eq.id) return eq;
  }
  throw Error(ErrorKind::UnknownEquationId, "unknown Feynman equation '" + id + "'");
}

std::pair<std::vector<Interval>, std::vector<Interval>> canonical_ranges(int pattern,
                                                                         std::size_t dim) {
  const Interval id = pattern == 0 ? Interval{0.0, 0.5} : Interval{0.0, 1.0};
  const Interval ood = pattern == 0 ? Interval{0.5, 1.0} : Interval{-1.0, 0.0};
  if (pattern != 0 && pattern != 1) {
    throw Error(ErrorKind::InvalidArgument, "range pattern must be 0 or 1");
  }
  return {std::vector<Interval>(dim, id), std::vector<Interval>(dim, ood)};
}

DatasetSpec make_spec(Family family, int pattern, std::uint64_t seed,
                      const std::string& equation_id) {
  DatasetSpec spec;
  spec.seed = seed;
  switch (family) {
    case Family::Poly1d:
      spec.params = Poly1dParams{};
      std::tie(spec.id_range, spec.ood_range) = canonical_ranges(pattern, 1);
      break;
    case Family::Poly20d:
      spec.params = Poly20dParams{};
      std::tie(spec.id_range, spec.ood_range) = canonical_ranges(pattern, 20);
      break;
    case Family::SinProduct:
      spec.params = SinProductParams{};
      std::tie(spec.id_range, spec.ood_range) = canonical_ranges(pattern, 1);
      break;
    case Family::SphericalHarmonic:
      // (azimuth, polar): train on the first half of each angle.
      spec.params = SphericalParams{};
      spec.id_range = {{0.0, kPi}, {0.0, kPi / 2}};
      spec.ood_range = {{kPi, 2 * kPi}, {kPi / 2, kPi}};
      break;
    case Family::Feynman: {
      spec.params = FeynmanParams{equation_id};
      for (const auto& r : feynman_equation(equation_id).box) {
        const double mid = 0.5 * (r.lo + r.hi);
        spec.id_range.push_back({r.lo, mid});
        spec.ood_range.push_back({mid, r.hi});
      }
      break;
    }
  }
  return spec;
}

std::vector<DatasetSpec> default_suite(std::uint64_t seed) {
  std::vector<DatasetSpec> suite;
  auto add = [&](Family f, int count) {
    for (int i = 0; i < count; ++i) {
      const std::string label = std::string("suite/") + to_string(f) + "/" + std::to_string(i);
      const std::uint64_t s = mix_seed(seed, label);
      if (f == Family::Feynman) {
        suite.push_back(make_spec(f, 0, s, feynman_equations()[static_cast<std::size_t>(i)].id));
      } else {
        suite.push_back(make_spec(f, i % 2, s));
      }
    }
  };
  add(Family::Poly1d, 20);
  add(Family::Poly20d, 10);
  add(Family::SinProduct, 20);
  add(Family::SphericalHarmonic, 10);
  add(Family::Feynman, 10);
  return suite;
}

void write_csv(std::ostream& out, const SampleSet& set) {
  const std::size_t d = set.train.inputs.cols();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "y,split\n";
  auto rows = [&](const Split& s, const char* tag) {
    for (std::size_t r = 0; r < s.inputs.rows(); ++r) {
      for (double v : s.inputs.row(r)) out << format_double(v) << ',';
      out << format_double(s.targets(r, 0)) << ',' << tag << '\n';
    }
  };
  rows(set.train, "train");
  rows(set.test, "test");
}

SampleSet read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty dataset CSV");
  const auto header = split_fields(line);
  if (header.size() < 3 || header[header.size() - 2] != "y" || header.back() != "split") {
    throw Error(ErrorKind::Io, "dataset CSV header must end with y,split");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j)) throw Error(ErrorKind::Io, "bad CSV column name");
  }
  std::vector<double> xs[2], ys[2];
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != d + 2) {
      throw Error(ErrorKind::Io, "line " + std::to_string(line_no) + ": wrong field count");
    }
    int which = -1;
    if (f.back() == "train") which = 0;
    if (f.back() == "test") which = 1;
    if (which < 0) throw Error(ErrorKind::Io, "line " + std::to_string(line_no) + ": bad split tag");
    for (std::size_t j = 0; j < d; ++j) xs[which].push_back(parse_csv_double(f[j]));
    ys[which].push_back(parse_csv_double(f[d]));
  }
  if (ys[0].empty() || ys[1].empty()) {
    throw Error(ErrorKind::Io, "dataset CSV needs both train and test rows");
  }
  auto make = [&](int w) {
    const std::size_t n = ys[w].size();
    return Split{Tensor2(n, d, std::move(xs[w])), Tensor2(n, 1, std::move(ys[w]))};
  };
  Split train = make(0);
  Split test = make(1);
  return {std::move(train), std::move(test), std::nullopt};
}

}  // namespace actlab
