#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "actlab/datagen.hpp"
#include "actlab/error.hpp"
#include "support.hpp"

using namespace actlab;

namespace {

constexpr double kPi = std::numbers::pi;

double at(const Target& t, std::vector<double> x) { return target_eval(t, x); }

DatasetSpec poly1d(std::vector<double> c, int pattern = 0) {
  DatasetSpec s = make_spec(Family::Poly1d, pattern, 1);
  s.params = Poly1dParams{std::nullopt, std::move(c)};
  return s;
}

void expect_sound(const DatasetSpec& spec, const SampleSet& set) {
  ASSERT_EQ(testsupport::soundness_problem(spec, set), "");
}

}  // namespace

TEST(Realize, ConstantPolynomial) {
  const SampleSet s = realize(poly1d({0.7}));
  for (double v : s.train.targets.data()) EXPECT_EQ(v, 0.7);
  for (double v : s.test.targets.data()) EXPECT_EQ(v, 0.7);
}

TEST(Realize, ZeroFrequencySinProduct) {
  DatasetSpec spec = make_spec(Family::SinProduct, 1, 2);
  spec.params = SinProductParams{std::array<double, 3>{0, 0, 0}, {1, 10}};
  const SampleSet s = realize(spec);
  for (double v : s.train.targets.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.test.targets.data()) EXPECT_EQ(v, 0.0);
}

TEST(TargetEval, PolynomialAgainstHorner) {
  const Target t = Poly1dTarget{{0.5, 0.25, 0.125}};
  EXPECT_NEAR(at(t, {0.4}), 0.62, 1e-15);
  SeededRng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> c(static_cast<std::size_t>(rng.uniform_int(1, 10)));
    for (double& v : c) v = rng.uniform(0, 1);
    const double x = rng.uniform(-1, 1);
    double horner = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) horner = horner * x + *it;
    EXPECT_NEAR(at(Poly1dTarget{c}, {x}), horner, 1e-14);
  }
}

TEST(TargetEval, SinProduct) {
  EXPECT_NEAR(at(SinProductTarget{kPi, 1, 1}, {1.0}), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(at(SinProductTarget{2, 3, 5}, {0.3}), std::sin(0.6) * std::sin(0.9) * std::sin(1.5));
}

TEST(TargetEval, Poly20dMonomials) {
  Monomial a{0.5, std::vector<int>(20, 0)}, b{0.25, std::vector<int>(20, 0)};
  a.exponents[0] = 2;
  b.exponents[3] = 1;
  b.exponents[19] = 1;
  std::vector<double> x(20, 0.0);
  x[0] = 0.3;
  x[3] = 0.6;
  x[19] = -0.5;
  EXPECT_NEAR(at(Poly20dTarget{20, {a, b}}, x), 0.5 * 0.09 + 0.25 * 0.6 * -0.5, 1e-15);
}

TEST(TargetEval, SphericalClosedForms) {
  // Real basis with the Condon-Shortley phase; inputs are (azimuth, polar).
  const double y00 = 0.28209479177387814;  // 1/(2 sqrt(pi))
  const double c1 = 0.48860251190291992;   // sqrt(3/(4 pi))
  EXPECT_NEAR(at(SphericalTarget{0, 0}, {1.3, 0.4}), y00, 1e-15);
  EXPECT_NEAR(at(SphericalTarget{0, 0}, {5.0, 2.9}), y00, 1e-15);
  EXPECT_NEAR(at(SphericalTarget{1, 0}, {0.0, 0.0}), c1, 1e-15);
  SeededRng rng(4);
  for (int k = 0; k < 100; ++k) {
    const double ph = rng.uniform(0, 2 * kPi), th = rng.uniform(0, kPi);
    const double s = std::sin(th), c = std::cos(th);
    EXPECT_NEAR(at(SphericalTarget{1, 0}, {ph, th}), c1 * c, 1e-14);
    EXPECT_NEAR(at(SphericalTarget{1, 1}, {ph, th}), -c1 * s * std::cos(ph), 1e-14);
    EXPECT_NEAR(at(SphericalTarget{1, -1}, {ph, th}), -c1 * s * std::sin(ph), 1e-14);
    EXPECT_NEAR(at(SphericalTarget{2, 0}, {ph, th}), std::sqrt(5 / (16 * kPi)) * (3 * c * c - 1), 1e-14);
    EXPECT_NEAR(at(SphericalTarget{2, 1}, {ph, th}), -std::sqrt(15 / (4 * kPi)) * s * c * std::cos(ph), 1e-14);
    EXPECT_NEAR(at(SphericalTarget{2, -2}, {ph, th}), std::sqrt(15 / (16 * kPi)) * s * s * std::sin(2 * ph),
                1e-14);
  }
}

TEST(TargetEval, SphericalBasisIsOrthonormal) {
  // Midpoint rule on the sphere; exact enough for band-limited functions.
  const int nt = 60, np = 120;
  std::vector<std::pair<int, int>> lm;
  for (int l = 0; l <= 4; ++l)
    for (int m = -l; m <= l; ++m) lm.push_back({l, m});
  std::vector<std::vector<double>> vals(lm.size());
  std::vector<double> w;
  for (int i = 0; i < nt; ++i) {
    const double th = (i + 0.5) * kPi / nt;
    for (int j = 0; j < np; ++j) {
      const double ph = (j + 0.5) * 2 * kPi / np;
      w.push_back(std::sin(th) * (kPi / nt) * (2 * kPi / np));
      for (std::size_t k = 0; k < lm.size(); ++k)
        vals[k].push_back(at(SphericalTarget{lm[k].first, lm[k].second}, {ph, th}));
    }
  }
  for (std::size_t a = 0; a < lm.size(); ++a) {
    for (std::size_t b = a; b < lm.size(); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * vals[a][i] * vals[b][i];
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 2e-3) << lm[a].first << "," << lm[a].second << " vs "
                                               << lm[b].first << "," << lm[b].second;
    }
  }
}

TEST(TargetEval, FeynmanFormulas) {
  ASSERT_EQ(feynman_equations().size(), 10u);
  auto f = [](const char* id, std::vector<double> x) { return at(FeynmanTarget{id}, x); };
  EXPECT_NEAR(f("I.6.2a", {1.5}), std::exp(-1.125) / std::sqrt(2 * kPi), 1e-15);
  EXPECT_NEAR(f("I.10.7", {2, 1, 4}), 2 / std::sqrt(1 - 1.0 / 16), 1e-14);
  EXPECT_NEAR(f("I.12.4", {3, 2, 1.5}), 3 / (4 * kPi * 2 * 2.25), 1e-15);
  EXPECT_NEAR(f("I.14.4", {2, 3}), 9.0, 1e-14);
  EXPECT_NEAR(f("I.25.13", {3, 4}), 0.75, 1e-15);
  EXPECT_NEAR(f("I.29.4", {3, 4}), 0.75, 1e-15);
  EXPECT_NEAR(f("I.34.27", {2, 3}), 3 / kPi, 1e-15);
  EXPECT_NEAR(f("I.39.1", {2, 3}), 9.0, 1e-14);
  const double c = std::cos(2.0 * 1.5);
  EXPECT_NEAR(f("I.50.26", {1.2, 2, 1.5, 0.7}), 1.2 * (c + 0.7 * c * c), 1e-14);
  EXPECT_NEAR(f("II.3.24", {5, 2}), 5 / (16 * kPi), 1e-15);
  EXPECT_THROW(f("I.10.7", {1, 3, 2}), Error);
  try {
    f("I.10.7", {1, 3, 2});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Spec, ValidationErrors) {
  DatasetSpec s = poly1d({0.5});
  s.ood_range = {{0.25, 1.0}};
  EXPECT_THROW(s.validate(), Error);
  s = poly1d({0.5});
  s.id_range = {{0.5, 0.5}};
  EXPECT_THROW(s.validate(), Error);
  s = poly1d({0.5});
  s.n_train = 127;
  EXPECT_THROW(s.validate(), Error);
  s = make_spec(Family::SinProduct, 0, 1);
  s.params = SinProductParams{std::array<double, 3>{1, NAN, 1}, {1, 10}};
  EXPECT_THROW(s.validate(), Error);
  try {
    make_spec(Family::Feynman, 0, 1, "I.99.9");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownEquationId);
  }
  s = poly1d({0.5});
  s.id_range = {{0, 0.5}, {0, 0.5}};
  EXPECT_THROW(s.validate(), Error) << "range count must match the input dimension";
}

TEST(Suite, CompositionAndDeterminism) {
  const auto a = default_suite(5);
  ASSERT_EQ(a.size(), 70u);
  const Family order[] = {Family::Poly1d, Family::Poly20d, Family::SinProduct,
                          Family::SphericalHarmonic, Family::Feynman};
  const std::size_t counts[] = {20, 10, 20, 10, 10};
  std::size_t i = 0;
  for (int f = 0; f < 5; ++f)
    for (std::size_t k = 0; k < counts[f]; ++k) EXPECT_EQ(a[i++].family(), order[f]);
  EXPECT_EQ(a, default_suite(5));
  EXPECT_NE(a, default_suite(6));
  for (const auto& s : a) {
    EXPECT_NO_THROW(s.validate());
    for (std::size_t j = 0; j < s.id_range.size(); ++j) EXPECT_FALSE(s.id_range[j].overlaps(s.ood_range[j]));
  }
}

TEST(Realize, DefaultSuiteIsSoundAndReproducible) {
  for (const auto& spec : default_suite(7)) {
    const SampleSet a = realize(spec);
    expect_sound(spec, a);
    const SampleSet b = realize(spec);
    EXPECT_TRUE(a.train.inputs.identical(b.train.inputs));
    EXPECT_TRUE(a.test.targets.identical(b.test.targets));
  }
}

TEST(Realize, CoverageReachesBothEnds) {
  for (const auto& spec : default_suite(8)) EXPECT_LT(testsupport::coverage_gap(spec, realize(spec)), 0.01);
}

TEST(Realize, RandomSpecsAreSound) {
  // 1000 specs with random family, pattern and seed.
  SeededRng rng(9);
  const auto& eqs = feynman_equations();
  for (int k = 0; k < 1000; ++k) {
    const auto f = static_cast<Family>(rng.uniform_int(0, 4));
    const int pattern = static_cast<int>(rng.uniform_int(0, 1));
    const std::string eq = eqs[static_cast<std::size_t>(rng.uniform_int(0, 9))].id;
    DatasetSpec spec = make_spec(f, pattern, rng.next_u64(), f == Family::Feynman ? eq : "");
    spec.n_train = 128;
    spec.n_test = 64;
    const SampleSet s = realize(spec);
    expect_sound(spec, s);
    if (HasFatalFailure()) return;
  }
}

TEST(Realize, DrawnParametersRespectRanges) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = std::get<Poly1dTarget>(*realize(make_spec(Family::Poly1d, 0, seed)).target);
    EXPECT_GE(t.coefficients.size(), 1u);
    EXPECT_LE(t.coefficients.size(), 10u);
    for (double c : t.coefficients) {
      EXPECT_GT(c, 0.0);
      EXPECT_LT(c, 1.0);
    }
    const auto p = std::get<Poly20dTarget>(*realize(make_spec(Family::Poly20d, 0, seed)).target);
    EXPECT_GE(p.terms.size(), 1u);
    EXPECT_LE(p.terms.size(), 8u);
    for (const auto& m : p.terms) {
      int deg = 0;
      for (int e : m.exponents) deg += e;
      EXPECT_GE(deg, 1);
      EXPECT_LE(deg, 3);
    }
    const auto h = std::get<SphericalTarget>(*realize(make_spec(Family::SphericalHarmonic, 0, seed)).target);
    EXPECT_LE(h.degree, 4);
    EXPECT_LE(std::abs(h.order), h.degree);
  }
}

TEST(Csv, RoundTripIsExact) {
  for (const auto& spec : {make_spec(Family::SinProduct, 0, 10), make_spec(Family::Feynman, 0, 11, "I.50.26")}) {
    const SampleSet a = realize(spec);
    std::stringstream ss;
    write_csv(ss, a);
    const SampleSet b = read_csv(ss);
    EXPECT_TRUE(a.train.inputs.identical(b.train.inputs));
    EXPECT_TRUE(a.train.targets.identical(b.train.targets));
    EXPECT_TRUE(a.test.inputs.identical(b.test.inputs));
    EXPECT_TRUE(a.test.targets.identical(b.test.targets));
    EXPECT_FALSE(b.target.has_value());
  }
}

TEST(Csv, HeaderAndRejects) {
  std::stringstream ss;
  write_csv(ss, realize(make_spec(Family::SphericalHarmonic, 0, 12)));
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "x0,x1,y,split");
  for (const char* bad : {"", "x0,y\n", "x0,y,split\n1,2,valid\n", "x0,y,split\n1,abc,train\n",
                          "x0,y,split\n1,2\n"}) {
    std::stringstream in(bad);
    EXPECT_THROW(read_csv(in), Error) << bad;
  }
}
