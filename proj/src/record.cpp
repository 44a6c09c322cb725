#include "actlab/record.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "actlab/error.hpp"

namespace actlab {

using nlohmann::json;

namespace {

json interval_list(const std::vector<Interval>& v) {
  json out = json::array();
  for (const auto& i : v) out.push_back({i.lo, i.hi});
  return out;
}

std::vector<Interval> intervals_from(const json& j) {
  std::vector<Interval> out;
  for (const auto& i : j) out.push_back({i.at(0).get<double>(), i.at(1).get<double>()});
  return out;
}

json monomials(const std::vector<Monomial>& terms) {
  json out = json::array();
  for (const auto& t : terms) out.push_back({{"coefficient", t.coefficient}, {"exponents", t.exponents}});
  return out;
}

std::vector<Monomial> monomials_from(const json& j) {
  std::vector<Monomial> out;
  for (const auto& t : j)
    out.push_back({t.at("coefficient").get<double>(), t.at("exponents").get<std::vector<int>>()});
  return out;
}

}  // namespace

json to_json(const DatasetSpec& spec) {
  json params = json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Poly1dParams>) {
          if (p.degree) params["degree"] = *p.degree;
          if (!p.coefficients.empty()) params["coefficients"] = p.coefficients;
        } else if constexpr (std::is_same_v<T, Poly20dParams>) {
          params["dim"] = p.dim;
          params["max_degree"] = p.max_degree;
          params["max_terms"] = p.max_terms;
          params["coefficient_range"] = {p.coefficient_range.lo, p.coefficient_range.hi};
          if (!p.terms.empty()) params["terms"] = monomials(p.terms);
        } else if constexpr (std::is_same_v<T, SinProductParams>) {
          if (p.frequencies) params["frequencies"] = *p.frequencies;
          params["frequency_range"] = {p.frequency_range.lo, p.frequency_range.hi};
        } else if constexpr (std::is_same_v<T, SphericalParams>) {
          if (p.degree) params["degree"] = *p.degree;
          if (p.order) params["order"] = *p.order;
        } else {
          params["equation_id"] = p.equation_id;
        }
      },
      spec.params);
  return {{"family", to_string(spec.family())},
          {"params", params},
          {"id_range", interval_list(spec.id_range)},
          {"ood_range", interval_list(spec.ood_range)},
          {"n_train", spec.n_train},
          {"n_test", spec.n_test},
          {"seed", spec.seed}};
}

DatasetSpec spec_from_json(const json& j) {
  try {
    DatasetSpec spec;
    const Family family = family_from_string(j.at("family").get<std::string>());
    const json& p = j.at("params");
    switch (family) {
      case Family::Poly1d: {
        Poly1dParams q;
        if (p.contains("degree")) q.degree = p["degree"].get<int>();
        if (p.contains("coefficients")) q.coefficients = p["coefficients"].get<std::vector<double>>();
        spec.params = q;
        break;
      }
      case Family::Poly20d: {
        Poly20dParams q;
        q.dim = p.value("dim", q.dim);
        q.max_degree = p.value("max_degree", q.max_degree);
        q.max_terms = p.value("max_terms", q.max_terms);
        if (p.contains("coefficient_range"))
          q.coefficient_range = {p["coefficient_range"].at(0).get<double>(),
                                 p["coefficient_range"].at(1).get<double>()};
        if (p.contains("terms")) q.terms = monomials_from(p["terms"]);
        spec.params = q;
        break;
      }
      case Family::SinProduct: {
        SinProductParams q;
        if (p.contains("frequencies")) q.frequencies = p["frequencies"].get<std::array<double, 3>>();
        if (p.contains("frequency_range"))
          q.frequency_range = {p["frequency_range"].at(0).get<double>(),
                               p["frequency_range"].at(1).get<double>()};
        spec.params = q;
        break;
      }
      case Family::SphericalHarmonic: {
        SphericalParams q;
        if (p.contains("degree")) q.degree = p["degree"].get<int>();
        if (p.contains("order")) q.order = p["order"].get<int>();
        spec.params = q;
        break;
      }
      case Family::Feynman:
        spec.params = FeynmanParams{p.at("equation_id").get<std::string>()};
        break;
    }
    spec.id_range = intervals_from(j.at("id_range"));
    spec.ood_range = intervals_from(j.at("ood_range"));
    spec.n_train = j.at("n_train").get<std::size_t>();
    spec.n_test = j.at("n_test").get<std::size_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad dataset spec: ") + e.what());
  }
}

json to_json(const Target& target) {
  return std::visit(
      [](const auto& t) -> json {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Poly1dTarget>) {
          return {{"coefficients", t.coefficients}};
        } else if constexpr (std::is_same_v<T, Poly20dTarget>) {
          return {{"dim", t.dim}, {"terms", monomials(t.terms)}};
        } else if constexpr (std::is_same_v<T, SinProductTarget>) {
          return {{"theta", t.theta}, {"phi", t.phi}, {"psi", t.psi}};
        } else if constexpr (std::is_same_v<T, SphericalTarget>) {
          return {{"degree", t.degree}, {"order", t.order}};
        } else {
          return {{"equation_id", t.equation_id}};
        }
      },
      target);
}

json to_json(const MlpConfig& c) {
  return {{"hidden_layers", c.hidden_layers}, {"width", c.width},
          {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"train_steps", c.train_steps},     {"optimizer", to_string(c.optimizer)},
          {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace actlab
