// Helpers shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <string>
#include <vector>

#include "actlab/datagen.hpp"
#include "actlab/mlp.hpp"
#include "actlab/rng.hpp"

namespace testsupport {

struct GradCheck {
  double worst_rel = 0.0;
  std::size_t checked = 0;
};

// Central-difference check of every weight and bias of `params` against
// backward_mlp, for MSE on (x, y). Relative error uses the larger of the two
// magnitudes, floored at 1e-6 so exactly-zero gradients compare absolutely.
inline GradCheck check_mlp_gradients(const actlab::MlpParams& params,
                                     const actlab::Activation& act, const actlab::Tensor2& x,
                                     const actlab::Tensor2& y, double h = 1e-5) {
  using namespace actlab;
  ForwardCache cache;
  const Tensor2 pred = forward_mlp(params, act, x, &cache);
  const std::vector<Layer> grads = backward_mlp(params, act, cache, pred, y);
  GradCheck out;
  auto loss = [&](const MlpParams& p) { return mse(forward_mlp(p, act, x), y); };
  MlpParams p = params;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      Tensor2& t = which == 0 ? p.layers[l].weight : p.layers[l].bias;
      const Tensor2& g = which == 0 ? grads[l].weight : grads[l].bias;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double keep = t.data()[i];
        t.data()[i] = keep + h;
        const double up = loss(p);
        t.data()[i] = keep - h;
        const double down = loss(p);
        t.data()[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double ad = g.data()[i];
        const double rel = std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1e-6});
        out.worst_rel = std::max(out.worst_rel, rel);
        ++out.checked;
      }
    }
  }
  return out;
}

// Two hidden layers of width 4, as used by the gradient suites.
inline actlab::MlpConfig small_mlp(std::size_t input_dim) {
  actlab::MlpConfig cfg;
  cfg.input_dim = input_dim;
  cfg.hidden_layers = 2;
  cfg.width = 4;
  return cfg;
}

// Empty when the realized set is sound: row counts and widths match, every
// input lies in its own box and outside the other split's box, and stored
// targets equal a fresh target_eval bit for bit. Otherwise a description of
// the first problem.
inline std::string soundness_problem(const actlab::DatasetSpec& spec, const actlab::SampleSet& set) {
  using namespace actlab;
  if (!set.target) return "no target";
  auto check = [&](const char* name, const Split& s, const std::vector<Interval>& box,
                   const std::vector<Interval>& other, std::size_t n) -> std::string {
    if (s.inputs.rows() != n || s.targets.rows() != n) return std::string(name) + ": row count";
    if (s.inputs.cols() != box.size()) return std::string(name) + ": width";
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < box.size(); ++j) {
        const double v = s.inputs(r, j);
        if (!box[j].contains(v) || other[j].contains(v))
          return std::string(name) + ": row " + std::to_string(r) + " outside its range";
      }
      const double y = s.targets(r, 0);
      if (!std::isfinite(y) || std::bit_cast<std::uint64_t>(y) !=
                                   std::bit_cast<std::uint64_t>(target_eval(*set.target, s.inputs.row(r))))
        return std::string(name) + ": row " + std::to_string(r) + " target differs";
    }
    return "";
  };
  std::string p = check("train", set.train, spec.id_range, spec.ood_range, spec.n_train);
  if (p.empty()) p = check("test", set.test, spec.ood_range, spec.id_range, spec.n_test);
  return p;
}

// Worst distance from a box end to the nearest sample, as a fraction of the
// box width, over both splits and all dimensions.
inline double coverage_gap(const actlab::DatasetSpec& spec, const actlab::SampleSet& s) {
  double worst = 0.0;
  for (const auto& [split, box] : {std::pair{&s.train, &spec.id_range}, std::pair{&s.test, &spec.ood_range}}) {
    for (std::size_t j = 0; j < box->size(); ++j) {
      const actlab::Interval r = (*box)[j];
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < split->inputs.rows(); ++i) {
        lo = std::min(lo, split->inputs(i, j));
        hi = std::max(hi, split->inputs(i, j));
      }
      worst = std::max({worst, (lo - r.lo) / (r.hi - r.lo), (r.hi - hi) / (r.hi - r.lo)});
    }
  }
  return worst;
}

}  // namespace testsupport
