#include "actlab/trial.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "actlab/rng.hpp"

namespace actlab {

std::uint64_t trial_seed(std::uint64_t eval_seed, const DatasetSpec& spec) {
  return mix_seed(eval_seed, "trial/" + std::to_string(spec.seed));
}

TrialResult run_trial(const Activation& activation, const SampleSet& data,
                      const MlpConfig& base, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  MlpConfig cfg = base;
  cfg.input_dim = data.train.inputs.cols();
  cfg.output_dim = data.train.targets.cols();
  SeededRng rng(seed);
  const TrainResult trained = train(cfg, activation, data.train, rng);
  TrialResult r;
  r.diverged = trained.report.diverged;
  r.train_mse = trained.report.final_train_mse;
  r.ood_mse = r.diverged ? kDivergedMse : evaluate(cfg, trained.params, activation, data.test);
  auto clamp = [&](double v) {
    if (!std::isfinite(v)) {
      r.diverged = true;
      return kDivergedMse;
    }
    return std::min(v, kDivergedMse);
  };
  r.train_mse = clamp(r.train_mse);
  r.ood_mse = clamp(r.ood_mse);
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace actlab
