#pragma once

#include <cstdint>

#include "actlab/activation.hpp"
#include "actlab/datagen.hpp"
#include "actlab/mlp.hpp"

namespace actlab {

/// MSE charged to a run that diverged; also the cap for finite losses, so a
/// diverging candidate is never better than a merely bad one.
inline constexpr double kDivergedMse = 1e6;

struct TrialResult {
  double train_mse = 0.0;
  double ood_mse = 0.0;
  bool diverged = false;
  double wall_seconds = 0.0;
};

/// Seed for one (evaluation seed, dataset) pair. It does not depend on the
/// activation, so comparisons between activations are paired.
std::uint64_t trial_seed(std::uint64_t eval_seed, const DatasetSpec& spec);

/// Trains on the ID split and measures MSE on the OOD split. Divergence
/// (including a non-finite OOD loss) yields kDivergedMse for both metrics
/// that are not finite. Input and output widths are taken from the data.
TrialResult run_trial(const Activation& activation, const SampleSet& data,
                      const MlpConfig& cfg, std::uint64_t seed);

}  // namespace actlab
