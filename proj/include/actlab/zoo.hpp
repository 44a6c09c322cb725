#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "actlab/activation.hpp"
#include "actlab/expr.hpp"
#include "actlab/tensor.hpp"

namespace actlab {

enum class EntryKind { DslExpressible, NativePointwise, NativeTensor };

const char* to_string(EntryKind kind) noexcept;

struct ZooEntry {
  std::string name;
  EntryKind kind = EntryKind::DslExpressible;
  Trainability trainability = Trainability::ExactAd;
  std::optional<Expr> expr;                        // DSL entries
  std::function<double(double)> pointwise;         // native pointwise entries
  std::function<Tensor2(const Tensor2&)> tensor;   // native tensor entries
  std::string description;
  std::string source_dataset;

  /// Something the MLP can run.
  Activation activation() const;
};

/// Names in listing order.
const std::vector<std::string>& builtin_names();

/// Throws UnknownActivation.
const ZooEntry& builtin(const std::string& name);

/// Shape-preserving evaluation. Throws ShapeTooSmall (fisg with fewer than
/// four features) or NonFiniteOutput.
Tensor2 eval_entry(const ZooEntry& entry, const Tensor2& x);

/// Central-difference elementwise derivative of a pointwise entry.
Tensor2 fd_gradient(const ZooEntry& entry, const Tensor2& x, double h = 1e-5);

// Native kernels, exposed for tests and tools.
double quaternion(double x);
double pler(double x);
/// Rows are samples; the spectrum is taken along each row.
Tensor2 fisg(const Tensor2& x);
Tensor2 spf(const Tensor2& x);

/// The 25 fixed points, evenly spaced on [-3, 3], used for spot checks.
std::vector<double> probe_points();

/// Machine-readable listing: name, kind, trainability, flop cost (DSL only)
/// and source dataset.
std::string zoo_list_csv();

}  // namespace actlab
