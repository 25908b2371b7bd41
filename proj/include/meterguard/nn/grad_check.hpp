#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meterguard/nn/tensor.hpp"

namespace meterguard::nn {

/// A model bound to a fixed sample and a scalar loss.
class Differentiable {
 public:
  virtual ~Differentiable() = default;
  virtual std::vector<Parameter*> parameters() = 0;
  /// Forward pass only.
  virtual double loss() = 0;
  /// Forward and backward; parameter gradients are overwritten, not accumulated.
  virtual double loss_and_grad() = 0;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_parameter = 0;
  std::uint64_t seed = 0;
  std::size_t max_failures_reported = 20;
};

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Entries whose perturbation changed a relu mask or pooling argmax.
  std::size_t excluded = 0;
  std::size_t failed = 0;
  std::vector<GradCheckEntry> failures;  // first max_failures_reported of them
  GradCheckEntry worst;

  bool passed() const { return failed == 0; }
};

/// Compares analytic gradients with central differences (L(t+e) - L(t-e)) / 2e.
GradCheckReport grad_check(Differentiable& model, const GradCheckOptions& options = {});

}  // namespace meterguard::nn
