#include "meterguard/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "meterguard/nn/layers.hpp"

namespace meterguard::nn {

namespace {

std::pair<double, std::uint64_t> tracked_loss(Differentiable& model) {
  KinkScope scope;
  const double l = model.loss();
  return {l, scope.signature()};
}

}  // namespace

GradCheckReport grad_check(Differentiable& model, const GradCheckOptions& opt) {
  GradCheckReport report;
  model.loss_and_grad();
  const auto params = model.parameters();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  const auto base_signature = tracked_loss(model).second;
  std::mt19937_64 rng(opt.seed);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    std::vector<std::size_t> indices(p.value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (opt.max_entries_per_parameter && indices.size() > opt.max_entries_per_parameter) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(opt.max_entries_per_parameter);
      std::sort(indices.begin(), indices.end());
    }
    for (const std::size_t idx : indices) {
      const double original = p.value[idx];
      p.value[idx] = original + opt.epsilon;
      const auto [plus, sig_plus] = tracked_loss(model);
      p.value[idx] = original - opt.epsilon;
      const auto [minus, sig_minus] = tracked_loss(model);
      p.value[idx] = original;
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++report.excluded;
        continue;
      }
      GradCheckEntry e;
      e.parameter = p.name;
      e.index = idx;
      e.analytic = analytic[pi][idx];
      e.numeric = (plus - minus) / (2.0 * opt.epsilon);
      const double denom =
          std::max({std::abs(e.analytic), std::abs(e.numeric), opt.denominator_floor});
      e.relative_error = std::abs(e.analytic - e.numeric) / denom;
      if (!std::isfinite(e.relative_error)) e.relative_error = INFINITY;
      ++report.checked;
      if (report.checked == 1 || e.relative_error > report.max_relative_error) {
        report.max_relative_error = e.relative_error;
        report.worst = e;
      }
      if (e.relative_error > opt.tolerance) {
        ++report.failed;
        if (report.failures.size() < opt.max_failures_reported) report.failures.push_back(e);
      }
    }
  }
  // restore analytic gradients, which the perturbed forward passes do not touch
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad = analytic[pi];
  return report;
}

}  // namespace meterguard::nn
