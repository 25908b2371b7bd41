#include "meterguard/nn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace meterguard::nn {

nlohmann::json OptimizerConfig::to_json() const {
  return {{"kind", kind == OptimizerKind::adam ? "adam" : "sgd"},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm}};
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void Optimizer::step(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient in parameter '" + p->name + "'");
      }
      sq += g * g;
    }
  }
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }

  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::sgd) {
    for (Parameter* p : params) {
      auto w = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] -= lr * (scale * g[i] + config_.weight_decay * w[i]);
      }
    }
    return;
  }

  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (Parameter* p : params) {
    auto& mom = moments_[p->name];
    auto w = p->value.values();
    auto g = p->grad.values();
    if (mom.m.size() != w.size()) {
      mom.m.assign(w.size(), 0.0);
      mom.v.assign(w.size(), 0.0);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = scale * g[i];
      mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * gi;
      mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * gi * gi;
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + config_.epsilon) + config_.weight_decay * w[i]);
    }
  }
}

}  // namespace meterguard::nn
