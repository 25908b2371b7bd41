#include "meterguard/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meterguard::nn {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {
void check_sizes(const Tensor& pred, std::size_t n) {
  if (pred.size() != n || pred.empty()) {
    throw std::invalid_argument("loss: prediction shape " + shape_string(pred.shape()) +
                                " does not match " + std::to_string(n) + " targets");
  }
}
}  // namespace

LossResult mse_loss(const Tensor& pred, std::span<const double> target) {
  check_sizes(pred, target.size());
  const double n = static_cast<double>(target.size());
  LossResult r{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.value /= n;
  return r;
}

LossResult bce_with_logits(const Tensor& logits, std::span<const double> labels) {
  check_sizes(logits, labels.size());
  const double n = static_cast<double>(labels.size());
  LossResult r{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double z = logits[i];
    // softplus(z) - y z, computed without overflow
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    r.value += softplus - labels[i] * z;
    r.grad[i] = (sigmoid(z) - labels[i]) / n;
  }
  r.value /= n;
  return r;
}

}  // namespace meterguard::nn
