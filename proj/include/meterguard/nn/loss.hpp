#pragma once

#include <span>

#include "meterguard/nn/tensor.hpp"

namespace meterguard::nn {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d prediction, same shape as the prediction
};

/// mean((pred - target)^2) over all B entries; pred is [B] or [B, 1].
LossResult mse_loss(const Tensor& pred, std::span<const double> target);

/// Binary cross-entropy on logits, averaged over the batch; labels in {0, 1}.
LossResult bce_with_logits(const Tensor& logits, std::span<const double> labels);

double sigmoid(double z);

}  // namespace meterguard::nn
