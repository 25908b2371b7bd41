#pragma once

#include <map>
#include <span>
#include <string>

#include <json.hpp>

#include "meterguard/nn/tensor.hpp"

namespace meterguard::nn {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled for adam, L2 for sgd
  double clip_norm = 0.0;     // global gradient norm cap; 0 disables

  nlohmann::json to_json() const;
};

/// Throws std::runtime_error naming the parameter if any gradient is not finite.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  void step(std::span<Parameter* const> params);
  long steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  OptimizerConfig config_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

void zero_grads(std::span<Parameter* const> params);

}  // namespace meterguard::nn
