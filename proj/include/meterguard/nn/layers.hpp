#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterguard/nn/tensor.hpp"

namespace meterguard::nn {

/// Base class for differentiable layers. forward() records whatever backward()
/// needs; backward() accumulates into parameter gradients and returns the
/// gradient with respect to the layer input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual void initialize(std::mt19937_64& /*rng*/) {}
  virtual nlohmann::json describe() const = 0;

  /// Prefixes parameter names, e.g. "seq.0.dense" -> "seq.0.dense.weight".
  void set_name(const std::string& name);
  const std::string& name() const { return name_; }

 protected:
  void mark_forward() { has_forward_ = true; }
  void require_forward() const;

  std::string name_;

 private:
  bool has_forward_ = false;
};

/// Glorot/Xavier uniform fill in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// Records the branch pattern of nonsmooth layers (relu masks, pooling argmax)
/// while a scope is active on the current thread. Gradient checks compare the
/// signatures of perturbed evaluations to skip entries that cross a kink.
class KinkScope {
 public:
  KinkScope();
  ~KinkScope();
  KinkScope(const KinkScope&) = delete;
  KinkScope& operator=(const KinkScope&) = delete;

  std::uint64_t signature() const;
  static bool active();
  static void record(std::uint64_t value);

 private:
  KinkScope* previous_;
  std::uint64_t hash_;
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json describe() const override;

  Parameter& weight() { return weight_; }  // [in, out]
  Parameter& bias() { return bias_; }      // [out]

 private:
  std::size_t in_, out_;
  Parameter weight_, bias_;
  Tensor input_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "relu"}}; }

 private:
  Tensor input_;
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "sigmoid"}}; }

 private:
  Tensor output_;
};

class Tanh final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "tanh"}}; }

 private:
  Tensor output_;
};

/// [B, ...] -> [B, prod(...)]
class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "flatten"}}; }

 private:
  Shape input_shape_;
};

enum class Padding { valid, same };
const char* to_string(Padding p);
Padding parse_padding(const std::string& s);

/// Output length and leading pad for one spatial axis.
struct AxisGeometry {
  std::size_t out = 0;
  std::size_t pad_before = 0;
};
AxisGeometry conv_geometry(std::size_t length, std::size_t kernel, std::size_t stride, Padding padding);

/// Input [B, L, Cin] (channels last), kernel [K, Cin, Cout], output [B, Lout, Cout].
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride = 1, Padding padding = Padding::same);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json describe() const override;

  Parameter& kernel() { return kernel_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t cin_, cout_, k_, stride_;
  Padding padding_;
  Parameter kernel_, bias_;
  Shape input_shape_;
  AxisGeometry geom_;
  RowMatrix cols_;
};

/// Input [B, H, W, Cin], kernel [KH, KW, Cin, Cout], output [B, Hout, Wout, Cout].
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride = 1, Padding padding = Padding::same);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json describe() const override;

  Parameter& kernel() { return kernel_; }
  Parameter& bias() { return bias_; }

 private:
  std::size_t cin_, cout_, k_, stride_;
  Padding padding_;
  Parameter kernel_, bias_;
  Shape input_shape_;
  AxisGeometry geom_h_, geom_w_;
  RowMatrix cols_;
};

/// Non-overlapping max pooling over [B, L, C]; trailing remainder is dropped.
class MaxPool1d final : public Layer {
 public:
  explicit MaxPool1d(std::size_t window);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "maxpool1d"}, {"window", window_}}; }

 private:
  std::size_t window_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Non-overlapping window x window max pooling over [B, H, W, C].
class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(std::size_t window);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  nlohmann::json describe() const override { return {{"type", "maxpool2d"}, {"window", window_}}; }

 private:
  std::size_t window_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

class Sequential {
 public:
  explicit Sequential(std::string name = "seq") : name_(std::move(name)) {}

  Layer& add(std::unique_ptr<Layer> layer);
  template <class L, class... Args>
  L& emplace(Args&&... args) {
    return static_cast<L&>(add(std::make_unique<L>(std::forward<Args>(args)...)));
  }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  std::vector<Parameter*> parameters();
  void initialize(std::mt19937_64& rng);
  nlohmann::json describe() const;

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  bool empty() const { return layers_.empty(); }

 private:
  std::string name_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace meterguard::nn
