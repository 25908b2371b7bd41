#pragma once

#include <string>
#include <vector>

#include "meterguard/nn/layers.hpp"

namespace meterguard::nn {

/// Memory update rule.
///   standard:       C_t = f * C_{t-1} + i * C~
///   sigmoid_memory: C_t = sigmoid(f * C_{t-1} + i * C~)   (kept for comparison runs)
enum class CellVariant { standard, sigmoid_memory };
const char* to_string(CellVariant v);
CellVariant parse_cell_variant(const std::string& s);

/// Gate blocks are stored side by side in the order forget, input, output,
/// candidate: U is [input_dim, 4H], W is [H, 4H], b is [4H].
enum class Gate { forget = 0, input = 1, output = 2, candidate = 3 };

struct LstmParams {
  RowMatrix U;
  RowMatrix W;
  Eigen::RowVectorXd b;

  LstmParams() = default;
  LstmParams(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return static_cast<std::size_t>(U.rows()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(W.rows()); }

  auto U_gate(Gate g) { return U.middleCols(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
  auto W_gate(Gate g) { return W.middleCols(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
  auto b_gate(Gate g) { return b.segment(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
  auto U_gate(Gate g) const { return U.middleCols(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
  auto W_gate(Gate g) const { return W.middleCols(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
  auto b_gate(Gate g) const { return b.segment(static_cast<Eigen::Index>(g) * W.rows(), W.rows()); }
};

struct LstmState {
  Eigen::RowVectorXd h;
  Eigen::RowVectorXd c;

  static LstmState zeros(std::size_t hidden_dim);
};

struct LstmGates {
  Eigen::RowVectorXd forget, input, output, candidate;
};

/// One time step for a single input vector. Throws std::invalid_argument on
/// dimension mismatch. `gates`, when given, receives the gate activations.
LstmState lstm_cell_step(const Eigen::RowVectorXd& x, const LstmState& prev, const LstmParams& params,
                         CellVariant variant = CellVariant::standard, LstmGates* gates = nullptr);

/// Batched LSTM over [B, T, input_dim]. Returns [B, T, H] when
/// return_sequences, otherwise the last hidden state [B, H]. Initial state is zero.
class Lstm final : public Layer {
 public:
  Lstm(std::size_t input_dim, std::size_t hidden_dim, bool return_sequences,
       CellVariant variant = CellVariant::standard, double forget_bias = 1.0);

  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&U_, &W_, &b_}; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json describe() const override;

  LstmParams export_params() const;
  void import_params(const LstmParams& p);
  std::size_t hidden_dim() const { return hidden_; }

 private:
  std::size_t input_, hidden_;
  bool return_sequences_;
  CellVariant variant_;
  double forget_bias_;
  Parameter U_, W_, b_;

  Tensor input_cache_;
  std::vector<RowMatrix> acts_;   // per step: [f i o g] after nonlinearity, [B, 4H]
  std::vector<RowMatrix> cells_;  // C_0 .. C_T
  std::vector<RowMatrix> hidden_states_;  // h_0 .. h_T
  std::vector<RowMatrix> tanh_cells_;     // tanh(C_1) .. tanh(C_T)
};

}  // namespace meterguard::nn
