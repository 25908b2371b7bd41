#include "meterguard/nn/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace meterguard::nn {

namespace {

template <class M>
auto sigmoid(const M& m) {
  return (1.0 + (-m.array()).exp()).inverse();
}

using StridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using MutableStridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

}  // namespace

const char* to_string(CellVariant v) {
  return v == CellVariant::sigmoid_memory ? "sigmoid_memory" : "standard";
}

CellVariant parse_cell_variant(const std::string& s) {
  if (s == "standard") return CellVariant::standard;
  if (s == "sigmoid_memory" || s == "sigmoid-memory") return CellVariant::sigmoid_memory;
  throw std::invalid_argument("unknown LSTM cell variant '" + s + "'");
}

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden_dim)
    : U(RowMatrix::Zero(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(4 * hidden_dim))),
      W(RowMatrix::Zero(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(4 * hidden_dim))),
      b(Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(4 * hidden_dim))) {}

LstmState LstmState::zeros(std::size_t hidden_dim) {
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  return {Eigen::RowVectorXd::Zero(h), Eigen::RowVectorXd::Zero(h)};
}

LstmState lstm_cell_step(const Eigen::RowVectorXd& x, const LstmState& prev, const LstmParams& p,
                         CellVariant variant, LstmGates* gates) {
  const Eigen::Index hdim = p.W.rows();
  if (p.W.cols() != 4 * hdim || p.U.cols() != 4 * hdim || p.b.size() != 4 * hdim ||
      x.size() != p.U.rows() || prev.h.size() != hdim || prev.c.size() != hdim) {
    throw std::invalid_argument("lstm_cell_step: inconsistent dimensions");
  }
  const Eigen::RowVectorXd a = x * p.U + prev.h * p.W + p.b;
  const Eigen::RowVectorXd f = sigmoid(a.segment(0, hdim));
  const Eigen::RowVectorXd i = sigmoid(a.segment(hdim, hdim));
  const Eigen::RowVectorXd o = sigmoid(a.segment(2 * hdim, hdim));
  const Eigen::RowVectorXd g = a.segment(3 * hdim, hdim).array().tanh();
  Eigen::RowVectorXd c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  if (variant == CellVariant::sigmoid_memory) c = sigmoid(c);
  LstmState next;
  next.c = c;
  next.h = c.array().tanh().matrix().cwiseProduct(o);
  if (gates) *gates = {f, i, o, g};
  return next;
}

Lstm::Lstm(std::size_t input_dim, std::size_t hidden_dim, bool return_sequences,
           CellVariant variant, double forget_bias)
    : input_(input_dim),
      hidden_(hidden_dim),
      return_sequences_(return_sequences),
      variant_(variant),
      forget_bias_(forget_bias),
      U_("U", {input_dim, 4 * hidden_dim}),
      W_("W", {hidden_dim, 4 * hidden_dim}),
      b_("b", {4 * hidden_dim}) {}

void Lstm::initialize(std::mt19937_64& rng) {
  glorot_uniform(U_.value, input_, hidden_, rng);
  glorot_uniform(W_.value, hidden_, hidden_, rng);
  b_.value.fill(0.0);
  for (std::size_t j = 0; j < hidden_; ++j) b_.value[j] = forget_bias_;
}

nlohmann::json Lstm::describe() const {
  return {{"type", "lstm"},
          {"input_dim", input_},
          {"hidden_dim", hidden_},
          {"return_sequences", return_sequences_},
          {"cell", to_string(variant_)}};
}

LstmParams Lstm::export_params() const {
  LstmParams p(input_, hidden_);
  p.U = U_.value.matrix(input_, 4 * hidden_);
  p.W = W_.value.matrix(hidden_, 4 * hidden_);
  p.b = b_.value.matrix(1, 4 * hidden_);
  return p;
}

void Lstm::import_params(const LstmParams& p) {
  if (p.input_dim() != input_ || p.hidden_dim() != hidden_) {
    throw std::invalid_argument("import_params: dimension mismatch");
  }
  U_.value.matrix(input_, 4 * hidden_) = p.U;
  W_.value.matrix(hidden_, 4 * hidden_) = p.W;
  b_.value.matrix(1, 4 * hidden_) = p.b;
}

Tensor Lstm::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != input_) {
    throw std::invalid_argument("lstm '" + name_ + "' expects [B, T, " + std::to_string(input_) +
                                "], got " + shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), steps = x.dim(1);
  if (steps == 0) throw std::invalid_argument("lstm input has no time steps");
  const auto B = static_cast<Eigen::Index>(batch);
  const auto H = static_cast<Eigen::Index>(hidden_);
  const auto T = static_cast<Eigen::Index>(steps);
  input_cache_ = x;
  mark_forward();

  const RowMatrix xu = x.matrix(batch * steps, input_) * U_.value.matrix(input_, 4 * hidden_);
  const auto W = W_.value.matrix(hidden_, 4 * hidden_);
  const auto bias = b_.value.matrix(1, 4 * hidden_);

  acts_.assign(steps, RowMatrix());
  tanh_cells_.assign(steps, RowMatrix());
  cells_.assign(steps + 1, RowMatrix::Zero(B, H));
  hidden_states_.assign(steps + 1, RowMatrix::Zero(B, H));

  Tensor y = return_sequences_ ? Tensor({batch, steps, hidden_}) : Tensor({batch, hidden_});
  for (Eigen::Index t = 0; t < T; ++t) {
    const StridedMap xu_t(xu.data() + t * 4 * H, B, 4 * H, Eigen::OuterStride<>(T * 4 * H));
    RowMatrix a = xu_t + hidden_states_[t] * W;
    a.rowwise() += bias.row(0);

    RowMatrix& act = acts_[t];
    act.resize(B, 4 * H);
    act.leftCols(3 * H) = sigmoid(a.leftCols(3 * H));
    act.rightCols(H) = a.rightCols(H).array().tanh();

    RowMatrix c = act.leftCols(H).cwiseProduct(cells_[t]) +
                  act.middleCols(H, H).cwiseProduct(act.rightCols(H));
    if (variant_ == CellVariant::sigmoid_memory) c = sigmoid(c);
    tanh_cells_[t] = c.array().tanh();
    hidden_states_[t + 1] = tanh_cells_[t].cwiseProduct(act.middleCols(2 * H, H));
    cells_[t + 1] = std::move(c);

    if (return_sequences_) {
      MutableStridedMap y_t(y.data() + t * H, B, H, Eigen::OuterStride<>(T * H));
      y_t = hidden_states_[t + 1];
    }
  }
  if (!return_sequences_) y.matrix(batch, hidden_) = hidden_states_[steps];
  return y;
}

Tensor Lstm::backward(const Tensor& grad_out) {
  require_forward();
  const std::size_t batch = input_cache_.dim(0), steps = input_cache_.dim(1);
  const auto B = static_cast<Eigen::Index>(batch);
  const auto H = static_cast<Eigen::Index>(hidden_);
  const auto T = static_cast<Eigen::Index>(steps);
  const Shape expected = return_sequences_ ? Shape{batch, steps, hidden_} : Shape{batch, hidden_};
  if (grad_out.shape() != expected) {
    throw std::invalid_argument("lstm backward: gradient shape " + shape_string(grad_out.shape()) +
                                " does not match output " + shape_string(expected));
  }

  const auto W = W_.value.matrix(hidden_, 4 * hidden_);
  auto dW = W_.grad.matrix(hidden_, 4 * hidden_);
  auto db = b_.grad.matrix(1, 4 * hidden_);

  RowMatrix da_all(B * T, 4 * H);
  RowMatrix dh = RowMatrix::Zero(B, H);
  RowMatrix dc = RowMatrix::Zero(B, H);
  if (!return_sequences_) dh = grad_out.matrix(batch, hidden_);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    if (return_sequences_) {
      const StridedMap g_t(grad_out.data() + t * H, B, H, Eigen::OuterStride<>(T * H));
      dh += g_t;
    }
    const RowMatrix& act = acts_[t];
    const auto f = act.leftCols(H).array();
    const auto i = act.middleCols(H, H).array();
    const auto o = act.middleCols(2 * H, H).array();
    const auto g = act.rightCols(H).array();
    const auto tc = tanh_cells_[t].array();

    const RowMatrix d_o = dh.array() * tc;
    RowMatrix dz = dc.array() + dh.array() * o * (1.0 - tc.square());
    if (variant_ == CellVariant::sigmoid_memory) {
      const auto c = cells_[t + 1].array();
      dz = dz.array() * c * (1.0 - c);
    }

    MutableStridedMap da(da_all.data() + t * 4 * H, B, 4 * H, Eigen::OuterStride<>(T * 4 * H));
    da.leftCols(H) = dz.array() * cells_[t].array() * f * (1.0 - f);
    da.middleCols(H, H) = dz.array() * g * i * (1.0 - i);
    da.middleCols(2 * H, H) = d_o.array() * o * (1.0 - o);
    da.rightCols(H) = dz.array() * i * (1.0 - g.square());

    dc = dz.array() * f;
    dW.noalias() += hidden_states_[t].transpose() * da;
    db += da.colwise().sum();
    dh.noalias() = da * W.transpose();
  }

  const auto X = input_cache_.matrix(batch * steps, input_);
  U_.grad.matrix(input_, 4 * hidden_).noalias() += X.transpose() * da_all;
  Tensor dx({batch, steps, input_});
  dx.matrix(batch * steps, input_).noalias() = da_all * U_.value.matrix(input_, 4 * hidden_).transpose();
  return dx;
}

}  // namespace meterguard::nn
