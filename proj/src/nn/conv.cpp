#include <stdexcept>

#include "meterguard/nn/layers.hpp"

namespace meterguard::nn {

const char* to_string(Padding p) { return p == Padding::same ? "same" : "valid"; }

Padding parse_padding(const std::string& s) {
  if (s == "same") return Padding::same;
  if (s == "valid") return Padding::valid;
  throw std::invalid_argument("unknown padding '" + s + "'");
}

AxisGeometry conv_geometry(std::size_t length, std::size_t kernel, std::size_t stride,
                           Padding padding) {
  if (stride == 0 || kernel == 0) throw std::invalid_argument("kernel and stride must be >= 1");
  AxisGeometry g;
  if (padding == Padding::valid) {
    if (length < kernel) {
      throw std::invalid_argument("input length " + std::to_string(length) +
                                  " shorter than kernel " + std::to_string(kernel));
    }
    g.out = (length - kernel) / stride + 1;
  } else {
    g.out = (length + stride - 1) / stride;
    const std::size_t needed = (g.out - 1) * stride + kernel;
    g.pad_before = needed > length ? (needed - length) / 2 : 0;
  }
  return g;
}

// --- conv1d ----------------------------------------------------------------

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, Padding padding)
    : cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      stride_(stride),
      padding_(padding),
      kernel_("kernel", {kernel, in_channels, out_channels}),
      bias_("bias", {out_channels}) {}

void Conv1d::initialize(std::mt19937_64& rng) {
  glorot_uniform(kernel_.value, k_ * cin_, k_ * cout_, rng);
  bias_.value.fill(0.0);
}

Tensor Conv1d::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != cin_) {
    throw std::invalid_argument("conv1d '" + name_ + "' expects [B, L, " + std::to_string(cin_) +
                                "], got " + shape_string(x.shape()));
  }
  const std::size_t b = x.dim(0), len = x.dim(1);
  geom_ = conv_geometry(len, k_, stride_, padding_);
  input_shape_ = x.shape();
  mark_forward();

  const std::size_t width = k_ * cin_;
  cols_.setZero(static_cast<Eigen::Index>(b * geom_.out), static_cast<Eigen::Index>(width));
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t o = 0; o < geom_.out; ++o) {
      const auto row = static_cast<Eigen::Index>(n * geom_.out + o);
      for (std::size_t k = 0; k < k_; ++k) {
        const long pos = static_cast<long>(o * stride_ + k) - static_cast<long>(geom_.pad_before);
        if (pos < 0 || pos >= static_cast<long>(len)) continue;
        const double* src = x.data() + (n * len + static_cast<std::size_t>(pos)) * cin_;
        for (std::size_t c = 0; c < cin_; ++c) cols_(row, static_cast<Eigen::Index>(k * cin_ + c)) = src[c];
      }
    }
  }
  Tensor y({b, geom_.out, cout_});
  auto ym = y.matrix(b * geom_.out, cout_);
  ym.noalias() = cols_ * kernel_.value.matrix(width, cout_);
  ym.rowwise() += bias_.value.matrix(1, cout_).row(0);
  return y;
}

Tensor Conv1d::backward(const Tensor& g) {
  require_forward();
  const std::size_t b = input_shape_[0], len = input_shape_[1];
  const std::size_t width = k_ * cin_;
  const auto gm = g.matrix(b * geom_.out, cout_);
  kernel_.grad.matrix(width, cout_).noalias() += cols_.transpose() * gm;
  bias_.grad.matrix(1, cout_) += gm.colwise().sum();
  const RowMatrix dcols = gm * kernel_.value.matrix(width, cout_).transpose();

  Tensor dx(input_shape_);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t o = 0; o < geom_.out; ++o) {
      const auto row = static_cast<Eigen::Index>(n * geom_.out + o);
      for (std::size_t k = 0; k < k_; ++k) {
        const long pos = static_cast<long>(o * stride_ + k) - static_cast<long>(geom_.pad_before);
        if (pos < 0 || pos >= static_cast<long>(len)) continue;
        double* dst = dx.data() + (n * len + static_cast<std::size_t>(pos)) * cin_;
        for (std::size_t c = 0; c < cin_; ++c) dst[c] += dcols(row, static_cast<Eigen::Index>(k * cin_ + c));
      }
    }
  }
  return dx;
}

nlohmann::json Conv1d::describe() const {
  return {{"type", "conv1d"},   {"in_channels", cin_}, {"out_channels", cout_},
          {"kernel", k_},       {"stride", stride_},   {"padding", to_string(padding_)}};
}

// --- conv2d ----------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, Padding padding)
    : cin_(in_channels),
      cout_(out_channels),
      k_(kernel),
      stride_(stride),
      padding_(padding),
      kernel_("kernel", {kernel, kernel, in_channels, out_channels}),
      bias_("bias", {out_channels}) {}

void Conv2d::initialize(std::mt19937_64& rng) {
  glorot_uniform(kernel_.value, k_ * k_ * cin_, k_ * k_ * cout_, rng);
  bias_.value.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 4 || x.dim(3) != cin_) {
    throw std::invalid_argument("conv2d '" + name_ + "' expects [B, H, W, " +
                                std::to_string(cin_) + "], got " + shape_string(x.shape()));
  }
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2);
  geom_h_ = conv_geometry(h, k_, stride_, padding_);
  geom_w_ = conv_geometry(w, k_, stride_, padding_);
  input_shape_ = x.shape();
  mark_forward();

  const std::size_t oh = geom_h_.out, ow = geom_w_.out;
  const std::size_t width = k_ * k_ * cin_;
  cols_.setZero(static_cast<Eigen::Index>(b * oh * ow), static_cast<Eigen::Index>(width));
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double* row = cols_.data() + ((n * oh + i) * ow + j) * width;
        for (std::size_t ki = 0; ki < k_; ++ki) {
          const long r = static_cast<long>(i * stride_ + ki) - static_cast<long>(geom_h_.pad_before);
          if (r < 0 || r >= static_cast<long>(h)) continue;
          for (std::size_t kj = 0; kj < k_; ++kj) {
            const long c = static_cast<long>(j * stride_ + kj) - static_cast<long>(geom_w_.pad_before);
            if (c < 0 || c >= static_cast<long>(w)) continue;
            const double* src =
                x.data() + ((n * h + static_cast<std::size_t>(r)) * w + static_cast<std::size_t>(c)) * cin_;
            double* dst = row + (ki * k_ + kj) * cin_;
            for (std::size_t ch = 0; ch < cin_; ++ch) dst[ch] = src[ch];
          }
        }
      }
    }
  }
  Tensor y({b, oh, ow, cout_});
  auto ym = y.matrix(b * oh * ow, cout_);
  ym.noalias() = cols_ * kernel_.value.matrix(width, cout_);
  ym.rowwise() += bias_.value.matrix(1, cout_).row(0);
  return y;
}

Tensor Conv2d::backward(const Tensor& g) {
  require_forward();
  const std::size_t b = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  const std::size_t oh = geom_h_.out, ow = geom_w_.out;
  const std::size_t width = k_ * k_ * cin_;
  const auto gm = g.matrix(b * oh * ow, cout_);
  kernel_.grad.matrix(width, cout_).noalias() += cols_.transpose() * gm;
  bias_.grad.matrix(1, cout_) += gm.colwise().sum();
  const RowMatrix dcols = gm * kernel_.value.matrix(width, cout_).transpose();

  Tensor dx(input_shape_);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double* row = dcols.data() + ((n * oh + i) * ow + j) * width;
        for (std::size_t ki = 0; ki < k_; ++ki) {
          const long r = static_cast<long>(i * stride_ + ki) - static_cast<long>(geom_h_.pad_before);
          if (r < 0 || r >= static_cast<long>(h)) continue;
          for (std::size_t kj = 0; kj < k_; ++kj) {
            const long c = static_cast<long>(j * stride_ + kj) - static_cast<long>(geom_w_.pad_before);
            if (c < 0 || c >= static_cast<long>(w)) continue;
            double* dst =
                dx.data() + ((n * h + static_cast<std::size_t>(r)) * w + static_cast<std::size_t>(c)) * cin_;
            const double* src = row + (ki * k_ + kj) * cin_;
            for (std::size_t ch = 0; ch < cin_; ++ch) dst[ch] += src[ch];
          }
        }
      }
    }
  }
  return dx;
}

nlohmann::json Conv2d::describe() const {
  return {{"type", "conv2d"},   {"in_channels", cin_}, {"out_channels", cout_},
          {"kernel", k_},       {"stride", stride_},   {"padding", to_string(padding_)}};
}

}  // namespace meterguard::nn
