#include "meterguard/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace meterguard::nn {

void Layer::set_name(const std::string& name) {
  name_ = name;
  for (Parameter* p : parameters()) {
    const auto dot = p->name.rfind('.');
    const std::string local = dot == std::string::npos ? p->name : p->name.substr(dot + 1);
    p->name = name + "." + local;
  }
}

void Layer::require_forward() const {
  if (!has_forward_) {
    throw std::logic_error("backward called before forward on layer '" + name_ + "'");
  }
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values()) v = dist(rng);
}

// --- kink tracking ---------------------------------------------------------

namespace {
thread_local KinkScope* g_kink_scope = nullptr;
}

KinkScope::KinkScope() : previous_(g_kink_scope), hash_(1469598103934665603ull) {
  g_kink_scope = this;
}

KinkScope::~KinkScope() { g_kink_scope = previous_; }

std::uint64_t KinkScope::signature() const { return hash_; }

bool KinkScope::active() { return g_kink_scope != nullptr; }

void KinkScope::record(std::uint64_t value) {
  if (!g_kink_scope) return;
  auto& h = g_kink_scope->hash_;
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
}

// --- dense -----------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out)
    : in_(in), out_(out), weight_("weight", {in, out}), bias_("bias", {out}) {}

void Dense::initialize(std::mt19937_64& rng) {
  glorot_uniform(weight_.value, in_, out_, rng);
  bias_.value.fill(0.0);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw std::invalid_argument("dense '" + name_ + "' expects [B, " + std::to_string(in_) +
                                "], got " + shape_string(x.shape()));
  }
  input_ = x;
  mark_forward();
  const std::size_t b = x.dim(0);
  Tensor y({b, out_});
  auto ym = y.matrix(b, out_);
  ym.noalias() = x.matrix(b, in_) * weight_.value.matrix(in_, out_);
  ym.rowwise() += bias_.value.matrix(1, out_).row(0);
  return y;
}

Tensor Dense::backward(const Tensor& g) {
  require_forward();
  const std::size_t b = input_.dim(0);
  const auto gm = g.matrix(b, out_);
  const auto xm = input_.matrix(b, in_);
  weight_.grad.matrix(in_, out_).noalias() += xm.transpose() * gm;
  bias_.grad.matrix(1, out_) += gm.colwise().sum();
  Tensor dx({b, in_});
  dx.matrix(b, in_).noalias() = gm * weight_.value.matrix(in_, out_).transpose();
  return dx;
}

nlohmann::json Dense::describe() const { return {{"type", "dense"}, {"in", in_}, {"out", out_}}; }

// --- activations -----------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  mark_forward();
  Tensor y = x;
  const bool track = KinkScope::active();
  std::uint64_t bits = 0;
  std::size_t n = 0;
  for (double& v : y.values()) {
    const bool on = v > 0.0;
    if (!on) v = 0.0;
    if (track) {
      bits = (bits << 1) | static_cast<std::uint64_t>(on);
      if (++n == 64) {
        KinkScope::record(bits);
        bits = 0;
        n = 0;
      }
    }
  }
  if (track) KinkScope::record(bits ^ (static_cast<std::uint64_t>(n) << 56));
  return y;
}

Tensor Relu::backward(const Tensor& g) {
  require_forward();
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  mark_forward();
  output_ = x;
  for (double& v : output_.values()) v = 1.0 / (1.0 + std::exp(-v));
  return output_;
}

Tensor Sigmoid::backward(const Tensor& g) {
  require_forward();
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= output_[i] * (1.0 - output_[i]);
  return dx;
}

Tensor Tanh::forward(const Tensor& x) {
  mark_forward();
  output_ = x;
  for (double& v : output_.values()) v = std::tanh(v);
  return output_;
}

Tensor Tanh::backward(const Tensor& g) {
  require_forward();
  Tensor dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - output_[i] * output_[i];
  return dx;
}

Tensor Flatten::forward(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("flatten needs a batch axis");
  mark_forward();
  input_shape_ = x.shape();
  const std::size_t b = x.dim(0);
  return x.reshaped({b, b ? x.size() / b : 0});
}

Tensor Flatten::backward(const Tensor& g) {
  require_forward();
  return g.reshaped(input_shape_);
}

// --- pooling ---------------------------------------------------------------

MaxPool1d::MaxPool1d(std::size_t window) : window_(window) {
  if (window == 0) throw std::invalid_argument("pool window must be >= 1");
}

Tensor MaxPool1d::forward(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("maxpool1d expects [B, L, C], got " + shape_string(x.shape()));
  const std::size_t b = x.dim(0), len = x.dim(1), c = x.dim(2);
  const std::size_t out_len = len / window_;
  if (out_len == 0) throw std::invalid_argument("maxpool1d window larger than input length");
  mark_forward();
  input_shape_ = x.shape();
  Tensor y({b, out_len, c});
  argmax_.assign(y.size(), 0);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t o = 0; o < out_len; ++o) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = (n * len + o * window_) * c + ch;
        for (std::size_t w = 1; w < window_; ++w) {
          const std::size_t idx = (n * len + o * window_ + w) * c + ch;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t out_idx = (n * out_len + o) * c + ch;
        y[out_idx] = x[best];
        argmax_[out_idx] = best;
        if (KinkScope::active()) KinkScope::record(best);
      }
    }
  }
  return y;
}

Tensor MaxPool1d::backward(const Tensor& g) {
  require_forward();
  Tensor dx(input_shape_);
  for (std::size_t i = 0; i < g.size(); ++i) dx[argmax_[i]] += g[i];
  return dx;
}

MaxPool2d::MaxPool2d(std::size_t window) : window_(window) {
  if (window == 0) throw std::invalid_argument("pool window must be >= 1");
}

Tensor MaxPool2d::forward(const Tensor& x) {
  if (x.rank() != 4) {
    throw std::invalid_argument("maxpool2d expects [B, H, W, C], got " + shape_string(x.shape()));
  }
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / window_, ow = w / window_;
  if (oh == 0 || ow == 0) throw std::invalid_argument("maxpool2d window larger than input");
  mark_forward();
  input_shape_ = x.shape();
  Tensor y({b, oh, ow, c});
  argmax_.assign(y.size(), 0);
  const bool track = KinkScope::active();
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = ((n * h + i * window_) * w + j * window_) * c + ch;
          for (std::size_t di = 0; di < window_; ++di) {
            for (std::size_t dj = 0; dj < window_; ++dj) {
              const std::size_t idx = ((n * h + i * window_ + di) * w + j * window_ + dj) * c + ch;
              if (x[idx] > x[best]) best = idx;
            }
          }
          const std::size_t out_idx = ((n * oh + i) * ow + j) * c + ch;
          y[out_idx] = x[best];
          argmax_[out_idx] = best;
          if (track) KinkScope::record(best);
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& g) {
  require_forward();
  Tensor dx(input_shape_);
  for (std::size_t i = 0; i < g.size(); ++i) dx[argmax_[i]] += g[i];
  return dx;
}

// --- sequential ------------------------------------------------------------

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
  const std::string type = layer->describe().at("type").get<std::string>();
  layer->set_name(name_ + "." + std::to_string(layers_.size()) + "." + type);
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Tensor Sequential::forward(const Tensor& x) {
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor Sequential::backward(const Tensor& g) {
  Tensor d = g;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
  return d;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (Parameter* p : l->parameters()) out.push_back(p);
  }
  return out;
}

void Sequential::initialize(std::mt19937_64& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

nlohmann::json Sequential::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->describe());
  return {{"type", "sequential"}, {"name", name_}, {"layers", layers}};
}

}  // namespace meterguard::nn
