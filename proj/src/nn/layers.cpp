#include "ilap/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ilap/errors.hpp"

namespace ilap::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// PyTorch default init: kaiming_uniform(a=sqrt(5)) for weights, U(-1/sqrt(fan_in), .) for bias.
void init_uniform(std::vector<float>& v, float bound, RandomEngine& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& x : v) x = dist(rng);
}

void require_rank4(const Tensor& x, const char* who) {
  if (x.rank() != 4) {
    throw InvariantError(std::string(who) + " expects an NCHW tensor, got " + x.shape_string());
  }
}

}  // namespace

void Layer::collect(const std::string&, std::vector<Param>&) {}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, RandomEngine& rng, bool bias)
    : in_(in_features),
      out_(out_features),
      has_bias_(bias),
      weight_(static_cast<std::size_t>(in_features) * out_features),
      bias_(bias ? out_features : 0),
      weight_grad_(weight_.size(), 0.0f),
      bias_grad_(bias_.size(), 0.0f) {
  const float bound = in_features > 0 ? 1.0f / std::sqrt(static_cast<float>(in_features)) : 0.0f;
  init_uniform(weight_, bound, rng);
  init_uniform(bias_, bound, rng);
}

Linear Linear::zeros(int in_features, int out_features, bool bias) {
  RandomEngine unused(0);
  Linear l(in_features, out_features, unused, bias);
  std::fill(l.weight_.begin(), l.weight_.end(), 0.0f);
  std::fill(l.bias_.begin(), l.bias_.end(), 0.0f);
  return l;
}

void Linear::add_output() {
  weight_.resize(weight_.size() + in_, 0.0f);
  weight_grad_.assign(weight_.size(), 0.0f);
  if (has_bias_) {
    bias_.push_back(0.0f);
    bias_grad_.assign(bias_.size(), 0.0f);
  }
  ++out_;
}

Tensor Linear::infer(const Tensor& x) const {
  const int n = x.batch();
  if (static_cast<int>(x.row_size()) != in_) {
    throw InvariantError("linear layer expects " + std::to_string(in_) + " inputs, got " +
                         x.shape_string());
  }
  Tensor y({n, out_});
  if (out_ == 0 || n == 0) return y;
  ConstMapMat xm(x.data(), n, in_);
  ConstMapMat wm(weight_.data(), out_, in_);
  MapMat ym(y.data(), n, out_);
  ym.noalias() = xm * wm.transpose();
  if (has_bias_) {
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias_.data(), out_);
  }
  return y;
}

Tensor Linear::forward(const Tensor& x, Mode) {
  input_ = x;
  return infer(x);
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = input_.batch();
  Tensor grad_in(input_.shape());
  if (out_ == 0 || n == 0) return grad_in;
  ConstMapMat g(grad_out.data(), n, out_);
  ConstMapMat xm(input_.data(), n, in_);
  MapMat gw(weight_grad_.data(), out_, in_);
  gw.noalias() += g.transpose() * xm;
  if (has_bias_) {
    for (int i = 0; i < n; ++i) {
      const float* row = grad_out.data() + static_cast<std::size_t>(i) * out_;
      for (int o = 0; o < out_; ++o) bias_grad_[o] += row[o];
    }
  }
  ConstMapMat wm(weight_.data(), out_, in_);
  MapMat gi(grad_in.data(), n, in_);
  gi.noalias() = g * wm;
  return grad_in;
}

void Linear::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "weight", &weight_, &weight_grad_, {out_, in_}});
  if (has_bias_) out.push_back({prefix + "bias", &bias_, &bias_grad_, {out_}});
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
               RandomEngine& rng, bool bias)
    : in_c_(in_channels),
      out_c_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias),
      weight_(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel),
      bias_(bias ? out_channels : 0),
      weight_grad_(weight_.size(), 0.0f),
      bias_grad_(bias_.size(), 0.0f) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_channels * kernel * kernel));
  init_uniform(weight_, bound, rng);
  init_uniform(bias_, bound, rng);
}

void Conv2d::im2col(const float* image, int height, int width, float* cols) const {
  const int oh = out_extent(height);
  const int ow = out_extent(width);
  std::size_t r = 0;
  for (int c = 0; c < in_c_; ++c) {
    const float* plane = image + static_cast<std::size_t>(c) * height * width;
    for (int ki = 0; ki < kernel_; ++ki) {
      for (int kj = 0; kj < kernel_; ++kj, ++r) {
        float* dst = cols + r * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride_ - padding_ + ki;
          if (iy < 0 || iy >= height) {
            std::fill(dst + y * ow, dst + (y + 1) * ow, 0.0f);
            continue;
          }
          const float* src_row = plane + static_cast<std::size_t>(iy) * width;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * stride_ - padding_ + kj;
            dst[y * ow + x] = (ix < 0 || ix >= width) ? 0.0f : src_row[ix];
          }
        }
      }
    }
  }
}

void Conv2d::col2im(const float* cols, int height, int width, float* image) const {
  const int oh = out_extent(height);
  const int ow = out_extent(width);
  std::size_t r = 0;
  for (int c = 0; c < in_c_; ++c) {
    float* plane = image + static_cast<std::size_t>(c) * height * width;
    for (int ki = 0; ki < kernel_; ++ki) {
      for (int kj = 0; kj < kernel_; ++kj, ++r) {
        const float* src = cols + r * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * stride_ - padding_ + ki;
          if (iy < 0 || iy >= height) continue;
          float* dst_row = plane + static_cast<std::size_t>(iy) * width;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * stride_ - padding_ + kj;
            if (ix >= 0 && ix < width) dst_row[ix] += src[y * ow + x];
          }
        }
      }
    }
  }
}

Tensor Conv2d::infer(const Tensor& x) const {
  require_rank4(x, "conv2d");
  if (x.dim(1) != in_c_) {
    throw InvariantError("conv2d expects " + std::to_string(in_c_) + " channels, got " +
                         x.shape_string());
  }
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_extent(h), ow = out_extent(w);
  const int patch = in_c_ * kernel_ * kernel_;
  Tensor y({n, out_c_, oh, ow});
  std::vector<float> cols(static_cast<std::size_t>(patch) * oh * ow);
  ConstMapMat wm(weight_.data(), out_c_, patch);
  for (int i = 0; i < n; ++i) {
    im2col(x.row(i).data(), h, w, cols.data());
    MapMat ym(y.row(i).data(), out_c_, oh * ow);
    ym.noalias() = wm * ConstMapMat(cols.data(), patch, oh * ow);
    if (has_bias_) {
      ym.colwise() += Eigen::Map<const Eigen::VectorXf>(bias_.data(), out_c_);
    }
  }
  return y;
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  input_ = x;
  return infer(x);
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int oh = out_extent(h), ow = out_extent(w);
  const int patch = in_c_ * kernel_ * kernel_;
  Tensor grad_in(input_.shape());
  std::vector<float> cols(static_cast<std::size_t>(patch) * oh * ow);
  std::vector<float> dcols(cols.size());
  ConstMapMat wm(weight_.data(), out_c_, patch);
  MapMat gw(weight_grad_.data(), out_c_, patch);
  for (int i = 0; i < n; ++i) {
    ConstMapMat g(grad_out.row(i).data(), out_c_, oh * ow);
    im2col(input_.row(i).data(), h, w, cols.data());
    gw.noalias() += g * ConstMapMat(cols.data(), patch, oh * ow).transpose();
    if (has_bias_) {
      for (int o = 0; o < out_c_; ++o) {
        const float* plane = grad_out.row(i).data() + static_cast<std::size_t>(o) * oh * ow;
        float acc = 0.0f;
        for (int k = 0; k < oh * ow; ++k) acc += plane[k];
        bias_grad_[o] += acc;
      }
    }
    MapMat dc(dcols.data(), patch, oh * ow);
    dc.noalias() = wm.transpose() * g;
    col2im(dcols.data(), h, w, grad_in.row(i).data());
  }
  return grad_in;
}

void Conv2d::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "weight", &weight_, &weight_grad_, {out_c_, in_c_, kernel_, kernel_}});
  if (has_bias_) out.push_back({prefix + "bias", &bias_, &bias_grad_, {out_c_}});
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::infer(const Tensor& x) const {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
  return y;
}

Tensor ReLU::forward(const Tensor& x, Mode) {
  output_ = infer(x);
  return output_;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (output_[i] <= 0.0f) g[i] = 0.0f;
  }
  return g;
}

// ---------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride, int padding)
    : kernel_(kernel), stride_(stride), padding_(padding) {}

Tensor MaxPool2d::pool(const Tensor& x, std::vector<std::int64_t>* argmax) const {
  require_rank4(x, "maxpool2d");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * padding_ - kernel_) / stride_ + 1;
  const int ow = (w + 2 * padding_ - kernel_) / stride_ + 1;
  Tensor y({n, c, oh, ow});
  if (argmax) argmax->assign(y.size(), -1);
  std::size_t o = 0;
  for (int i = 0; i < n * c; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * h * w;
    for (int yy = 0; yy < oh; ++yy) {
      for (int xx = 0; xx < ow; ++xx, ++o) {
        float best = -std::numeric_limits<float>::infinity();
        std::int64_t best_at = -1;
        for (int ki = 0; ki < kernel_; ++ki) {
          const int iy = yy * stride_ - padding_ + ki;
          if (iy < 0 || iy >= h) continue;
          for (int kj = 0; kj < kernel_; ++kj) {
            const int ix = xx * stride_ - padding_ + kj;
            if (ix < 0 || ix >= w) continue;
            const std::size_t at = base + static_cast<std::size_t>(iy) * w + ix;
            if (x[at] > best) {
              best = x[at];
              best_at = static_cast<std::int64_t>(at);
            }
          }
        }
        y[o] = best;
        if (argmax) (*argmax)[o] = best_at;
      }
    }
  }
  return y;
}

Tensor MaxPool2d::infer(const Tensor& x) const { return pool(x, nullptr); }

Tensor MaxPool2d::forward(const Tensor& x, Mode) {
  input_shape_ = x.shape();
  return pool(x, &argmax_);
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor grad_in(input_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    if (argmax_[o] >= 0) grad_in[static_cast<std::size_t>(argmax_[o])] += grad_out[o];
  }
  return grad_in;
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(channels, 1.0f),
      beta_(channels, 0.0f),
      gamma_grad_(channels, 0.0f),
      beta_grad_(channels, 0.0f),
      running_mean_(channels, 0.0f),
      running_var_(channels, 1.0f) {}

Tensor BatchNorm2d::infer(const Tensor& x) const {
  require_rank4(x, "batchnorm2d");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y = x;
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const float scale = gamma_[ch] / std::sqrt(running_var_[ch] + eps_);
      const float shift = beta_[ch] - running_mean_[ch] * scale;
      float* p = y.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] = p[k] * scale + shift;
    }
  }
  return y;
}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
  require_rank4(x, "batchnorm2d");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const double count = static_cast<double>(n) * plane;
  cached_mode_ = mode;
  normalized_ = Tensor(x.shape());
  inv_std_.assign(c, 0.0f);
  Tensor y(x.shape());
  for (int ch = 0; ch < c; ++ch) {
    float mean = running_mean_[ch];
    float var = running_var_[ch];
    if (mode == Mode::train) {
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i) {
        const float* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) sum += p[k];
      }
      const double m = sum / count;
      for (int i = 0; i < n; ++i) {
        const float* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t k = 0; k < plane; ++k) sq += (p[k] - m) * (p[k] - m);
      }
      mean = static_cast<float>(m);
      var = static_cast<float>(sq / count);
      const double unbiased = count > 1 ? sq / (count - 1) : sq;
      running_mean_[ch] = (1 - momentum_) * running_mean_[ch] + momentum_ * mean;
      running_var_[ch] =
          (1 - momentum_) * running_var_[ch] + momentum_ * static_cast<float>(unbiased);
    }
    const float inv = 1.0f / std::sqrt(var + eps_);
    inv_std_[ch] = inv;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        const float xh = (x[off + k] - mean) * inv;
        normalized_[off + k] = xh;
        y[off + k] = gamma_[ch] * xh + beta_[ch];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  const int n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t plane = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
  const double count = static_cast<double>(n) * plane;
  Tensor grad_in(grad_out.shape());
  for (int ch = 0; ch < c; ++ch) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        sum_g += grad_out[off + k];
        sum_gx += grad_out[off + k] * normalized_[off + k];
      }
    }
    gamma_grad_[ch] += static_cast<float>(sum_gx);
    beta_grad_[ch] += static_cast<float>(sum_g);
    const float scale = gamma_[ch] * inv_std_[ch];
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        if (cached_mode_ == Mode::train) {
          grad_in[off + k] = static_cast<float>(
              scale * (grad_out[off + k] - sum_g / count - normalized_[off + k] * sum_gx / count));
        } else {
          grad_in[off + k] = scale * grad_out[off + k];
        }
      }
    }
  }
  return grad_in;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<Param>& out) {
  out.push_back({prefix + "weight", &gamma_, &gamma_grad_, {channels_}});
  out.push_back({prefix + "bias", &beta_, &beta_grad_, {channels_}});
  out.push_back({prefix + "running_mean", &running_mean_, nullptr, {channels_}});
  out.push_back({prefix + "running_var", &running_var_, nullptr, {channels_}});
}

// ---------------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::infer(const Tensor& x) const {
  require_rank4(x, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n, c});
  for (std::size_t i = 0; i < y.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < plane; ++k) s += x[i * plane + k];
    y[i] = static_cast<float>(s / plane);
  }
  return y;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Mode) {
  input_shape_ = x.shape();
  return infer(x);
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor grad_in(input_shape_);
  const std::size_t plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const float g = grad_out[i] / static_cast<float>(plane);
    for (std::size_t k = 0; k < plane; ++k) grad_in[i * plane + k] = g;
  }
  return grad_in;
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::infer(const Tensor& x) const {
  return x.reshaped({x.batch(), static_cast<int>(x.row_size())});
}

Tensor Flatten::forward(const Tensor& x, Mode) {
  input_shape_ = x.shape();
  return infer(x);
}

Tensor Flatten::backward(const Tensor& grad_out) { return grad_out.reshaped(input_shape_); }

// ---------------------------------------------------------------- InputAdapter

InputAdapter::InputAdapter(int size, int channels) : size_(size), channels_(channels) {}

std::vector<InputAdapter::Tap> InputAdapter::taps(int in, int out) {
  std::vector<Tap> t(out);
  const float scale = static_cast<float>(in) / static_cast<float>(out);
  for (int o = 0; o < out; ++o) {
    float src = (static_cast<float>(o) + 0.5f) * scale - 0.5f;
    if (src < 0.0f) src = 0.0f;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    t[o] = {lo, hi, src - static_cast<float>(lo)};
  }
  return t;
}

Tensor InputAdapter::infer(const Tensor& x) const {
  require_rank4(x, "input_adapter");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c != channels_ && c != 1) {
    throw InvariantError("input adapter cannot map " + std::to_string(c) + " channels to " +
                         std::to_string(channels_));
  }
  const auto ty = taps(h, size_);
  const auto tx = taps(w, size_);
  Tensor y({n, channels_, size_, size_});
  for (int i = 0; i < n; ++i) {
    for (int co = 0; co < channels_; ++co) {
      const int ci = c == 1 ? 0 : co;
      const float* src = x.data() + (static_cast<std::size_t>(i) * c + ci) * h * w;
      float* dst = y.data() + (static_cast<std::size_t>(i) * channels_ + co) * size_ * size_;
      for (int yy = 0; yy < size_; ++yy) {
        const auto& a = ty[yy];
        for (int xx = 0; xx < size_; ++xx) {
          const auto& b = tx[xx];
          const float top = src[a.lo * w + b.lo] * (1 - b.w_hi) + src[a.lo * w + b.hi] * b.w_hi;
          const float bot = src[a.hi * w + b.lo] * (1 - b.w_hi) + src[a.hi * w + b.hi] * b.w_hi;
          dst[yy * size_ + xx] = top * (1 - a.w_hi) + bot * a.w_hi;
        }
      }
    }
  }
  return y;
}

Tensor InputAdapter::forward(const Tensor& x, Mode) {
  input_shape_ = x.shape();
  return infer(x);
}

Tensor InputAdapter::backward(const Tensor& grad_out) {
  const int n = input_shape_[0], c = input_shape_[1], h = input_shape_[2], w = input_shape_[3];
  const auto ty = taps(h, size_);
  const auto tx = taps(w, size_);
  Tensor grad_in(input_shape_);
  for (int i = 0; i < n; ++i) {
    for (int co = 0; co < channels_; ++co) {
      const int ci = c == 1 ? 0 : co;
      float* dst = grad_in.data() + (static_cast<std::size_t>(i) * c + ci) * h * w;
      const float* g = grad_out.data() + (static_cast<std::size_t>(i) * channels_ + co) * size_ * size_;
      for (int yy = 0; yy < size_; ++yy) {
        const auto& a = ty[yy];
        for (int xx = 0; xx < size_; ++xx) {
          const auto& b = tx[xx];
          const float v = g[yy * size_ + xx];
          dst[a.lo * w + b.lo] += v * (1 - a.w_hi) * (1 - b.w_hi);
          dst[a.lo * w + b.hi] += v * (1 - a.w_hi) * b.w_hi;
          dst[a.hi * w + b.lo] += v * a.w_hi * (1 - b.w_hi);
          dst[a.hi * w + b.hi] += v * a.w_hi * b.w_hi;
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- Sequential

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& [name, layer] : other.layers_) layers_.emplace_back(name, layer->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  return add(std::to_string(layers_.size()), std::move(layer));
}

Sequential& Sequential::add(std::string name, std::unique_ptr<Layer> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& [name, layer] : layers_) h = layer->forward(h, mode);
  return h;
}

Tensor Sequential::infer(const Tensor& x) const {
  Tensor h = x;
  for (const auto& [name, layer] : layers_) h = layer->infer(h);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

void Sequential::collect(const std::string& prefix, std::vector<Param>& out) {
  for (auto& [name, layer] : layers_) layer->collect(prefix + name + ".", out);
}

// ---------------------------------------------------------------- BasicBlock

BasicBlock::BasicBlock(int in_channels, int out_channels, int stride, RandomEngine& rng) {
  main_.add("conv1", std::make_unique<Conv2d>(in_channels, out_channels, 3, stride, 1, rng, false))
      .add("bn1", std::make_unique<BatchNorm2d>(out_channels))
      .add("relu", std::make_unique<ReLU>())
      .add("conv2", std::make_unique<Conv2d>(out_channels, out_channels, 3, 1, 1, rng, false))
      .add("bn2", std::make_unique<BatchNorm2d>(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample_.add("0", std::make_unique<Conv2d>(in_channels, out_channels, 1, stride, 0, rng, false))
        .add("1", std::make_unique<BatchNorm2d>(out_channels));
  }
}

Tensor BasicBlock::infer(const Tensor& x) const {
  Tensor y = main_.infer(x);
  const Tensor shortcut = downsample_.empty() ? x : downsample_.infer(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0f, y[i] + shortcut[i]);
  return y;
}

Tensor BasicBlock::forward(const Tensor& x, Mode mode) {
  Tensor y = main_.forward(x, mode);
  const Tensor shortcut = downsample_.empty() ? x : downsample_.forward(x, mode);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0f, y[i] + shortcut[i]);
  output_ = y;
  return y;
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (output_[i] <= 0.0f) g[i] = 0.0f;
  }
  Tensor grad_in = main_.backward(g);
  const Tensor grad_short = downsample_.empty() ? g : downsample_.backward(g);
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += grad_short[i];
  return grad_in;
}

void BasicBlock::collect(const std::string& prefix, std::vector<Param>& out) {
  main_.collect(prefix, out);
  downsample_.collect(prefix + "downsample.", out);
}

}  // namespace ilap::nn
