#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "beadsight/core.hpp"
#include "beadsight/rng.hpp"
#include "beadsight/tensor.hpp"

namespace beadsight {

struct UNetConfig {
  int H = 15;
  int grid = 256;
  int base_channels = 64;
  double leaky_slope = 0.01;

  void validate() const {
    require(H >= 1, ErrorKind::data, "UNetConfig: H must be >= 1");
    require(grid >= 8 && grid % 8 == 0, ErrorKind::data,
            "UNetConfig: grid must be a positive multiple of 8");
    require(base_channels >= 1, ErrorKind::data,
            "UNetConfig: base_channels must be >= 1");
  }

  int in_channels() const { return 3 * H; }
};

// ---- layers (single-sample, cached for backward) ----

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_c, int out_c, int k, int stride)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(k / 2) {
    w_.init(name + ".weight", {out_c, in_c, k, k});
    b_.init(name + ".bias", {out_c});
  }

  void init_params(Rng& rng) {
    const double std = std::sqrt(2.0 / (double(in_c_) * k_ * k_));
    for (T& v : w_.value) v = T(rng.normal(0.0, std));
    std::fill(b_.value.begin(), b_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    require(x.c == in_c_, ErrorKind::data, w_.name + ": channel mismatch");
    const int ho = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int wo = (x.w + 2 * pad_ - k_) / stride_ + 1;
    x_cache_ = x;
    in_h_ = x.h;
    in_w_ = x.w;
    out_h_ = ho;
    out_w_ = wo;
    Tensor<T> y(out_c_, ho, wo);
    const size_t plane = size_t(ho) * wo;

    if (k_ == 1 && stride_ == 1) {
      // 1x1: the input itself is the patch matrix
      ECMap<T> X(x.data(), in_c_, plane);
      ECMap<T> W(w_.value.data(), out_c_, in_c_);
      EMap<T> Y(y.data(), out_c_, plane);
      Y.noalias() = W * X;
    } else {
      const size_t rows = size_t(in_c_) * k_ * k_;
      const int chunk = chunk_rows(rows, wo);
      for (int r0 = 0; r0 < ho; r0 += chunk) {
        const int r1 = std::min(ho, r0 + chunk);
        im2col_rows(x_cache_, k_, stride_, pad_, cols_, wo, r0, r1);
        const size_t cc = size_t(r1 - r0) * wo;
        ECMap<T> C(cols_.data(), rows, cc);
        ECMap<T> W(w_.value.data(), out_c_, rows);
        yt_.resize(out_c_, Eigen::Index(cc));
        yt_.noalias() = W * C;
        for (int oc = 0; oc < out_c_; ++oc)
          EMap<T>(y.data() + (size_t(oc) * ho + r0) * wo, 1, cc) = yt_.row(oc);
      }
    }
    for (int c = 0; c < out_c_; ++c) {
      T* row = y.data() + size_t(c) * plane;
      for (size_t i = 0; i < plane; ++i) row[i] += b_.value[c];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const size_t plane = size_t(out_h_) * out_w_;

    for (int c = 0; c < out_c_; ++c) {
      T sum = T(0);
      const T* row = dy.data() + size_t(c) * plane;
      for (size_t i = 0; i < plane; ++i) sum += row[i];
      b_.grad[c] += sum;
    }

    Tensor<T> dx(in_c_, in_h_, in_w_);
    if (k_ == 1 && stride_ == 1) {
      ECMap<T> dY(dy.data(), out_c_, plane);
      ECMap<T> X(x_cache_.data(), in_c_, plane);
      EMap<T> dW(w_.grad.data(), out_c_, in_c_);
      dW.noalias() += dY * X.transpose();
      ECMap<T> W(w_.value.data(), out_c_, in_c_);
      EMap<T> dX(dx.data(), in_c_, plane);
      dX.noalias() = W.transpose() * dY;
    } else {
      const size_t rows = size_t(in_c_) * k_ * k_;
      const int chunk = chunk_rows(rows, out_w_);
      EMat<T> dYc(out_c_, 0);
      for (int r0 = 0; r0 < out_h_; r0 += chunk) {
        const int r1 = std::min(out_h_, r0 + chunk);
        const size_t cc = size_t(r1 - r0) * out_w_;
        im2col_rows(x_cache_, k_, stride_, pad_, cols_, out_w_, r0, r1);
        ECMap<T> C(cols_.data(), rows, cc);

        dYc.resize(out_c_, Eigen::Index(cc));
        for (int oc = 0; oc < out_c_; ++oc)
          dYc.row(oc) = ECMap<T>(dy.data() + (size_t(oc) * out_h_ + r0) * out_w_,
                                 1, cc);

        EMap<T> dW(w_.grad.data(), out_c_, rows);
        dW.noalias() += dYc * C.transpose();

        dcols_.assign(rows * cc, T(0));
        ECMap<T> W(w_.value.data(), out_c_, rows);
        EMap<T> dC(dcols_.data(), rows, cc);
        dC.noalias() = W.transpose() * dYc;
        col2im_rows(dcols_, k_, stride_, pad_, dx, out_w_, r0, r1);
      }
    }
    return dx;
  }

  void release_cache() {
    cols_.clear();
    cols_.shrink_to_fit();
    dcols_.clear();
    dcols_.shrink_to_fit();
    x_cache_ = Tensor<T>();
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  // cap the patch-matrix chunk around 16M scalars (~64 MB as float)
  static int chunk_rows(size_t patch_rows, int wo) {
    const size_t budget = size_t(16) << 20;
    return std::max(1, int(budget / std::max<size_t>(1, patch_rows * wo)));
  }

  int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  Param<T> w_, b_;
  std::vector<T> cols_, dcols_;
  EMat<T> yt_;
  Tensor<T> x_cache_;
};

template <typename T>
class InstanceNorm {
 public:
  static constexpr double kEps = 1e-5;

  InstanceNorm() = default;
  InstanceNorm(std::string name, int channels) : channels_(channels) {
    gamma_.init(name + ".gamma", {channels}, T(1));
    beta_.init(name + ".beta", {channels}, T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) {
    require(x.c == channels_, ErrorKind::data, gamma_.name + ": channel mismatch");
    Tensor<T> y(x.c, x.h, x.w);
    xhat_ = Tensor<T>(x.c, x.h, x.w);
    inv_std_.assign(channels_, T(0));
    const size_t n = size_t(x.h) * x.w;
    for (int c = 0; c < channels_; ++c) {
      const T* src = x.data() + size_t(c) * n;
      double mean = 0.0;
      for (size_t i = 0; i < n; ++i) mean += double(src[i]);
      mean /= double(n);
      double var = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double d = double(src[i]) - mean;
        var += d * d;
      }
      var /= double(n);
      const T inv = T(1.0 / std::sqrt(var + kEps));
      inv_std_[c] = inv;
      T* xh = xhat_.data() + size_t(c) * n;
      T* dst = y.data() + size_t(c) * n;
      const T g = gamma_.value[c], b = beta_.value[c];
      for (size_t i = 0; i < n; ++i) {
        xh[i] = (src[i] - T(mean)) * inv;
        dst[i] = g * xh[i] + b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.c, dy.h, dy.w);
    const size_t n = size_t(dy.h) * dy.w;
    for (int c = 0; c < channels_; ++c) {
      const T* dyp = dy.data() + size_t(c) * n;
      const T* xh = xhat_.data() + size_t(c) * n;
      T* dxp = dx.data() + size_t(c) * n;

      T sum_dy = T(0), sum_dy_xh = T(0);
      for (size_t i = 0; i < n; ++i) {
        sum_dy += dyp[i];
        sum_dy_xh += dyp[i] * xh[i];
      }
      beta_.grad[c] += sum_dy;
      gamma_.grad[c] += sum_dy_xh;

      const T g = gamma_.value[c];
      const T inv = inv_std_[c];
      const T inv_n = T(1) / T(double(n));
      for (size_t i = 0; i < n; ++i) {
        dxp[i] = g * inv * (dyp[i] - inv_n * sum_dy - xh[i] * inv_n * sum_dy_xh);
      }
    }
    return dx;
  }

  void release_cache() { xhat_ = Tensor<T>(); }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

 private:
  int channels_ = 0;
  Param<T> gamma_, beta_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class Elu {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    y_ = Tensor<T>(x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i)
      y_.v[i] = x.v[i] > T(0) ? x.v[i] : T(std::expm1(double(x.v[i])));
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); ++i)
      dx.v[i] = dy.v[i] * (y_.v[i] > T(0) ? T(1) : y_.v[i] + T(1));
    return dx;
  }
  void release_cache() { y_ = Tensor<T>(); }

 private:
  Tensor<T> y_;
};

template <typename T>
class LeakyRelu {
 public:
  LeakyRelu() = default;
  explicit LeakyRelu(double slope) : slope_(T(slope)) {}

  Tensor<T> forward(const Tensor<T>& x) {
    mask_.assign(x.size(), 0);
    Tensor<T> y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); ++i) {
      mask_[i] = x.v[i] > T(0) ? 1 : 0;
      y.v[i] = mask_[i] ? x.v[i] : slope_ * x.v[i];
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); ++i)
      dx.v[i] = dy.v[i] * (mask_[i] ? T(1) : slope_);
    return dx;
  }
  void release_cache() { mask_.clear(); }

 private:
  T slope_ = T(0.01);
  std::vector<uint8_t> mask_;
};

template <typename T>
inline Tensor<T> nearest_up2(const Tensor<T>& x) {
  Tensor<T> y(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int r = 0; r < y.h; ++r)
      for (int col = 0; col < y.w; ++col)
        y.at(c, r, col) = x.at(c, r / 2, col / 2);
  return y;
}

template <typename T>
inline Tensor<T> nearest_up2_backward(const Tensor<T>& dy) {
  Tensor<T> dx(dy.c, dy.h / 2, dy.w / 2);
  for (int c = 0; c < dy.c; ++c)
    for (int r = 0; r < dy.h; ++r)
      for (int col = 0; col < dy.w; ++col)
        dx.at(c, r / 2, col / 2) += dy.at(c, r, col);
  return dx;
}

template <typename T>
inline Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.h == b.h && a.w == b.w, ErrorKind::data, "concat: spatial mismatch");
  Tensor<T> y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + std::ptrdiff_t(a.size()));
  return y;
}

template <typename T>
inline std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& y, int c_a) {
  Tensor<T> a(c_a, y.h, y.w), b(y.c - c_a, y.h, y.w);
  std::copy(y.v.begin(), y.v.begin() + std::ptrdiff_t(a.size()), a.v.begin());
  std::copy(y.v.begin() + std::ptrdiff_t(a.size()), y.v.end(), b.v.begin());
  return {std::move(a), std::move(b)};
}

// conv -> instance norm -> ELU, twice
template <typename T>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, int in_c, int out_c)
      : c1_(name + ".conv1", in_c, out_c, 3, 1), n1_(name + ".norm1", out_c),
        c2_(name + ".conv2", out_c, out_c, 3, 1), n2_(name + ".norm2", out_c) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return e2_.forward(n2_.forward(c2_.forward(e1_.forward(n1_.forward(c1_.forward(x))))));
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    return c1_.backward(n1_.backward(e1_.backward(c2_.backward(n2_.backward(e2_.backward(dy))))));
  }
  void init_params(Rng& rng) {
    c1_.init_params(rng);
    c2_.init_params(rng);
  }
  void collect(std::vector<Param<T>*>& out) {
    c1_.collect(out);
    n1_.collect(out);
    c2_.collect(out);
    n2_.collect(out);
  }
  void release_cache() {
    c1_.release_cache();
    n1_.release_cache();
    e1_.release_cache();
    c2_.release_cache();
    n2_.release_cache();
    e2_.release_cache();
  }

 private:
  Conv2d<T> c1_;
  InstanceNorm<T> n1_;
  Elu<T> e1_;
  Conv2d<T> c2_;
  InstanceNorm<T> n2_;
  Elu<T> e2_;
};

// stride-2 3x3 conv + LeakyReLU
template <typename T>
class DownBlock {
 public:
  DownBlock() = default;
  DownBlock(const std::string& name, int in_c, int out_c, double slope)
      : conv_(name + ".conv", in_c, out_c, 3, 2), act_(slope) {}

  Tensor<T> forward(const Tensor<T>& x) { return act_.forward(conv_.forward(x)); }
  Tensor<T> backward(const Tensor<T>& dy) { return conv_.backward(act_.backward(dy)); }
  void init_params(Rng& rng) { conv_.init_params(rng); }
  void collect(std::vector<Param<T>*>& out) { conv_.collect(out); }
  void release_cache() {
    conv_.release_cache();
    act_.release_cache();
  }

 private:
  Conv2d<T> conv_;
  LeakyRelu<T> act_;
};

// nearest x2 upsample + channel-halving 3x3 conv
template <typename T>
class UpBlock {
 public:
  UpBlock() = default;
  UpBlock(const std::string& name, int in_c)
      : conv_(name + ".conv", in_c, in_c / 2, 3, 1) {}

  Tensor<T> forward(const Tensor<T>& x) { return conv_.forward(nearest_up2(x)); }
  Tensor<T> backward(const Tensor<T>& dy) {
    return nearest_up2_backward(conv_.backward(dy));
  }
  void init_params(Rng& rng) { conv_.init_params(rng); }
  void collect(std::vector<Param<T>*>& out) { conv_.collect(out); }
  void release_cache() { conv_.release_cache(); }

 private:
  Conv2d<T> conv_;
};

// ---- the U-Net ----

template <typename T>
class UNet {
 public:
  explicit UNet(const UNetConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int B = cfg.base_channels;
    enc1_ = ConvBlock<T>("enc1", cfg.in_channels(), B);
    down1_ = DownBlock<T>("down1", B, 2 * B, cfg.leaky_slope);
    enc2_ = ConvBlock<T>("enc2", 2 * B, 2 * B);
    down2_ = DownBlock<T>("down2", 2 * B, 4 * B, cfg.leaky_slope);
    enc3_ = ConvBlock<T>("enc3", 4 * B, 4 * B);
    down3_ = DownBlock<T>("down3", 4 * B, 8 * B, cfg.leaky_slope);
    enc4_ = ConvBlock<T>("enc4", 8 * B, 8 * B);
    up1_ = UpBlock<T>("up1", 8 * B);
    dec3_ = ConvBlock<T>("dec3", 8 * B, 4 * B);
    up2_ = UpBlock<T>("up2", 4 * B);
    dec2_ = ConvBlock<T>("dec2", 4 * B, 2 * B);
    up3_ = UpBlock<T>("up3", 2 * B);
    dec1_ = ConvBlock<T>("dec1", 2 * B, B);
    head_ = Conv2d<T>("head", B, 1, 1, 1);
  }

  const UNetConfig& config() const { return cfg_; }

  void init_params(uint64_t seed) {
    Rng rng(seed, /*stream=*/0x0217);
    enc1_.init_params(rng);
    down1_.init_params(rng);
    enc2_.init_params(rng);
    down2_.init_params(rng);
    enc3_.init_params(rng);
    down3_.init_params(rng);
    enc4_.init_params(rng);
    up1_.init_params(rng);
    dec3_.init_params(rng);
    up2_.init_params(rng);
    dec2_.init_params(rng);
    up3_.init_params(rng);
    dec1_.init_params(rng);
    head_.init_params(rng);
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    enc1_.collect(out);
    down1_.collect(out);
    enc2_.collect(out);
    down2_.collect(out);
    enc3_.collect(out);
    down3_.collect(out);
    enc4_.collect(out);
    up1_.collect(out);
    dec3_.collect(out);
    up2_.collect(out);
    dec2_.collect(out);
    up3_.collect(out);
    dec1_.collect(out);
    head_.collect(out);
    return out;
  }

  size_t param_count() {
    size_t n = 0;
    for (auto* p : params()) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  // Raw (unclamped) single-channel output.
  Tensor<T> forward(const Tensor<T>& x) {
    require(x.c == cfg_.in_channels() && x.h == cfg_.grid && x.w == cfg_.grid,
            ErrorKind::data, "UNet::forward: input shape mismatch");
    trace_.clear();
    auto rec = [this](const Tensor<T>& t) { trace_.emplace_back(t.c, t.h); };
    rec(x);

    skip1_ = enc1_.forward(x);
    rec(skip1_);
    Tensor<T> d1 = down1_.forward(skip1_);
    rec(d1);
    skip2_ = enc2_.forward(d1);
    rec(skip2_);
    Tensor<T> d2 = down2_.forward(skip2_);
    rec(d2);
    skip3_ = enc3_.forward(d2);
    rec(skip3_);
    Tensor<T> d3 = down3_.forward(skip3_);
    rec(d3);
    Tensor<T> bottleneck = enc4_.forward(d3);
    rec(bottleneck);

    Tensor<T> u1 = up1_.forward(bottleneck);
    rec(u1);
    Tensor<T> cat1 = concat_channels(u1, skip3_);
    rec(cat1);
    Tensor<T> x3 = dec3_.forward(cat1);
    rec(x3);

    Tensor<T> u2 = up2_.forward(x3);
    rec(u2);
    Tensor<T> cat2 = concat_channels(u2, skip2_);
    rec(cat2);
    Tensor<T> x2 = dec2_.forward(cat2);
    rec(x2);

    Tensor<T> u3 = up3_.forward(x2);
    rec(u3);
    Tensor<T> cat3 = concat_channels(u3, skip1_);
    rec(cat3);
    Tensor<T> x1 = dec1_.forward(cat3);
    rec(x1);

    Tensor<T> y = head_.forward(x1);
    rec(y);
    return y;
  }

  // Accumulates parameter gradients; returns gradient w.r.t. the input.
  Tensor<T> backward(const Tensor<T>& dy) {
    const int B = cfg_.base_channels;
    Tensor<T> d = head_.backward(dy);
    d = dec1_.backward(d);
    auto [du3, dskip1] = split_channels(d, B);
    d = up3_.backward(du3);

    d = dec2_.backward(d);
    auto [du2, dskip2] = split_channels(d, 2 * B);
    d = up2_.backward(du2);

    d = dec3_.backward(d);
    auto [du1, dskip3] = split_channels(d, 4 * B);
    d = up1_.backward(du1);

    d = enc4_.backward(d);
    d = down3_.backward(d);
    for (size_t i = 0; i < d.size(); ++i) d.v[i] += dskip3.v[i];
    d = enc3_.backward(d);
    d = down2_.backward(d);
    for (size_t i = 0; i < d.size(); ++i) d.v[i] += dskip2.v[i];
    d = enc2_.backward(d);
    d = down1_.backward(d);
    for (size_t i = 0; i < d.size(); ++i) d.v[i] += dskip1.v[i];
    return enc1_.backward(d);
  }

  // Drop all forward caches (skip tensors, im2col buffers).
  void release_cache() {
    skip1_ = skip2_ = skip3_ = Tensor<T>();
    enc1_.release_cache();
    down1_.release_cache();
    enc2_.release_cache();
    down2_.release_cache();
    enc3_.release_cache();
    down3_.release_cache();
    enc4_.release_cache();
    up1_.release_cache();
    dec3_.release_cache();
    up2_.release_cache();
    dec2_.release_cache();
    up3_.release_cache();
    dec1_.release_cache();
    head_.release_cache();
  }

  // (channels, spatial side) pairs recorded by the last forward pass
  const std::vector<std::pair<int, int>>& shape_trace() const { return trace_; }

 private:
  UNetConfig cfg_;
  ConvBlock<T> enc1_, enc2_, enc3_, enc4_, dec3_, dec2_, dec1_;
  DownBlock<T> down1_, down2_, down3_;
  UpBlock<T> up1_, up2_, up3_;
  Conv2d<T> head_;
  Tensor<T> skip1_, skip2_, skip3_;
  std::vector<std::pair<int, int>> trace_;
};

// ---- loss ----

template <typename T>
inline T mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.size() == target.size(), ErrorKind::data, "mse_loss: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred.v[i]) - double(target.v[i]);
    acc += d * d;
  }
  return T(acc / double(pred.size()));
}

template <typename T>
inline Tensor<T> mse_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  Tensor<T> g(pred.c, pred.h, pred.w);
  const T scale = T(2) / T(double(pred.size()));
  for (size_t i = 0; i < pred.size(); ++i)
    g.v[i] = scale * (pred.v[i] - target.v[i]);
  return g;
}

// ---- data conversion ----

template <typename T>
inline Tensor<T> window_to_tensor(const FrameWindow& w, const UNetConfig& cfg) {
  w.validate(cfg.H);
  const int g = cfg.grid;
  Tensor<T> x(cfg.in_channels(), g, g);
  for (int f = 0; f < cfg.H; ++f) {
    const Frame& fr = w.frames[f];
    require(fr.grid == g, ErrorKind::data, "window_to_tensor: frame grid mismatch");
    for (int r = 0; r < g; ++r)
      for (int c = 0; c < g; ++c)
        for (int ch = 0; ch < 3; ++ch)
          x.at(f * 3 + ch, r, c) = T(fr.at(r, c, ch));
  }
  return x;
}

template <typename T>
inline Tensor<T> pressure_to_tensor(const PressureMap& m) {
  Tensor<T> t(1, m.grid, m.grid);
  for (size_t i = 0; i < m.pressure.size(); ++i) t.v[i] = T(m.pressure[i]);
  return t;
}

// Clamp the raw network output to a valid (non-negative) pressure map.
template <typename T>
inline PressureMap tensor_to_pressure(const Tensor<T>& t) {
  require(t.c == 1, ErrorKind::data, "tensor_to_pressure: expected 1 channel");
  PressureMap m(t.h);
  for (size_t i = 0; i < t.size(); ++i)
    m.pressure[i] = std::max(0.f, float(t.v[i]));
  return m;
}

// ---- checkpoint container ----
//
// "BSCK" magic, u32 version, u32 header length, JSON header (config +
// ordered tensor table), then raw little-endian f32 tensor data.

inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
inline void save_checkpoint(const std::filesystem::path& path, UNet<T>& net,
                            const nlohmann::json& extra = {}) {
  nlohmann::json header;
  const UNetConfig& cfg = net.config();
  header["config"] = {{"H", cfg.H},
                      {"grid", cfg.grid},
                      {"base_channels", cfg.base_channels},
                      {"leaky_slope", cfg.leaky_slope}};
  nlohmann::json tensors = nlohmann::json::array();
  for (auto* p : net.params())
    tensors.push_back({{"name", p->name}, {"shape", p->shape}});
  header["tensors"] = tensors;
  if (!extra.is_null() && !extra.empty()) header["extra"] = extra;

  const std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot write checkpoint " + path.string());
  f.write("BSCK", 4);
  auto put_u32 = [&f](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kCheckpointVersion);
  put_u32(uint32_t(hs.size()));
  f.write(hs.data(), std::streamsize(hs.size()));
  for (auto* p : net.params()) {
    std::vector<float> buf(p->size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(p->value[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
  }
  require(f.good(), ErrorKind::data, "short write to checkpoint " + path.string());
}

inline nlohmann::json read_checkpoint_header(std::ifstream& f,
                                             const std::string& path) {
  char magic[4];
  f.read(magic, 4);
  require(f.good() && std::memcmp(magic, "BSCK", 4) == 0, ErrorKind::data,
          "not a checkpoint file: " + path);
  uint32_t version = 0, hlen = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&hlen), 4);
  require(f.good() && version == kCheckpointVersion, ErrorKind::data,
          "unsupported checkpoint version in " + path);
  std::string hs(hlen, '\0');
  f.read(hs.data(), hlen);
  require(f.good(), ErrorKind::data, "truncated checkpoint header in " + path);
  return nlohmann::json::parse(hs);
}

inline UNetConfig checkpoint_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open checkpoint " + path.string());
  const nlohmann::json header = read_checkpoint_header(f, path.string());
  UNetConfig cfg;
  cfg.H = header.at("config").at("H").get<int>();
  cfg.grid = header.at("config").at("grid").get<int>();
  cfg.base_channels = header.at("config").at("base_channels").get<int>();
  cfg.leaky_slope = header.at("config").at("leaky_slope").get<double>();
  return cfg;
}

// Loads parameters into a net already built with the checkpoint's config;
// validates every tensor name and shape.
template <typename T>
inline nlohmann::json load_checkpoint(const std::filesystem::path& path,
                                      UNet<T>& net) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::data, "cannot open checkpoint " + path.string());
  const nlohmann::json header = read_checkpoint_header(f, path.string());

  auto params = net.params();
  const auto& tensors = header.at("tensors");
  require(tensors.size() == params.size(), ErrorKind::data,
          "checkpoint tensor count mismatch in " + path.string());
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string name = tensors[i].at("name").get<std::string>();
    const std::vector<int> shape = tensors[i].at("shape").get<std::vector<int>>();
    require(name == params[i]->name && shape == params[i]->shape, ErrorKind::data,
            "checkpoint tensor mismatch at '" + name + "' (expected '" +
                params[i]->name + "') in " + path.string());
    std::vector<float> buf(params[i]->size());
    f.read(reinterpret_cast<char*>(buf.data()),
           std::streamsize(buf.size() * sizeof(float)));
    require(f.good(), ErrorKind::data,
            "truncated tensor data for '" + name + "' in " + path.string());
    for (size_t j = 0; j < buf.size(); ++j) {
      require(std::isfinite(buf[j]), ErrorKind::data,
              "non-finite value in checkpoint tensor '" + name + "'");
      params[i]->value[j] = T(buf[j]);
    }
  }
  return header.value("extra", nlohmann::json::object());
}

}  // namespace beadsight
