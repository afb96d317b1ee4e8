#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "beadsight/core.hpp"
#include "beadsight/rng.hpp"

namespace beadsight {

// Dense CHW feature map.
template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, T(0)) {}

  size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  T& at(int ch, int r, int col) { return v[(size_t(ch) * h + r) * w + col]; }
  T at(int ch, int r, int col) const { return v[(size_t(ch) * h + r) * w + col]; }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }
};

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

// Unfold output rows [r0, r1) of a (C,H,W) conv input into a
// (C*k*k, (r1-r0)*Wo) patch matrix. Chunking over output rows keeps the
// patch matrix small regardless of resolution.
template <typename T>
void im2col_rows(const Tensor<T>& x, int k, int stride, int pad,
                 std::vector<T>& cols, int wo, int r0, int r1) {
  const size_t plane = size_t(r1 - r0) * wo;
  cols.assign(size_t(x.c) * k * k * plane, T(0));
  for (int c = 0; c < x.c; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        T* dst = cols.data() + ((size_t(c) * k + kr) * k + kc) * plane;
        for (int r = r0; r < r1; ++r) {
          const int sr = r * stride + kr - pad;
          if (sr < 0 || sr >= x.h) continue;
          const T* src_row = x.data() + (size_t(c) * x.h + sr) * x.w;
          T* dst_row = dst + size_t(r - r0) * wo;
          for (int col = 0; col < wo; ++col) {
            const int sc = col * stride + kc - pad;
            if (sc >= 0 && sc < x.w) dst_row[col] = src_row[sc];
          }
        }
      }
    }
  }
}

// Fold a patch-matrix gradient for output rows [r0, r1) back onto the input
// (accumulating overlaps).
template <typename T>
void col2im_rows(const std::vector<T>& cols, int k, int stride, int pad,
                 Tensor<T>& dx, int wo, int r0, int r1) {
  const size_t plane = size_t(r1 - r0) * wo;
  for (int c = 0; c < dx.c; ++c) {
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const T* src = cols.data() + ((size_t(c) * k + kr) * k + kc) * plane;
        for (int r = r0; r < r1; ++r) {
          const int dr = r * stride + kr - pad;
          if (dr < 0 || dr >= dx.h) continue;
          T* dst_row = dx.data() + (size_t(c) * dx.h + dr) * dx.w;
          const T* src_row = src + size_t(r - r0) * wo;
          for (int col = 0; col < wo; ++col) {
            const int dc = col * stride + kc - pad;
            if (dc >= 0 && dc < dx.w) dst_row[dc] += src_row[col];
          }
        }
      }
    }
  }
}

// Named parameter tensor with its gradient buffer.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  size_t size() const { return value.size(); }
  void init(std::string n, std::vector<int> s, T fill_value = T(0)) {
    name = std::move(n);
    shape = std::move(s);
    size_t total = 1;
    for (int d : shape) total *= size_t(d);
    value.assign(total, fill_value);
    grad.assign(total, T(0));
  }
};

template <typename T>
struct ParamRef {
  Param<T>* p;
};

}  // namespace beadsight
