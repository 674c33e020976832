#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "wisva/nn/tensor.hpp"
#include "wisva/rng.hpp"

namespace wisva::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

inline constexpr double kLeakySlope = 0.2;

struct ConvGeom {
  int channels = 1;  ///< image channels
  int h = 0, w = 0;  ///< image size
  int k = 3, stride = 1, pad = 0;
  int oh = 0, ow = 0;  ///< output (column) grid
};

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }
inline int conv_transpose_out(int in, int k, int stride, int pad) { return (in - 1) * stride - 2 * pad + k; }

/// cols[(c,ki,kj), (oi,oj)] = img[c, oi*s - p + ki, oj*s - p + kj] (zero outside).
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* cols) {
  const int ncol = g.oh * g.ow;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* row = cols + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ncol;
        for (int oi = 0; oi < g.oh; ++oi) {
          const int y = oi * g.stride - g.pad + ki;
          T* out = row + static_cast<std::size_t>(oi) * g.ow;
          if (y < 0 || y >= g.h) {
            for (int oj = 0; oj < g.ow; ++oj) out[oj] = T{};
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * g.h + y) * g.w;
          for (int oj = 0; oj < g.ow; ++oj) {
            const int x = oj * g.stride - g.pad + kj;
            out[oj] = (x >= 0 && x < g.w) ? src[x] : T{};
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-adds columns back into img.
template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* img) {
  const int ncol = g.oh * g.ow;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* row = cols + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ncol;
        for (int oi = 0; oi < g.oh; ++oi) {
          const int y = oi * g.stride - g.pad + ki;
          if (y < 0 || y >= g.h) continue;
          T* dst = img + (static_cast<std::size_t>(c) * g.h + y) * g.w;
          const T* in = row + static_cast<std::size_t>(oi) * g.ow;
          for (int oj = 0; oj < g.ow; ++oj) {
            const int x = oj * g.stride - g.pad + kj;
            if (x >= 0 && x < g.w) dst[x] += in[oj];
          }
        }
      }
    }
  }
}

/// Kaiming-uniform for LeakyReLU(0.2): U(-b, b), b = gain * sqrt(3 / fan_in).
template <typename T>
void kaiming_uniform(T* w, std::size_t n, double fan_in, Rng& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  const double bound = gain * std::sqrt(3.0 / fan_in);
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

/// Cross-correlation, weights (Cout, Cin, K, K), bias (Cout).
struct Conv2d {
  int cin = 1, cout = 1, k = 3, stride = 1, pad = 0;
  std::size_t w_off = 0, b_off = 0;

  template <typename T>
  void declare(ParamStore<T>& ps, const std::string& name) {
    w_off = ps.add(name + ".w", {cout, cin, k, k});
    b_off = ps.add(name + ".b", {cout});
  }

  template <typename T>
  void init(T* params, Rng& rng) const {
    kaiming_uniform(params + w_off, static_cast<std::size_t>(cout) * cin * k * k, double(cin) * k * k, rng);
    for (int c = 0; c < cout; ++c) params[b_off + c] = T{};
  }

  ConvGeom geom(int h, int w) const {
    return ConvGeom{cin, h, w, k, stride, pad, conv_out(h, k, stride, pad), conv_out(w, k, stride, pad)};
  }

  std::size_t scratch_size(int h, int w) const {
    const auto g = geom(h, w);
    return static_cast<std::size_t>(cin) * k * k * g.oh * g.ow;
  }

  template <typename T>
  void forward(const T* params, const T* x, int h, int w, T* y, std::vector<T>& scratch) const {
    const auto g = geom(h, w);
    const int n = g.oh * g.ow;
    scratch.resize(scratch_size(h, w));
    im2col(x, g, scratch.data());
    ConstMatMap<T> W(params + w_off, cout, cin * k * k);
    ConstMatMap<T> C(scratch.data(), cin * k * k, n);
    MatMap<T> Y(y, cout, n);
    Y.noalias() = W * C;
    ConstVecMap<T> b(params + b_off, cout);
    Y.colwise() += b;
  }

  /// Accumulates weight/bias grads into `grads`; writes dx when non-null.
  template <typename T>
  void backward(const T* params, const T* x, int h, int w, const T* dy, T* dx, T* grads,
                std::vector<T>& scratch) const {
    const auto g = geom(h, w);
    const int n = g.oh * g.ow;
    scratch.resize(scratch_size(h, w));
    im2col(x, g, scratch.data());
    ConstMatMap<T> C(scratch.data(), cin * k * k, n);
    ConstMatMap<T> dY(dy, cout, n);
    MatMap<T> dW(grads + w_off, cout, cin * k * k);
    dW.noalias() += dY * C.transpose();
    VecMap<T> db(grads + b_off, cout);
    db += dY.rowwise().sum();
    if (dx != nullptr) {
      ConstMatMap<T> W(params + w_off, cout, cin * k * k);
      MatMap<T> dC(scratch.data(), cin * k * k, n);
      dC.noalias() = W.transpose() * dY;
      std::fill(dx, dx + static_cast<std::size_t>(cin) * h * w, T{});
      col2im(scratch.data(), g, dx);
    }
  }
};

/// Transposed convolution, weights (Cin, Cout, K, K), bias (Cout). With no bias
/// it is the adjoint of Conv2d using the same weight memory.
struct ConvTranspose2d {
  int cin = 1, cout = 1, k = 4, stride = 2, pad = 1;
  std::size_t w_off = 0, b_off = 0;

  template <typename T>
  void declare(ParamStore<T>& ps, const std::string& name) {
    w_off = ps.add(name + ".w", {cin, cout, k, k});
    b_off = ps.add(name + ".b", {cout});
  }

  template <typename T>
  void init(T* params, Rng& rng) const {
    const double fan_in = double(cin) * (double(k) / stride) * (double(k) / stride);
    kaiming_uniform(params + w_off, static_cast<std::size_t>(cin) * cout * k * k, fan_in, rng);
    for (int c = 0; c < cout; ++c) params[b_off + c] = T{};
  }

  int out_h(int h) const { return conv_transpose_out(h, k, stride, pad); }

  /// Geometry of the equivalent forward conv mapping the output image back to the input grid.
  ConvGeom geom(int h, int w) const {
    return ConvGeom{cout, out_h(h), conv_transpose_out(w, k, stride, pad), k, stride, pad, h, w};
  }

  template <typename T>
  void forward(const T* params, const T* x, int h, int w, T* y, std::vector<T>& scratch) const {
    const auto g = geom(h, w);
    const int n = h * w;
    scratch.resize(static_cast<std::size_t>(cout) * k * k * n);
    ConstMatMap<T> W(params + w_off, cin, cout * k * k);
    ConstMatMap<T> X(x, cin, n);
    MatMap<T> C(scratch.data(), cout * k * k, n);
    C.noalias() = W.transpose() * X;
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    std::fill(y, y + cout * plane, T{});
    col2im(scratch.data(), g, y);
    for (int c = 0; c < cout; ++c) {
      const T b = params[b_off + c];
      T* yc = y + c * plane;
      for (std::size_t q = 0; q < plane; ++q) yc[q] += b;
    }
  }

  template <typename T>
  void backward(const T* params, const T* x, int h, int w, const T* dy, T* dx, T* grads,
                std::vector<T>& scratch) const {
    const auto g = geom(h, w);
    const int n = h * w;
    scratch.resize(static_cast<std::size_t>(cout) * k * k * n);
    im2col(dy, g, scratch.data());
    ConstMatMap<T> dC(scratch.data(), cout * k * k, n);
    ConstMatMap<T> X(x, cin, n);
    MatMap<T> dW(grads + w_off, cin, cout * k * k);
    dW.noalias() += X * dC.transpose();
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    for (int c = 0; c < cout; ++c) {
      T s{};
      const T* d = dy + c * plane;
      for (std::size_t q = 0; q < plane; ++q) s += d[q];
      grads[b_off + c] += s;
    }
    if (dx != nullptr) {
      ConstMatMap<T> W(params + w_off, cin, cout * k * k);
      MatMap<T> dX(dx, cin, n);
      dX.noalias() = W * dC;
    }
  }
};

/// y = x W + b with W stored (in, out).
struct Dense {
  int in = 1, out = 1;
  std::size_t w_off = 0, b_off = 0;

  template <typename T>
  void declare(ParamStore<T>& ps, const std::string& name) {
    w_off = ps.add(name + ".w", {in, out});
    b_off = ps.add(name + ".b", {out});
  }

  template <typename T>
  void init(T* params, Rng& rng) const {
    kaiming_uniform(params + w_off, static_cast<std::size_t>(in) * out, double(in), rng);
    for (int c = 0; c < out; ++c) params[b_off + c] = T{};
  }

  template <typename T>
  void forward(const T* params, const T* x, T* y) const {
    ConstMatMap<T> W(params + w_off, in, out);
    ConstVecMap<T> X(x, in);
    VecMap<T> Y(y, out);
    Y.noalias() = W.transpose() * X;
    Y += ConstVecMap<T>(params + b_off, out);
  }

  template <typename T>
  void backward(const T* params, const T* x, const T* dy, T* dx, T* grads) const {
    ConstVecMap<T> X(x, in);
    ConstVecMap<T> dY(dy, out);
    MatMap<T> dW(grads + w_off, in, out);
    dW.noalias() += X * dY.transpose();
    VecMap<T>(grads + b_off, out) += dY;
    if (dx != nullptr) {
      ConstMatMap<T> W(params + w_off, in, out);
      VecMap<T>(dx, in).noalias() = W * dY;
    }
  }
};

// Activations. LeakyReLU backward reads the activation output: the slope is
// positive, so sign(output) == sign(input).

template <typename T>
void leaky_relu(T* v, std::size_t n) {
  const T a = static_cast<T>(kLeakySlope);
  for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > T{} ? v[i] : a * v[i];
}

template <typename T>
void leaky_relu_backward(const T* y, T* d, std::size_t n) {
  const T a = static_cast<T>(kLeakySlope);
  for (std::size_t i = 0; i < n; ++i)
    if (!(y[i] > T{})) d[i] *= a;
}

template <typename T>
void sigmoid(T* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) v[i] = T{1} / (T{1} + std::exp(-v[i]));
}

template <typename T>
void sigmoid_backward(const T* y, T* d, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) d[i] *= y[i] * (T{1} - y[i]);
}

// --- batched functional API over TensorBuffer ---------------------------------

/// Gradients of a batched op.
template <typename T>
struct LayerGrads {
  TensorBuffer<T> dx;
  TensorBuffer<T> dw;
  TensorBuffer<T> db;
};

namespace detail {

template <typename T>
std::vector<T> pack(const TensorBuffer<T>& w, const TensorBuffer<T>& b) {
  std::vector<T> p(w.data);
  p.insert(p.end(), b.data.begin(), b.data.end());
  return p;
}

}  // namespace detail

/// x (N, Cin, H, W), w (Cout, Cin, K, K), b (Cout).
template <typename T>
TensorBuffer<T> conv2d(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b, int stride,
                       int pad) {
  check(x.dims.size() == 4 && w.dims.size() == 4, "conv2d expects 4-d input and weights");
  check(x.dim(1) == w.dim(1), "conv2d channel mismatch");
  check(w.dim(2) == w.dim(3), "conv2d expects square kernels");
  check(b.size() == static_cast<std::size_t>(w.dim(0)), "conv2d bias size");
  check(stride >= 1, "conv2d stride < 1");
  Conv2d layer{w.dim(1), w.dim(0), w.dim(2), stride, pad, 0, w.size()};
  const int oh = conv_out(x.dim(2), layer.k, stride, pad);
  const int ow = conv_out(x.dim(3), layer.k, stride, pad);
  check(oh >= 1 && ow >= 1, "conv2d output would be empty");
  const auto params = detail::pack(w, b);
  TensorBuffer<T> y({x.dim(0), layer.cout, oh, ow});
  std::vector<T> scratch;
  const std::size_t in_plane = static_cast<std::size_t>(layer.cin) * x.dim(2) * x.dim(3);
  const std::size_t out_plane = static_cast<std::size_t>(layer.cout) * oh * ow;
  for (int n = 0; n < x.dim(0); ++n)
    layer.forward(params.data(), x.ptr() + n * in_plane, x.dim(2), x.dim(3), y.ptr() + n * out_plane, scratch);
  return y;
}

template <typename T>
LayerGrads<T> conv2d_backward(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b,
                              int stride, int pad, const TensorBuffer<T>& dy) {
  Conv2d layer{w.dim(1), w.dim(0), w.dim(2), stride, pad, 0, w.size()};
  const int oh = conv_out(x.dim(2), layer.k, stride, pad);
  const int ow = conv_out(x.dim(3), layer.k, stride, pad);
  check(dy.dims == std::vector<int>({x.dim(0), layer.cout, oh, ow}), "conv2d_backward dy shape");
  const auto params = detail::pack(w, b);
  std::vector<T> grads(params.size(), T{});
  LayerGrads<T> g{TensorBuffer<T>(x.dims), TensorBuffer<T>(w.dims), TensorBuffer<T>(b.dims)};
  std::vector<T> scratch;
  const std::size_t in_plane = static_cast<std::size_t>(layer.cin) * x.dim(2) * x.dim(3);
  const std::size_t out_plane = static_cast<std::size_t>(layer.cout) * oh * ow;
  for (int n = 0; n < x.dim(0); ++n)
    layer.backward(params.data(), x.ptr() + n * in_plane, x.dim(2), x.dim(3), dy.ptr() + n * out_plane,
                   g.dx.ptr() + n * in_plane, grads.data(), scratch);
  std::copy(grads.begin(), grads.begin() + w.size(), g.dw.data.begin());
  std::copy(grads.begin() + w.size(), grads.end(), g.db.data.begin());
  return g;
}

/// x (N, Cin, H, W), w (Cin, Cout, K, K), b (Cout).
template <typename T>
TensorBuffer<T> conv2d_transpose(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b,
                                 int stride, int pad) {
  check(x.dims.size() == 4 && w.dims.size() == 4, "conv2d_transpose expects 4-d input and weights");
  check(x.dim(1) == w.dim(0), "conv2d_transpose channel mismatch");
  check(w.dim(2) == w.dim(3), "conv2d_transpose expects square kernels");
  check(b.size() == static_cast<std::size_t>(w.dim(1)), "conv2d_transpose bias size");
  check(stride >= 1, "conv2d_transpose stride < 1");
  ConvTranspose2d layer{w.dim(0), w.dim(1), w.dim(2), stride, pad, 0, w.size()};
  const int oh = conv_transpose_out(x.dim(2), layer.k, stride, pad);
  const int ow = conv_transpose_out(x.dim(3), layer.k, stride, pad);
  check(oh >= 1 && ow >= 1, "conv2d_transpose output would be empty");
  const auto params = detail::pack(w, b);
  TensorBuffer<T> y({x.dim(0), layer.cout, oh, ow});
  std::vector<T> scratch;
  const std::size_t in_plane = static_cast<std::size_t>(layer.cin) * x.dim(2) * x.dim(3);
  const std::size_t out_plane = static_cast<std::size_t>(layer.cout) * oh * ow;
  for (int n = 0; n < x.dim(0); ++n)
    layer.forward(params.data(), x.ptr() + n * in_plane, x.dim(2), x.dim(3), y.ptr() + n * out_plane, scratch);
  return y;
}

template <typename T>
LayerGrads<T> conv2d_transpose_backward(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b,
                                        int stride, int pad, const TensorBuffer<T>& dy) {
  ConvTranspose2d layer{w.dim(0), w.dim(1), w.dim(2), stride, pad, 0, w.size()};
  const int oh = conv_transpose_out(x.dim(2), layer.k, stride, pad);
  const int ow = conv_transpose_out(x.dim(3), layer.k, stride, pad);
  check(dy.dims == std::vector<int>({x.dim(0), layer.cout, oh, ow}), "conv2d_transpose_backward dy shape");
  const auto params = detail::pack(w, b);
  std::vector<T> grads(params.size(), T{});
  LayerGrads<T> g{TensorBuffer<T>(x.dims), TensorBuffer<T>(w.dims), TensorBuffer<T>(b.dims)};
  std::vector<T> scratch;
  const std::size_t in_plane = static_cast<std::size_t>(layer.cin) * x.dim(2) * x.dim(3);
  const std::size_t out_plane = static_cast<std::size_t>(layer.cout) * oh * ow;
  for (int n = 0; n < x.dim(0); ++n)
    layer.backward(params.data(), x.ptr() + n * in_plane, x.dim(2), x.dim(3), dy.ptr() + n * out_plane,
                   g.dx.ptr() + n * in_plane, grads.data(), scratch);
  std::copy(grads.begin(), grads.begin() + w.size(), g.dw.data.begin());
  std::copy(grads.begin() + w.size(), grads.end(), g.db.data.begin());
  return g;
}

/// x (N, F), w (F, G), b (G).
template <typename T>
TensorBuffer<T> dense(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b) {
  check(x.dims.size() == 2 && w.dims.size() == 2, "dense expects 2-d input and weights");
  check(x.dim(1) == w.dim(0), "dense feature mismatch");
  check(b.size() == static_cast<std::size_t>(w.dim(1)), "dense bias size");
  Dense layer{w.dim(0), w.dim(1), 0, w.size()};
  const auto params = detail::pack(w, b);
  TensorBuffer<T> y({x.dim(0), layer.out});
  for (int n = 0; n < x.dim(0); ++n)
    layer.forward(params.data(), x.ptr() + static_cast<std::size_t>(n) * layer.in,
                  y.ptr() + static_cast<std::size_t>(n) * layer.out);
  return y;
}

template <typename T>
LayerGrads<T> dense_backward(const TensorBuffer<T>& x, const TensorBuffer<T>& w, const TensorBuffer<T>& b,
                             const TensorBuffer<T>& dy) {
  Dense layer{w.dim(0), w.dim(1), 0, w.size()};
  check(dy.dims == std::vector<int>({x.dim(0), layer.out}), "dense_backward dy shape");
  const auto params = detail::pack(w, b);
  std::vector<T> grads(params.size(), T{});
  LayerGrads<T> g{TensorBuffer<T>(x.dims), TensorBuffer<T>(w.dims), TensorBuffer<T>(b.dims)};
  for (int n = 0; n < x.dim(0); ++n)
    layer.backward(params.data(), x.ptr() + static_cast<std::size_t>(n) * layer.in,
                   dy.ptr() + static_cast<std::size_t>(n) * layer.out,
                   g.dx.ptr() + static_cast<std::size_t>(n) * layer.in, grads.data());
  std::copy(grads.begin(), grads.begin() + w.size(), g.dw.data.begin());
  std::copy(grads.begin() + w.size(), grads.end(), g.db.data.begin());
  return g;
}

}  // namespace wisva::nn
