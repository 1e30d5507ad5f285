// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_LAYERS_HPP
#define SEQMOS_NN_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/nn/param.hpp"
#include "seqmos/tensor.hpp"

namespace seqmos {
namespace nn {

// ---------------------------------------------------------------------------
// Activations

template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(T slope = T(0.01)) : slope_(slope) {}

  RowMatrix<T> forward(const RowMatrix<T>& x) {
    input_ = x;
    return x.unaryExpr([s = slope_](T v) { return v > T(0) ? v : s * v; });
  }

  RowMatrix<T> backward(const RowMatrix<T>& dy) const {
    return dy.binaryExpr(input_, [s = slope_](T g, T v) { return v > T(0) ? g : s * g; });
  }

 private:
  T slope_;
  RowMatrix<T> input_;
};

template <typename T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

// ---------------------------------------------------------------------------
// Fully connected

/// y = x W^T + b on N x in row matrices.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : weight_(name + ".weight", {out, in}, out, in), bias_(name + ".bias", {out}, 1, out) {}

  int inFeatures() const { return static_cast<int>(weight_.value.cols()); }
  int outFeatures() const { return static_cast<int>(weight_.value.rows()); }

  void init(Rng& rng) {
    initUniform(weight_, inFeatures(), rng);
    initUniform(bias_, inFeatures(), rng);
  }

  RowMatrix<T> forward(const RowMatrix<T>& x) {
    if (x.cols() != weight_.value.cols())
      fail(ErrorKind::ShapeMismatch, weight_.name + ": input width " + std::to_string(x.cols()) +
                                         " != " + std::to_string(weight_.value.cols()));
    input_ = x;
    RowMatrix<T> y(x.rows(), weight_.value.rows());
    y.noalias() = x * weight_.value.transpose();
    y.rowwise() += bias_.value.row(0);
    return y;
  }

  RowMatrix<T> backward(const RowMatrix<T>& dy) {
    weight_.grad.noalias() += dy.transpose() * input_;
    bias_.grad.row(0) += dy.colwise().sum();
    RowMatrix<T> dx(dy.rows(), weight_.value.cols());
    dx.noalias() = dy * weight_.value;
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  Param<T> weight_;
  Param<T> bias_;
  RowMatrix<T> input_;
};

/// Linear layers with leaky activations between them (none after the last).
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const std::vector<int>& sizes, T slope) {
    if (sizes.size() < 2) fail(ErrorKind::InvalidArgument, name + ": MLP needs >= 2 sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      layers_.emplace_back(name + "." + std::to_string(i), sizes[i], sizes[i + 1]);
      if (i + 2 < sizes.size()) acts_.emplace_back(slope);
    }
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  RowMatrix<T> forward(const RowMatrix<T>& x) {
    RowMatrix<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i < acts_.size()) h = acts_[i].forward(h);
    }
    return h;
  }

  RowMatrix<T> backward(const RowMatrix<T>& dy) {
    RowMatrix<T> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i < acts_.size()) g = acts_[i].backward(g);
      g = layers_[i].backward(g);
    }
    return g;
  }

  void collect(ParamList<T>& out) {
    for (auto& l : layers_) l.collect(out);
  }

  std::vector<Linear<T>>& layers() { return layers_; }
  int outFeatures() const { return layers_.back().outFeatures(); }

 private:
  std::vector<Linear<T>> layers_;
  std::vector<LeakyRelu<T>> acts_;
};

// ---------------------------------------------------------------------------
// Spatial shift used by the convolutions

namespace detail {

/**
 * dst(:, h, w, l) = src(:, h+dh, (w+dw) mod W, l+dl), zero outside the h and l
 * ranges (zero padding) and circular along w. With accumulate, adds instead
 * of assigning and leaves out-of-range cells untouched.
 */
template <typename T>
void shiftVoxels(const T* src, T* dst, int channels, Dims3 d, int dh, int dw, int dl,
                 bool accumulate) {
  const int v = d.volume();
  const int l0 = std::max(0, -dl);
  const int l1 = std::min(d.l, d.l - dl);
  for (int c = 0; c < channels; ++c) {
    const T* s = src + static_cast<std::ptrdiff_t>(c) * v;
    T* o = dst + static_cast<std::ptrdiff_t>(c) * v;
    for (int h = 0; h < d.h; ++h) {
      const int hs = h + dh;
      const bool h_ok = hs >= 0 && hs < d.h;
      for (int w = 0; w < d.w; ++w) {
        T* orow = o + (h * d.w + w) * d.l;
        if (!h_ok || l0 >= l1) {
          if (!accumulate) std::fill(orow, orow + d.l, T(0));
          continue;
        }
        const int ws = ((w + dw) % d.w + d.w) % d.w;
        const T* srow = s + (hs * d.w + ws) * d.l + dl;
        if (accumulate) {
          for (int l = l0; l < l1; ++l) orow[l] += srow[l];
        } else {
          std::fill(orow, orow + l0, T(0));
          for (int l = l0; l < l1; ++l) orow[l] = srow[l];
          std::fill(orow + l1, orow + d.l, T(0));
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolutions

/**
 * @brief Stride-1 3D convolution with odd kernel extents over (H, W, L).
 *
 * Zero padding on H and L and circular padding on the azimuth axis W keep the
 * spatial dims. Weight layout: Cout x (taps * Cin), tap = (a*kw + b)*kl + c.
 */
template <typename T>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(const std::string& name, int in, int out, Dims3 kernel, bool bias)
      : in_(in), out_(out), kernel_(kernel), has_bias_(bias),
        weight_(name + ".weight", {out, kernel.h, kernel.w, kernel.l, in}, out,
                static_cast<Eigen::Index>(kernel.volume()) * in) {
    if (kernel.h % 2 == 0 || kernel.w % 2 == 0 || kernel.l % 2 == 0)
      fail(ErrorKind::InvalidArgument, name + ": kernel extents must be odd");
    if (bias) bias_ = Param<T>(name + ".bias", {out}, out, 1);
  }

  void init(Rng& rng) {
    const int fan_in = in_ * kernel_.volume();
    initUniform(weight_, fan_in, rng);
    if (has_bias_) initUniform(bias_, fan_in, rng);
  }

  /// Sets the center tap to identity (in == out) and every other tap to zero.
  void setIdentity() {
    weight_.value.setZero();
    const int center = tapIndex(kernel_.h / 2, kernel_.w / 2, kernel_.l / 2);
    for (int c = 0; c < std::min(in_, out_); ++c) weight_.value(c, center * in_ + c) = T(1);
    if (has_bias_) bias_.value.setZero();
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.channels() != in_)
      fail(ErrorKind::ShapeMismatch, weight_.name + ": expected " + std::to_string(in_) +
                                         " channels, got " + std::to_string(x.channels()));
    dims_ = x.dims();
    Tensor4<T> y(out_, dims_);
    if (isPointwise()) {
      input_ = x.mat();
      y.mat().noalias() = weight_.value * x.mat();
    } else {
      im2col(x.mat(), cols_);
      y.mat().noalias() = weight_.value * cols_;
    }
    if (has_bias_) y.mat().colwise() += bias_.value.col(0);
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    if (dy.channels() != out_ || dy.dims() != dims_)
      fail(ErrorKind::ShapeMismatch, weight_.name + ": gradient shape");
    Tensor4<T> dx(in_, dims_);
    if (has_bias_) bias_.grad.col(0) += dy.mat().rowwise().sum();
    if (isPointwise()) {
      weight_.grad.noalias() += dy.mat() * input_.transpose();
      dx.mat().noalias() = weight_.value.transpose() * dy.mat();
      return dx;
    }
    weight_.grad.noalias() += dy.mat() * cols_.transpose();
    RowMatrix<T> dcols(cols_.rows(), cols_.cols());
    dcols.noalias() = weight_.value.transpose() * dy.mat();
    for (int a = 0; a < kernel_.h; ++a)
      for (int b = 0; b < kernel_.w; ++b)
        for (int c = 0; c < kernel_.l; ++c) {
          const int t = tapIndex(a, b, c);
          detail::shiftVoxels(dcols.data() + static_cast<std::ptrdiff_t>(t) * in_ * dims_.volume(),
                              dx.mat().data(), in_, dims_, -(a - kernel_.h / 2),
                              -(b - kernel_.w / 2), -(c - kernel_.l / 2), true);
        }
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  const Dims3& kernel() const { return kernel_; }
  int tapIndex(int a, int b, int c) const { return (a * kernel_.w + b) * kernel_.l + c; }

 private:
  bool isPointwise() const { return kernel_.volume() == 1; }

  void im2col(const RowMatrix<T>& x, RowMatrix<T>& cols) const {
    cols.resize(static_cast<Eigen::Index>(kernel_.volume()) * in_, dims_.volume());
    for (int a = 0; a < kernel_.h; ++a)
      for (int b = 0; b < kernel_.w; ++b)
        for (int c = 0; c < kernel_.l; ++c) {
          const int t = tapIndex(a, b, c);
          detail::shiftVoxels(x.data(), cols.data() + static_cast<std::ptrdiff_t>(t) * in_ * dims_.volume(),
                              in_, dims_, a - kernel_.h / 2, b - kernel_.w / 2, c - kernel_.l / 2,
                              false);
        }
  }

  int in_ = 0;
  int out_ = 0;
  Dims3 kernel_;
  bool has_bias_ = false;
  Param<T> weight_;
  Param<T> bias_;
  Dims3 dims_;
  RowMatrix<T> input_;
  RowMatrix<T> cols_;
};

/**
 * @brief 2x2x2 convolution with stride 2: halves every spatial dim.
 *
 * Weight layout: Cout x (8 * Cin), tap = (a*2 + b)*2 + c.
 */
template <typename T>
class DownConv {
 public:
  DownConv() = default;
  DownConv(const std::string& name, int in, int out)
      : in_(in), out_(out), weight_(name + ".weight", {out, 2, 2, 2, in}, out, 8 * in),
        bias_(name + ".bias", {out}, out, 1) {}

  void init(Rng& rng) {
    initUniform(weight_, 8 * in_, rng);
    initUniform(bias_, 8 * in_, rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.channels() != in_) fail(ErrorKind::ShapeMismatch, weight_.name + ": channels");
    const Dims3 d = x.dims();
    if (d.h % 2 || d.w % 2 || d.l % 2)
      fail(ErrorKind::OddDimension, weight_.name + ": cannot halve " + d.str());
    in_dims_ = d;
    const Dims3 od{d.h / 2, d.w / 2, d.l / 2};
    cols_.resize(8 * in_, od.volume());
    for (int t = 0; t < 8; ++t) {
      const int a = t >> 2, b = (t >> 1) & 1, c = t & 1;
      for (int ci = 0; ci < in_; ++ci) {
        const T* src = x.mat().data() + static_cast<std::ptrdiff_t>(ci) * d.volume();
        T* dst = cols_.data() + (static_cast<std::ptrdiff_t>(t) * in_ + ci) * od.volume();
        for (int h = 0; h < od.h; ++h)
          for (int w = 0; w < od.w; ++w)
            for (int l = 0; l < od.l; ++l)
              dst[(h * od.w + w) * od.l + l] = src[((2 * h + a) * d.w + 2 * w + b) * d.l + 2 * l + c];
      }
    }
    Tensor4<T> y(out_, od);
    y.mat().noalias() = weight_.value * cols_;
    y.mat().colwise() += bias_.value.col(0);
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    const Dims3 d = in_dims_;
    const Dims3 od{d.h / 2, d.w / 2, d.l / 2};
    weight_.grad.noalias() += dy.mat() * cols_.transpose();
    bias_.grad.col(0) += dy.mat().rowwise().sum();
    RowMatrix<T> dcols(cols_.rows(), cols_.cols());
    dcols.noalias() = weight_.value.transpose() * dy.mat();
    Tensor4<T> dx(in_, d);
    for (int t = 0; t < 8; ++t) {
      const int a = t >> 2, b = (t >> 1) & 1, c = t & 1;
      for (int ci = 0; ci < in_; ++ci) {
        T* dst = dx.mat().data() + static_cast<std::ptrdiff_t>(ci) * d.volume();
        const T* src = dcols.data() + (static_cast<std::ptrdiff_t>(t) * in_ + ci) * od.volume();
        for (int h = 0; h < od.h; ++h)
          for (int w = 0; w < od.w; ++w)
            for (int l = 0; l < od.l; ++l)
              dst[((2 * h + a) * d.w + 2 * w + b) * d.l + 2 * l + c] += src[(h * od.w + w) * od.l + l];
      }
    }
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param<T> weight_;
  Param<T> bias_;
  Dims3 in_dims_;
  RowMatrix<T> cols_;
};

/// Nearest-neighbor repeat doubling every spatial dim.
template <typename T>
Tensor4<T> upsampleRepeat(const Tensor4<T>& x) {
  const Dims3 d = x.dims();
  const Dims3 od{2 * d.h, 2 * d.w, 2 * d.l};
  Tensor4<T> y(x.channels(), od);
  for (int c = 0; c < x.channels(); ++c)
    for (int h = 0; h < od.h; ++h)
      for (int w = 0; w < od.w; ++w)
        for (int l = 0; l < od.l; ++l) y.at(c, h, w, l) = x.at(c, h / 2, w / 2, l / 2);
  return y;
}

template <typename T>
Tensor4<T> upsampleRepeatBackward(const Tensor4<T>& dy) {
  const Dims3 od = dy.dims();
  Tensor4<T> dx(dy.channels(), Dims3{od.h / 2, od.w / 2, od.l / 2});
  for (int c = 0; c < dy.channels(); ++c)
    for (int h = 0; h < od.h; ++h)
      for (int w = 0; w < od.w; ++w)
        for (int l = 0; l < od.l; ++l) dx.at(c, h / 2, w / 2, l / 2) += dy.at(c, h, w, l);
  return dx;
}

/// Per-channel affine normalization y = gamma * x + beta; starts as identity.
template <typename T>
class ChannelAffine {
 public:
  ChannelAffine() = default;
  ChannelAffine(const std::string& name, int channels)
      : gamma_(name + ".gamma", {channels}, channels, 1), beta_(name + ".beta", {channels}, channels, 1) {
    gamma_.value.setOnes();
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    if (x.channels() != gamma_.value.rows()) fail(ErrorKind::ShapeMismatch, gamma_.name);
    input_ = x.mat();
    Tensor4<T> y(x.channels(), x.dims());
    y.mat() = gamma_.value.col(0).asDiagonal() * x.mat();
    y.mat().colwise() += beta_.value.col(0);
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    gamma_.grad.col(0) += dy.mat().cwiseProduct(input_).rowwise().sum();
    beta_.grad.col(0) += dy.mat().rowwise().sum();
    Tensor4<T> dx(dy.channels(), dy.dims());
    dx.mat() = gamma_.value.col(0).asDiagonal() * dy.mat();
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }

 private:
  Param<T> gamma_;
  Param<T> beta_;
  RowMatrix<T> input_;
};

/// LeakyRelu on tensors.
template <typename T>
class TensorLeaky {
 public:
  explicit TensorLeaky(T slope = T(0.01)) : act_(slope) {}

  Tensor4<T> forward(const Tensor4<T>& x) {
    Tensor4<T> y(x.channels(), x.dims());
    y.mat() = act_.forward(x.mat());
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx(dy.channels(), dy.dims());
    dx.mat() = act_.backward(dy.mat());
    return dx;
  }

 private:
  LeakyRelu<T> act_;
};

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_LAYERS_HPP
