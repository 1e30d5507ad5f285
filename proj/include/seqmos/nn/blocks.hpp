// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_BLOCKS_HPP
#define SEQMOS_NN_BLOCKS_HPP

#include <array>
#include <string>

#include "seqmos/nn/layers.hpp"

namespace seqmos {
namespace nn {

/**
 * @brief Asymmetric residual block.
 *
 * Two parallel paths over (H, W, L), each conv -> affine -> leaky -> conv ->
 * affine: path A uses kernels (3,1,3) then (1,3,3), path B the reverse
 * order. Output = x + A(x) + B(x); shape is preserved.
 */
template <typename T>
class AsymBlock {
 public:
  static constexpr Dims3 kFirst{3, 1, 3};
  static constexpr Dims3 kSecond{1, 3, 3};

  AsymBlock() = default;
  AsymBlock(const std::string& name, int channels, T slope, Dims3 k1 = kFirst, Dims3 k2 = kSecond)
      : a1_(name + ".a1", channels, channels, k1, false), a1n_(name + ".a1n", channels),
        a2_(name + ".a2", channels, channels, k2, false), a2n_(name + ".a2n", channels),
        b1_(name + ".b1", channels, channels, k2, false), b1n_(name + ".b1n", channels),
        b2_(name + ".b2", channels, channels, k1, false), b2n_(name + ".b2n", channels),
        act_a_(slope), act_b_(slope) {}

  void init(Rng& rng) {
    a1_.init(rng);
    a2_.init(rng);
    b1_.init(rng);
    b2_.init(rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    Tensor4<T> a = a2n_.forward(a2_.forward(act_a_.forward(a1n_.forward(a1_.forward(x)))));
    Tensor4<T> b = b2n_.forward(b2_.forward(act_b_.forward(b1n_.forward(b1_.forward(x)))));
    Tensor4<T> y(x.channels(), x.dims());
    y.mat() = x.mat() + a.mat() + b.mat();
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> da = a1_.backward(a1n_.backward(act_a_.backward(a2_.backward(a2n_.backward(dy)))));
    Tensor4<T> db = b1_.backward(b1n_.backward(act_b_.backward(b2_.backward(b2n_.backward(dy)))));
    Tensor4<T> dx(dy.channels(), dy.dims());
    dx.mat() = dy.mat() + da.mat() + db.mat();
    return dx;
  }

  void collect(ParamList<T>& out) {
    a1_.collect(out);
    a1n_.collect(out);
    a2_.collect(out);
    a2n_.collect(out);
    b1_.collect(out);
    b1n_.collect(out);
    b2_.collect(out);
    b2n_.collect(out);
  }

  std::array<Conv3d<T>*, 4> convs() { return {&a1_, &a2_, &b1_, &b2_}; }

 private:
  Conv3d<T> a1_;
  ChannelAffine<T> a1n_;
  Conv3d<T> a2_;
  ChannelAffine<T> a2n_;
  Conv3d<T> b1_;
  ChannelAffine<T> b1n_;
  Conv3d<T> b2_;
  ChannelAffine<T> b2n_;
  TensorLeaky<T> act_a_;
  TensorLeaky<T> act_b_;
};

/// Asymmetric block, then a stride-2 convolution (affine + leaky) halving H, W, L.
/// The block output is kept as the skip connection for the decoder.
template <typename T>
class DownBlock {
 public:
  DownBlock() = default;
  DownBlock(const std::string& name, int in, int out, T slope)
      : asym_(name + ".asym", in, slope), conv_(name + ".down", in, out), norm_(name + ".norm", out),
        act_(slope) {}

  void init(Rng& rng) {
    asym_.init(rng);
    conv_.init(rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x, Tensor4<T>* skip = nullptr) {
    Tensor4<T> a = asym_.forward(x);
    Tensor4<T> y = act_.forward(norm_.forward(conv_.forward(a)));
    if (skip) *skip = std::move(a);
    return y;
  }

  /// dskip is the gradient arriving through the skip connection (may be null).
  Tensor4<T> backward(const Tensor4<T>& dy, const Tensor4<T>* dskip = nullptr) {
    Tensor4<T> da = conv_.backward(norm_.backward(act_.backward(dy)));
    if (dskip) da.mat() += dskip->mat();
    return asym_.backward(da);
  }

  void collect(ParamList<T>& out) {
    asym_.collect(out);
    conv_.collect(out);
    norm_.collect(out);
  }

  AsymBlock<T>& asym() { return asym_; }
  DownConv<T>& conv() { return conv_; }

 private:
  AsymBlock<T> asym_;
  DownConv<T> conv_;
  ChannelAffine<T> norm_;
  TensorLeaky<T> act_;
};

/// Nearest-neighbor repeat, convolution (affine + leaky), add the encoder skip,
/// then an asymmetric block.
template <typename T>
class UpBlock {
 public:
  UpBlock() = default;
  UpBlock(const std::string& name, int in, int out, Dims3 kernel, T slope)
      : conv_(name + ".up", in, out, kernel, true), norm_(name + ".norm", out), act_(slope),
        asym_(name + ".asym", out, slope) {}

  void init(Rng& rng) {
    conv_.init(rng);
    asym_.init(rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x, const Tensor4<T>& skip) {
    Tensor4<T> u = act_.forward(norm_.forward(conv_.forward(upsampleRepeat(x))));
    requireSameShape(u, skip, "upsample skip");
    u.mat() += skip.mat();
    return asym_.forward(u);
  }

  /// Returns the gradient w.r.t. x; the skip gradient is written to dskip.
  Tensor4<T> backward(const Tensor4<T>& dy, Tensor4<T>& dskip) {
    dskip = asym_.backward(dy);
    return upsampleRepeatBackward(conv_.backward(norm_.backward(act_.backward(dskip))));
  }

  void collect(ParamList<T>& out) {
    conv_.collect(out);
    norm_.collect(out);
    asym_.collect(out);
  }

  Conv3d<T>& conv() { return conv_; }
  AsymBlock<T>& asym() { return asym_; }

 private:
  Conv3d<T> conv_;
  ChannelAffine<T> norm_;
  TensorLeaky<T> act_;
  AsymBlock<T> asym_;
};

/**
 * @brief Dimension-decomposition context module.
 *
 * Three single-axis convolutions with extents (kH,1,1), (1,kW,1), (1,1,kL);
 * each branch output b is gated as sigmoid(b) * b, the gated branches are
 * summed and added to the input.
 */
template <typename T>
class Ddcm {
 public:
  Ddcm() = default;
  Ddcm(const std::string& name, int channels, Dims3 extents)
      : branches_{Conv3d<T>(name + ".h", channels, channels, {extents.h, 1, 1}, true),
                  Conv3d<T>(name + ".w", channels, channels, {1, extents.w, 1}, true),
                  Conv3d<T>(name + ".l", channels, channels, {1, 1, extents.l}, true)} {}

  void init(Rng& rng) {
    for (auto& b : branches_) b.init(rng);
  }

  Tensor4<T> forward(const Tensor4<T>& x) {
    Tensor4<T> y = x;
    for (std::size_t i = 0; i < 3; ++i) {
      pre_[i] = branches_[i].forward(x).mat();
      y.mat() += pre_[i].unaryExpr([](T b) { return sigmoid(b) * b; });
    }
    return y;
  }

  Tensor4<T> backward(const Tensor4<T>& dy) {
    Tensor4<T> dx = dy;
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor4<T> db(dy.channels(), dy.dims());
      db.mat() = dy.mat().binaryExpr(pre_[i], [](T g, T b) {
        const T s = sigmoid(b);
        return g * (s + b * s * (T(1) - s));
      });
      dx.mat() += branches_[i].backward(db).mat();
    }
    return dx;
  }

  void collect(ParamList<T>& out) {
    for (auto& b : branches_) b.collect(out);
  }

  std::array<Conv3d<T>, 3>& branches() { return branches_; }

 private:
  std::array<Conv3d<T>, 3> branches_;
  std::array<RowMatrix<T>, 3> pre_;
};

/// Point-wise refinement head: [gathered voxel features | point features] -> MLP -> logits.
template <typename T>
class PointRefine {
 public:
  PointRefine() = default;
  PointRefine(const std::string& name, int voxel_dim, int point_dim, int hidden, int classes, T slope)
      : voxel_dim_(voxel_dim), point_dim_(point_dim),
        mlp_(name, {voxel_dim + point_dim, hidden, classes}, slope) {}

  void init(Rng& rng) { mlp_.init(rng); }

  RowMatrix<T> forward(const RowMatrix<T>& gathered, const RowMatrix<T>& point_features) {
    if (gathered.rows() != point_features.rows() || gathered.cols() != voxel_dim_ ||
        point_features.cols() != point_dim_)
      fail(ErrorKind::ShapeMismatch, "point refine inputs");
    RowMatrix<T> x(gathered.rows(), voxel_dim_ + point_dim_);
    x.leftCols(voxel_dim_) = gathered;
    x.rightCols(point_dim_) = point_features;
    return mlp_.forward(x);
  }

  /// Splits the input gradient into (gathered, point_features) parts.
  std::pair<RowMatrix<T>, RowMatrix<T>> backward(const RowMatrix<T>& dy) {
    RowMatrix<T> dx = mlp_.backward(dy);
    return {dx.leftCols(voxel_dim_), dx.rightCols(point_dim_)};
  }

  void collect(ParamList<T>& out) { mlp_.collect(out); }
  Mlp<T>& mlp() { return mlp_; }

 private:
  int voxel_dim_ = 0;
  int point_dim_ = 0;
  Mlp<T> mlp_;
};

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_BLOCKS_HPP
