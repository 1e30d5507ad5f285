// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_TENSOR_HPP
#define SEQMOS_TENSOR_HPP

#include <Eigen/Core>
#include <string>

#include "seqmos/error.hpp"

namespace seqmos {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Spatial extent (H: radius, W: azimuth, L: height).
struct Dims3 {
  int h = 1;
  int w = 1;
  int l = 1;

  int volume() const noexcept { return h * w * l; }
  friend bool operator==(const Dims3&, const Dims3&) = default;

  std::string str() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(l);
  }
};

/**
 * @brief Dense (C, H, W, L) tensor.
 *
 * Stored as a row-major C x V matrix with V = H*W*L and the voxel index
 * v = (h*W + w)*L + l, so every channel is one contiguous row.
 */
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;

  Tensor4(int channels, Dims3 dims) : dims_(dims), data_(channels, dims.volume()) {
    if (channels <= 0 || dims.h <= 0 || dims.w <= 0 || dims.l <= 0)
      fail(ErrorKind::ShapeMismatch, "tensor dims must be positive");
    data_.setZero();
  }

  Tensor4(int channels, int h, int w, int l) : Tensor4(channels, Dims3{h, w, l}) {}

  int channels() const noexcept { return static_cast<int>(data_.rows()); }
  const Dims3& dims() const noexcept { return dims_; }
  int voxels() const noexcept { return static_cast<int>(data_.cols()); }

  int index(int h, int w, int l) const noexcept { return (h * dims_.w + w) * dims_.l + l; }

  T& at(int c, int h, int w, int l) { return data_(c, index(h, w, l)); }
  T at(int c, int h, int w, int l) const { return data_(c, index(h, w, l)); }

  RowMatrix<T>& mat() noexcept { return data_; }
  const RowMatrix<T>& mat() const noexcept { return data_; }

  bool sameShape(const Tensor4& o) const { return channels() == o.channels() && dims_ == o.dims_; }

  bool allFinite() const { return data_.allFinite(); }

  void setZero() { data_.setZero(); }

  std::string shapeStr() const { return std::to_string(channels()) + "x" + dims_.str(); }

 private:
  Dims3 dims_;
  RowMatrix<T> data_;
};

template <typename T>
inline void requireSameShape(const Tensor4<T>& a, const Tensor4<T>& b, const char* what) {
  if (!a.sameShape(b))
    fail(ErrorKind::ShapeMismatch,
         std::string(what) + ": " + a.shapeStr() + " vs " + b.shapeStr());
}

}  // namespace seqmos

#endif  // SEQMOS_TENSOR_HPP
