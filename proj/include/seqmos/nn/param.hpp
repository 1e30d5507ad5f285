// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_PARAM_HPP
#define SEQMOS_NN_PARAM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "seqmos/tensor.hpp"

namespace seqmos {
namespace nn {

/// Named trainable tensor with a gradient buffer of identical shape.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;  // logical shape, recorded in checkpoints
  RowMatrix<T> value;
  RowMatrix<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), shape(std::move(s)), value(RowMatrix<T>::Zero(rows, cols)),
        grad(RowMatrix<T>::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zeroGrad() { grad.setZero(); }
};

template <typename T>
using ParamList = std::vector<Param<T>*>;

/// Seeded generator; uniform draws are built from raw bits so they do not
/// depend on the standard library's distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::uint64_t next() { return engine_(); }
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  double normal() {
    // Box-Muller
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

/// Uniform in +-sqrt(1/fan_in).
template <typename T>
void initUniform(Param<T>& p, int fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_PARAM_HPP
