// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_OPTIM_HPP
#define SEQMOS_NN_OPTIM_HPP

#include <cmath>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/nn/param.hpp"

namespace seqmos {
namespace nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers follow the parameter list order.
template <typename T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (Param<T>* p : params_) {
      m_.push_back(RowMatrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(RowMatrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  /// Throws NonFiniteGradient before touching any parameter.
  void step() {
    for (Param<T>* p : params_)
      if (!p->grad.allFinite()) fail(ErrorKind::NonFiniteGradient, "gradient of " + p->name);
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      m_[i] = b1 * m_[i] + (T(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
      for (Eigen::Index j = 0; j < p.value.size(); ++j) {
        const double mh = static_cast<double>(m_[i].data()[j]) / bc1;
        const double vh = static_cast<double>(v_[i].data()[j]) / bc2;
        p.value.data()[j] -= static_cast<T>(cfg_.lr * mh / (std::sqrt(vh) + cfg_.epsilon));
      }
    }
  }

  long stepCount() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  void setLearningRate(double lr) { cfg_.lr = lr; }

 private:
  ParamList<T> params_;
  AdamConfig cfg_;
  std::vector<RowMatrix<T>> m_;
  std::vector<RowMatrix<T>> v_;
  long step_ = 0;
};

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_OPTIM_HPP
