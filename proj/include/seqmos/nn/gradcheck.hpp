// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_GRADCHECK_HPP
#define SEQMOS_NN_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/nn/param.hpp"

namespace seqmos {
namespace nn {

struct GradcheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Tensors with more coordinates than this are sampled down to it.
  int max_coords_per_param = 64;
  /// Denominator floor of the relative error, so coordinates whose true
  /// gradient is ~0 are judged on absolute error.
  double denom_floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradcheckEntry {
  std::string param;
  Eigen::Index coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t coords_checked = 0;
  bool passed = false;
  std::vector<GradcheckEntry> entries;
};

/**
 * @brief Central-difference check of analytic gradients.
 *
 * @param loss evaluates the scalar objective at the current parameter values
 * @param compute_grads fills Param::grad for the current values (callers are
 *        expected to zero gradients inside)
 * @param params tensors to perturb; inputs can be checked by wrapping them
 *        as a Param
 */
inline GradcheckReport finiteDiffGradcheck(const std::function<double()>& loss,
                                           const std::function<void()>& compute_grads,
                                           const ParamList<double>& params,
                                           const GradcheckOptions& opt = {}) {
  if (!(opt.step > 0.0) || !std::isfinite(opt.step))
    fail(ErrorKind::InvalidArgument, "gradcheck step must be positive");
  compute_grads();
  GradcheckReport report;
  Rng rng(opt.seed);
  for (Param<double>* p : params) {
    if (!p->grad.allFinite()) fail(ErrorKind::NonFiniteGradient, "analytic gradient of " + p->name);
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> coords;
    if (n <= opt.max_coords_per_param) {
      for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < opt.max_coords_per_param; ++i)
        coords.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    }
    for (Eigen::Index i : coords) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + opt.step;
      const double fp = loss();
      x = saved - opt.step;
      const double fm = loss();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      if (!std::isfinite(numeric)) fail(ErrorKind::NonFiniteGradient, "numeric gradient of " + p->name);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.denom_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      report.entries.push_back({p->name, i, analytic, numeric, rel});
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
      }
    }
  }
  report.passed = report.max_rel_error < opt.tolerance;
  return report;
}

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_GRADCHECK_HPP
