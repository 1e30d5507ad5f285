// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_MODEL_HPP
#define SEQMOS_NN_MODEL_HPP

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "seqmos/cylvoxel.hpp"
#include "seqmos/nn/blocks.hpp"
#include "seqmos/residual.hpp"

namespace seqmos {
namespace nn {

inline constexpr int kPointInputDim = 6;
inline constexpr int kStages = 3;

struct ModelConfig {
  int point_feature_dim = 16;
  std::vector<int> mlp_hidden{32};
  /// Stem width followed by the width after each of the three down stages.
  std::array<int, kStages + 1> channels{16, 24, 32, 32};
  int refine_hidden = 32;
  int num_classes = 2;
  int residual_frames = 3;
  Dims3 up_kernel{3, 3, 3};
  Dims3 ddcm_extents{3, 3, 3};
  double leaky_slope = 0.01;
  std::uint64_t seed = 1;

  void validate() const {
    if (point_feature_dim <= 0 || refine_hidden <= 0 || num_classes < 2 || residual_frames < 0)
      fail(ErrorKind::ConfigError, "model sizes must be positive, classes >= 2, k >= 0");
    for (int c : channels)
      if (c <= 0) fail(ErrorKind::ConfigError, "model channels must be positive");
    for (int h : mlp_hidden)
      if (h <= 0) fail(ErrorKind::ConfigError, "model.mlp_hidden entries must be positive");
  }

  /// Spatial dims must survive three halvings.
  static void checkGrid(const Dims3& d) {
    constexpr int f = 1 << kStages;
    if (d.h % f || d.w % f || d.l % f)
      fail(ErrorKind::OddDimension, "grid " + d.str() + " must be divisible by 8 on every axis");
  }

  /// Model keys in RunConfig syntax; the checkpoint header echoes this.
  std::string describe() const {
    std::ostringstream ss;
    ss << "model.point_feature_dim = " << point_feature_dim << "\nmodel.mlp_hidden = ";
    for (std::size_t i = 0; i < mlp_hidden.size(); ++i) ss << (i ? "," : "") << mlp_hidden[i];
    ss << "\nmodel.channels = " << channels[0] << "," << channels[1] << "," << channels[2] << ","
       << channels[3] << "\nmodel.refine_hidden = " << refine_hidden
       << "\nmodel.residual_frames = " << residual_frames
       << "\nmodel.up_kernel = " << up_kernel.h << "," << up_kernel.w << "," << up_kernel.l
       << "\nmodel.ddcm_kernel = " << ddcm_extents.h << "," << ddcm_extents.w << ","
       << ddcm_extents.l << "\nmodel.leaky_slope = " << std::setprecision(17) << leaky_slope
       << "\nseed = " << seed << "\n";
    return ss.str();
  }
};

/// Per-frame network inputs; frame 0 is the current scan.
template <typename T>
struct ModelInput {
  std::vector<RowMatrix<T>> points;
  std::vector<PointVoxelMapping> mappings;

  std::size_t frames() const { return points.size(); }
};

template <typename T>
ModelInput<T> prepareInput(const ResidualStack& stack, const CylindricalGridSpec& spec) {
  ModelInput<T> in;
  auto add = [&](const RawScan& scan) {
    PointVoxelMapping m = assignVoxels(scan, spec);
    in.points.push_back(pointInputs<T>(scan, m, spec));
    in.mappings.push_back(std::move(m));
  };
  add(stack.current);
  for (const auto& prev : stack.previous) add(prev.scan);
  return in;
}

template <typename T>
struct ModelOutput {
  Tensor4<T> voxel_logits;   // classes x H x W x L
  RowMatrix<T> point_logits;  // N x classes
};

/**
 * @brief Full segmentation network.
 *
 * Shared point MLP on every frame -> max-pool scatter -> residual grids
 * (current - previous_i) -> channel concat -> pointwise stem -> three down
 * blocks -> three up blocks with skips -> dimension decomposition -> pointwise
 * voxel head. The point head refines per-point logits from gathered voxel
 * context and the current frame's point features.
 */
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const T slope = static_cast<T>(cfg.leaky_slope);
    std::vector<int> sizes{kPointInputDim};
    sizes.insert(sizes.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
    sizes.push_back(cfg.point_feature_dim);
    mlp_ = Mlp<T>("mlp", sizes, slope);
    const int in_ch = cfg.point_feature_dim * (cfg.residual_frames + 1);
    const auto& ch = cfg.channels;
    stem_ = Conv3d<T>("stem", in_ch, ch[0], {1, 1, 1}, true);
    stem_norm_ = ChannelAffine<T>("stem.norm", ch[0]);
    stem_act_ = TensorLeaky<T>(slope);
    for (int s = 0; s < kStages; ++s) {
      down_[s] = DownBlock<T>("down" + std::to_string(s), ch[s], ch[s + 1], slope);
      up_[s] = UpBlock<T>("up" + std::to_string(s), ch[s + 1], ch[s], cfg.up_kernel, slope);
    }
    ddcm_ = Ddcm<T>("ddcm", ch[0], cfg.ddcm_extents);
    head_ = Conv3d<T>("head", ch[0], cfg.num_classes, {1, 1, 1}, true);
    refine_ = PointRefine<T>("refine", ch[0], cfg.point_feature_dim, cfg.refine_hidden,
                             cfg.num_classes, slope);
    Rng rng(cfg.seed);
    mlp_.init(rng);
    stem_.init(rng);
    for (int s = 0; s < kStages; ++s) down_[s].init(rng);
    for (int s = 0; s < kStages; ++s) up_[s].init(rng);
    ddcm_.init(rng);
    head_.init(rng);
    refine_.init(rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return cfg_; }

  ParamList<T> params() {
    ParamList<T> out;
    mlp_.collect(out);
    stem_.collect(out);
    stem_norm_.collect(out);
    for (auto& d : down_) d.collect(out);
    for (auto& u : up_) u.collect(out);
    ddcm_.collect(out);
    head_.collect(out);
    refine_.collect(out);
    return out;
  }

  void zeroGrad() {
    for (Param<T>* p : params()) p->zeroGrad();
  }

  ModelOutput<T> forward(const ModelInput<T>& in) {
    const std::size_t frames = static_cast<std::size_t>(cfg_.residual_frames) + 1;
    if (in.frames() != frames || in.mappings.size() != frames)
      fail(ErrorKind::ShapeMismatch, "model expects " + std::to_string(frames) + " frames, got " +
                                         std::to_string(in.frames()));
    const Dims3 dims = in.mappings[0].dims;
    ModelConfig::checkGrid(dims);
    const int c = cfg_.point_feature_dim;

    // Shared MLP over all frames at once.
    Eigen::Index total = 0;
    row_offsets_.assign(frames + 1, 0);
    for (std::size_t f = 0; f < frames; ++f) {
      if (in.points[f].cols() != kPointInputDim ||
          static_cast<std::size_t>(in.points[f].rows()) != in.mappings[f].size() ||
          in.mappings[f].dims != dims)
        fail(ErrorKind::ShapeMismatch, "frame " + std::to_string(f) + " inputs disagree");
      row_offsets_[f] = total;
      total += in.points[f].rows();
    }
    row_offsets_[frames] = total;
    RowMatrix<T> all(total, kPointInputDim);
    for (std::size_t f = 0; f < frames; ++f)
      all.middleRows(row_offsets_[f], in.points[f].rows()) = in.points[f];
    const RowMatrix<T> feats = mlp_.forward(all);

    argmax_.resize(frames);
    std::vector<Tensor4<T>> grids;
    for (std::size_t f = 0; f < frames; ++f)
      grids.push_back(scatterMaxPool<T>(feats.middleRows(row_offsets_[f], in.points[f].rows()),
                                        in.mappings[f], &argmax_[f]));
    const std::vector<Tensor4<T>> residuals = voxelResidualFeatures<T>(
        grids[0], std::span<const Tensor4<T>>(grids.data() + 1, grids.size() - 1));

    Tensor4<T> stacked(c * static_cast<int>(frames), dims);
    stacked.mat().topRows(c) = grids[0].mat();
    for (std::size_t i = 0; i < residuals.size(); ++i)
      stacked.mat().middleRows(c * static_cast<Eigen::Index>(i + 1), c) = residuals[i].mat();

    Tensor4<T> x = stem_act_.forward(stem_norm_.forward(stem_.forward(stacked)));
    for (int s = 0; s < kStages; ++s) x = down_[s].forward(x, &skips_[s]);
    for (int s = kStages; s-- > 0;) x = up_[s].forward(x, skips_[s]);
    Tensor4<T> context = ddcm_.forward(x);

    ModelOutput<T> out;
    out.voxel_logits = head_.forward(context);
    current_mapping_ = &in.mappings[0];
    point_count_ = in.points[0].rows();
    out.point_logits = refine_.forward(gatherPointFeatures(context, in.mappings[0]),
                                       feats.topRows(point_count_));
    return out;
  }

  /// Accumulates parameter gradients for the last forward call.
  void backward(const Tensor4<T>& d_voxel_logits, const RowMatrix<T>& d_point_logits) {
    const std::size_t frames = argmax_.size();
    const int c = cfg_.point_feature_dim;
    auto [d_gathered, d_point_feats] = refine_.backward(d_point_logits);

    Tensor4<T> d_context = head_.backward(d_voxel_logits);
    gatherPointFeaturesBackward(d_gathered, *current_mapping_, d_context);
    Tensor4<T> dx = ddcm_.backward(d_context);
    std::array<Tensor4<T>, kStages> d_skips;
    for (int s = 0; s < kStages; ++s) dx = up_[s].backward(dx, d_skips[s]);
    for (int s = kStages; s-- > 0;) dx = down_[s].backward(dx, &d_skips[s]);
    const Tensor4<T> d_stacked = stem_.backward(stem_norm_.backward(stem_act_.backward(dx)));

    RowMatrix<T> d_feats = RowMatrix<T>::Zero(row_offsets_[frames], c);
    d_feats.topRows(point_count_) += d_point_feats;
    for (std::size_t f = 0; f < frames; ++f) {
      // R_i = G_0 - G_i: the current grid collects every residual block.
      RowMatrix<T> d_grid = d_stacked.mat().middleRows(c * static_cast<Eigen::Index>(f), c);
      if (f == 0) {
        for (std::size_t i = 1; i < frames; ++i)
          d_grid += d_stacked.mat().middleRows(c * static_cast<Eigen::Index>(i), c);
      } else {
        d_grid = -d_grid;
      }
      const Eigen::Index rows = row_offsets_[f + 1] - row_offsets_[f];
      RowMatrix<T> d_frame = RowMatrix<T>::Zero(rows, c);
      scatterMaxPoolBackward<T>(d_grid, argmax_[f], d_frame);
      d_feats.middleRows(row_offsets_[f], rows) += d_frame;
    }
    mlp_.backward(d_feats);
  }

  Mlp<T>& mlp() { return mlp_; }
  DownBlock<T>& down(int s) { return down_[static_cast<std::size_t>(s)]; }
  UpBlock<T>& up(int s) { return up_[static_cast<std::size_t>(s)]; }
  Ddcm<T>& ddcm() { return ddcm_; }
  PointRefine<T>& refine() { return refine_; }

 private:
  ModelConfig cfg_;
  Mlp<T> mlp_;
  Conv3d<T> stem_;
  ChannelAffine<T> stem_norm_;
  TensorLeaky<T> stem_act_;
  std::array<DownBlock<T>, kStages> down_;
  std::array<UpBlock<T>, kStages> up_;
  Ddcm<T> ddcm_;
  Conv3d<T> head_;
  PointRefine<T> refine_;

  std::vector<Eigen::Index> row_offsets_;
  std::vector<ArgmaxIndex> argmax_;
  std::array<Tensor4<T>, kStages> skips_;
  const PointVoxelMapping* current_mapping_ = nullptr;
  Eigen::Index point_count_ = 0;
};

/// Arg-max of point logits as motion labels (class 0 Static, class 1 Moving).
template <typename T>
MotionLabels predictLabels(const RowMatrix<T>& point_logits) {
  MotionLabels out(static_cast<std::size_t>(point_logits.rows()), MotionLabel::Static);
  for (Eigen::Index i = 0; i < point_logits.rows(); ++i) {
    Eigen::Index best = 0;
    point_logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = best == 1 ? MotionLabel::Moving : MotionLabel::Static;
  }
  return out;
}

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_MODEL_HPP
