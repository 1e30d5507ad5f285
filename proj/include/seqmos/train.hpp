// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_TRAIN_HPP
#define SEQMOS_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "seqmos/eval.hpp"
#include "seqmos/kitti_io.hpp"
#include "seqmos/loss.hpp"
#include "seqmos/nn/model.hpp"
#include "seqmos/nn/optim.hpp"
#include "seqmos/residual.hpp"

namespace seqmos {

/// Scans with ground-truth poses and motion labels.
struct LabeledSequence {
  std::string name;
  std::vector<RawScan> scans;
  /// rel_poses[j] = T_j^{j-1}, entry 0 unused.
  std::vector<PoseSE3> rel_poses;
  std::vector<MotionLabels> labels;

  std::size_t size() const noexcept { return scans.size(); }

  void validate() const {
    if (rel_poses.size() != scans.size())
      fail(ErrorKind::LengthMismatch, name + ": " + std::to_string(scans.size()) + " scans but " +
                                          std::to_string(rel_poses.size()) + " poses");
    if (!labels.empty()) {
      if (labels.size() != scans.size()) fail(ErrorKind::LengthMismatch, name + ": label file count");
      for (std::size_t f = 0; f < scans.size(); ++f)
        if (labels[f].size() != scans[f].size())
          fail(ErrorKind::LengthMismatch, name + ": frame " + std::to_string(f) + " label count");
    }
  }
};

/// Loads a KITTI-layout sequence directory. Labels are optional.
inline LabeledSequence loadSequence(const io::SequenceConfig& cfg, bool require_labels) {
  LabeledSequence seq;
  seq.name = cfg.scan_dir.parent_path().string();
  const auto scan_files = io::listFiles(cfg.scan_dir, ".bin");
  for (std::size_t f = 0; f < scan_files.size(); ++f) seq.scans.push_back(io::readScan(scan_files[f], f));
  const std::vector<PoseSE3> world = io::readSequencePoses(cfg.pose_file);
  if (world.size() != seq.scans.size())
    fail(ErrorKind::LengthMismatch, cfg.pose_file.string() + ": " + std::to_string(world.size()) +
                                        " poses for " + std::to_string(seq.scans.size()) + " scans");
  seq.rel_poses = relativeFromWorld(world);
  if (require_labels || std::filesystem::is_directory(cfg.label_dir)) {
    const auto label_files = io::listFiles(cfg.label_dir, ".label");
    for (const auto& lf : label_files) seq.labels.push_back(io::mapSemanticToMotion(io::readLabels(lf), cfg));
  }
  seq.validate();
  return seq;
}

/**
 * @brief Residual stack for any frame. Frames before k reuse the oldest
 * available scan, so the first frame sees itself as every previous frame.
 */
inline ResidualStack clampedResidualStack(const LabeledSequence& seq, std::size_t t, std::size_t k) {
  if (t >= k) return buildResidualStack(seq.scans, seq.rel_poses, t, k);
  ResidualStack stack;
  stack.current = seq.scans[t];
  const std::span<const PoseSE3> chain = std::span<const PoseSE3>(seq.rel_poses).subspan(1);
  for (std::size_t i = 1; i <= k; ++i) {
    const std::size_t src = i <= t ? t - i : 0;
    const PoseSE3 to_current = composeRelative(chain, t, src).inverse();
    stack.previous.push_back({i, transformScan(seq.scans[src], to_current)});
  }
  return stack;
}

struct SampleRef {
  std::size_t seq = 0;
  std::size_t frame = 0;
};

/// Training frames: every stride-th frame that has k real predecessors.
inline std::vector<SampleRef> trainingSamples(const std::vector<LabeledSequence>& data, std::size_t k,
                                              std::size_t stride) {
  if (stride < 1) fail(ErrorKind::ConfigError, "train.frame_stride must be >= 1");
  std::vector<SampleRef> out;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (data[s].labels.empty()) fail(ErrorKind::EmptyDataset, data[s].name + " has no labels");
    for (std::size_t t = k; t < data[s].size(); t += stride) out.push_back({s, t});
  }
  return out;
}

/// Point targets: labels of in-grid points, Ignore for points outside the grid.
inline Targets pointTargets(const PointVoxelMapping& m, const MotionLabels& labels) {
  Targets t = targetsFromLabels(labels);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (m.flat[i] < 0) t[i] = kIgnoreTarget;
  return t;
}

/// Static/Moving counts of in-grid points over the samples.
inline std::vector<std::size_t> classCounts(const std::vector<LabeledSequence>& data,
                                            const std::vector<SampleRef>& samples, const CylindricalGridSpec& grid) {
  std::vector<std::size_t> counts(2, 0);
  for (const SampleRef& s : samples) {
    const LabeledSequence& seq = data[s.seq];
    const PointVoxelMapping m = assignVoxels(seq.scans[s.frame], grid);
    for (int t : pointTargets(m, seq.labels[s.frame]))
      if (t != kIgnoreTarget) ++counts[static_cast<std::size_t>(t)];
  }
  return counts;
}

/// Motion labels for a point set: out-of-grid points fall back to Static.
template <typename T>
MotionLabels labelsFromOutput(const nn::ModelOutput<T>& out, const PointVoxelMapping& m) {
  MotionLabels pred = nn::predictLabels(out.point_logits);
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (m.flat[i] < 0) pred[i] = MotionLabel::Static;
  return pred;
}

template <typename T>
MotionLabels segmentFrame(nn::Model<T>& model, const LabeledSequence& seq, std::size_t t,
                          const CylindricalGridSpec& grid) {
  const auto k = static_cast<std::size_t>(model.config().residual_frames);
  const ResidualStack stack = clampedResidualStack(seq, t, k);
  const nn::ModelInput<T> in = nn::prepareInput<T>(stack, grid);
  return labelsFromOutput(model.forward(in), in.mappings[0]);
}

struct EpochStats {
  int epoch = 0;
  double total_loss = 0.0;
  double voxel_loss = 0.0;
  double point_loss = 0.0;
  double moving_iou = 0.0;
  std::size_t samples = 0;
};

struct TrainOptions {
  CylindricalGridSpec grid;
  LossConfig loss;
  bool auto_class_weights = true;
  double weight_min = 0.1;
  double weight_max = 10.0;
  nn::AdamConfig adam;
  int epochs = 12;
  bool shuffle = true;
  std::size_t frame_stride = 1;
  /// Random yaw and lateral mirror applied to each training stack.
  bool augment = true;
  /// Learning rate of the last epoch as a fraction of the first (cosine schedule).
  double final_lr_fraction = 1.0;
  std::uint64_t seed = 1;
};

/// Rotates every scan of the stack by yaw about z, then mirrors y when asked.
inline void augmentStack(ResidualStack& stack, double yaw, bool mirror) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto apply = [&](RawScan& scan) {
    for (Point& p : scan.points) {
      const double x = c * p.x - s * p.y;
      const double y = s * p.x + c * p.y;
      p.x = x;
      p.y = mirror ? -y : y;
    }
  };
  apply(stack.current);
  for (auto& prev : stack.previous) apply(prev.scan);
}

/// Cosine interpolation from lr at epoch 1 to lr * final_fraction at the last epoch.
inline double scheduledLearningRate(double lr, double final_fraction, int epoch, int epochs) {
  if (epochs <= 1) return lr;
  const double u = static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
  return lr * (final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * u)));
}

/**
 * @brief Trains in place; one Adam step per frame.
 *
 * @param on_epoch called after each epoch (logging); may be empty
 */
template <typename T>
std::vector<EpochStats> train(nn::Model<T>& model, const std::vector<LabeledSequence>& data,
                              TrainOptions opt, const std::function<void(const EpochStats&)>& on_epoch = {}) {
  if (opt.epochs < 1) fail(ErrorKind::ConfigError, "train.epochs must be >= 1");
  for (const auto& s : data) s.validate();
  nn::ModelConfig::checkGrid(opt.grid.bins);
  const auto k = static_cast<std::size_t>(model.config().residual_frames);
  std::vector<SampleRef> samples = trainingSamples(data, k, opt.frame_stride);
  if (samples.empty()) fail(ErrorKind::EmptyDataset, "no training frames (need more than k frames)");
  if (opt.auto_class_weights)
    opt.loss.class_weights = inverseFrequencyWeights(classCounts(data, samples, opt.grid), opt.weight_min, opt.weight_max);
  opt.loss.validate();

  nn::Adam<T> adam(model.params(), opt.adam);
  nn::Rng rng(opt.seed ^ 0x5EED5EEDull);
  std::vector<EpochStats> history;
  for (int e = 1; e <= opt.epochs; ++e) {
    if (opt.shuffle)
      for (std::size_t i = samples.size(); i > 1; --i) std::swap(samples[i - 1], samples[rng.below(i)]);
    adam.setLearningRate(scheduledLearningRate(opt.adam.lr, opt.final_lr_fraction, e, opt.epochs));
    EpochStats st;
    st.epoch = e;
    ConfusionCounts cc;
    for (const SampleRef& s : samples) {
      const LabeledSequence& seq = data[s.seq];
      ResidualStack stack = buildResidualStack(seq.scans, seq.rel_poses, s.frame, k);
      if (opt.augment) {
        const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
        augmentStack(stack, yaw, rng.uniform01() < 0.5);
      }
      const nn::ModelInput<T> in = nn::prepareInput<T>(stack, opt.grid);
      const nn::ModelOutput<T> out = model.forward(in);
      const Targets vt = voxelTargets(in.mappings[0], seq.labels[s.frame]);
      const Targets pt = pointTargets(in.mappings[0], seq.labels[s.frame]);
      if (std::all_of(pt.begin(), pt.end(), [](int t) { return t == kIgnoreTarget; })) continue;
      const TotalLoss<T> loss = totalLoss(out.voxel_logits, vt, out.point_logits, pt, opt.loss);
      model.zeroGrad();
      model.backward(loss.d_voxel_logits, loss.d_point_logits);
      adam.step();
      st.total_loss += loss.total;
      st.voxel_loss += loss.voxel;
      st.point_loss += loss.point;
      cc += confusion(labelsFromOutput(out, in.mappings[0]), seq.labels[s.frame]);
      ++st.samples;
    }
    if (st.samples == 0) fail(ErrorKind::EmptyDataset, "every training frame was fully ignored");
    const double n = static_cast<double>(st.samples);
    st.total_loss /= n;
    st.voxel_loss /= n;
    st.point_loss /= n;
    st.moving_iou = movingIou(cc);
    history.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return history;
}

inline void writeEpochCsvHeader(std::ostream& out) { out << "epoch,total_loss,voxel_loss,point_loss,moving_iou\n"; }

inline void writeEpochCsvRow(std::ostream& out, const EpochStats& s) {
  out << s.epoch << ',' << std::setprecision(9) << s.total_loss << ',' << s.voxel_loss << ',' << s.point_loss << ','
      << s.moving_iou << '\n';
}

/// Confusion over frames [first_frame, end) of each labeled sequence.
template <typename T>
ConfusionCounts evaluateModel(nn::Model<T>& model, const std::vector<LabeledSequence>& data,
                              const CylindricalGridSpec& grid, std::size_t first_frame) {
  ConfusionCounts cc;
  for (const auto& seq : data)
    for (std::size_t t = first_frame; t < seq.size(); ++t)
      cc += confusion(segmentFrame(model, seq, t, grid), seq.labels.at(t));
  return cc;
}

}  // namespace seqmos

#endif  // SEQMOS_TRAIN_HPP
