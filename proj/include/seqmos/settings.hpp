// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_SETTINGS_HPP
#define SEQMOS_SETTINGS_HPP

#include <set>
#include <vector>

#include "seqmos/config.hpp"
#include "seqmos/cylvoxel.hpp"
#include "seqmos/kitti_io.hpp"
#include "seqmos/loopclosure.hpp"
#include "seqmos/loss.hpp"
#include "seqmos/nn/model.hpp"
#include "seqmos/nn/optim.hpp"
#include "seqmos/odometry.hpp"
#include "seqmos/residual.hpp"
#include "seqmos/train.hpp"

namespace seqmos {

// Builders from the flat RunConfig to the per-module option structs.

namespace detail {

inline Dims3 dimsFrom(const RunConfig& cfg, const std::string& key) {
  const std::vector<long> v = cfg.integers(key);
  if (v.size() != 3) fail(ErrorKind::ConfigError, key + ": expected three extents");
  return {static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])};
}

inline std::set<std::uint16_t> idSet(const RunConfig& cfg, const std::string& key) {
  std::set<std::uint16_t> out;
  for (long v : cfg.integers(key)) {
    if (v < 0 || v > 0xFFFF) fail(ErrorKind::ConfigError, key + ": class id out of range");
    out.insert(static_cast<std::uint16_t>(v));
  }
  return out;
}

}  // namespace detail

inline CylindricalGridSpec gridFromConfig(const RunConfig& cfg) {
  CylindricalGridSpec g;
  g.bins = {static_cast<int>(cfg.integer("grid.h")), static_cast<int>(cfg.integer("grid.w")),
            static_cast<int>(cfg.integer("grid.l"))};
  g.rho_min = cfg.num("grid.rho_min");
  g.rho_max = cfg.num("grid.rho_max");
  g.z_min = cfg.num("grid.z_min");
  g.z_max = cfg.num("grid.z_max");
  g.validate();
  return g;
}

inline nn::ModelConfig modelFromConfig(const RunConfig& cfg) {
  nn::ModelConfig m;
  m.point_feature_dim = static_cast<int>(cfg.integer("model.point_feature_dim"));
  m.mlp_hidden.clear();
  for (long h : cfg.integers("model.mlp_hidden")) m.mlp_hidden.push_back(static_cast<int>(h));
  const std::vector<long> ch = cfg.integers("model.channels");
  if (ch.size() != m.channels.size())
    fail(ErrorKind::ConfigError, "model.channels: expected " + std::to_string(m.channels.size()) + " widths");
  for (std::size_t i = 0; i < ch.size(); ++i) m.channels[i] = static_cast<int>(ch[i]);
  m.refine_hidden = static_cast<int>(cfg.integer("model.refine_hidden"));
  m.residual_frames = static_cast<int>(cfg.integer("model.residual_frames"));
  m.up_kernel = detail::dimsFrom(cfg, "model.up_kernel");
  m.ddcm_extents = detail::dimsFrom(cfg, "model.ddcm_kernel");
  m.leaky_slope = cfg.num("model.leaky_slope");
  m.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  m.validate();
  return m;
}

/// Loss options; class weights stay at 1 when set to "auto" (the trainer fills them in).
inline LossConfig lossFromConfig(const RunConfig& cfg) {
  LossConfig l;
  l.alpha = cfg.num("loss.alpha");
  l.beta = cfg.num("loss.beta");
  if (cfg.str("loss.class_weights") != "auto") {
    l.class_weights = cfg.numbers("loss.class_weights");
    if (l.class_weights.size() != 2)
      fail(ErrorKind::ConfigError, "loss.class_weights: expected 'auto' or static,moving");
  }
  l.validate();
  return l;
}

inline bool autoClassWeights(const RunConfig& cfg) { return cfg.str("loss.class_weights") == "auto"; }

inline nn::AdamConfig adamFromConfig(const RunConfig& cfg) {
  nn::AdamConfig a;
  a.lr = cfg.num("train.lr");
  a.beta1 = cfg.num("train.beta1");
  a.beta2 = cfg.num("train.beta2");
  a.epsilon = cfg.num("train.epsilon");
  if (!(a.lr > 0.0 && a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0 &&
        a.epsilon > 0.0))
    fail(ErrorKind::ConfigError, "train: invalid Adam settings");
  return a;
}

inline SpatialDiffParams baselineFromConfig(const RunConfig& cfg) {
  SpatialDiffParams p;
  p.neighbor_radius = cfg.num("baseline.neighbor_radius");
  p.distance_threshold = cfg.num("baseline.distance_threshold");
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, e.what());
  }
  return p;
}

/// Label mapping of a sequence directory, with class-id sets from the config.
inline io::SequenceConfig sequenceFromConfig(const RunConfig& cfg, const std::filesystem::path& dir) {
  io::SequenceConfig s = io::SequenceConfig::forSequence(dir);
  s.motion_class_ids = detail::idSet(cfg, "data.motion_classes");
  s.ignore_class_ids = detail::idSet(cfg, "data.ignore_classes");
  s.validate();
  return s;
}

inline TrainOptions trainFromConfig(const RunConfig& cfg) {
  TrainOptions t;
  t.grid = gridFromConfig(cfg);
  t.loss = lossFromConfig(cfg);
  t.auto_class_weights = autoClassWeights(cfg);
  t.weight_min = cfg.num("loss.weight_min");
  t.weight_max = cfg.num("loss.weight_max");
  if (!(t.weight_min > 0.0 && t.weight_min <= t.weight_max))
    fail(ErrorKind::ConfigError, "loss.weight_min must be positive and <= loss.weight_max");
  t.adam = adamFromConfig(cfg);
  t.epochs = static_cast<int>(cfg.integer("train.epochs"));
  t.shuffle = cfg.boolean("train.shuffle");
  const long stride = cfg.integer("train.frame_stride");
  if (stride < 1) fail(ErrorKind::ConfigError, "train.frame_stride must be >= 1");
  t.frame_stride = static_cast<std::size_t>(stride);
  t.augment = cfg.boolean("train.augment");
  t.final_lr_fraction = cfg.num("train.final_lr_fraction");
  if (!(t.final_lr_fraction > 0.0 && t.final_lr_fraction <= 1.0))
    fail(ErrorKind::ConfigError, "train.final_lr_fraction must be in (0, 1]");
  t.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  return t;
}

inline LoopParams loopFromConfig(const RunConfig& cfg) {
  LoopParams p;
  p.rings = static_cast<int>(cfg.integer("loop.rings"));
  p.sectors = static_cast<int>(cfg.integer("loop.sectors"));
  p.rho_max = cfg.num("loop.rho_max");
  const long k = cfg.integer("loop.candidates");
  const long every = cfg.integer("loop.keyframe_every");
  if (p.rings < 1 || p.sectors < 1 || !(p.rho_max > 0.0) || k < 1 || every < 1)
    fail(ErrorKind::ConfigError, "loop: rings, sectors, rho_max, candidates and keyframe_every must be positive");
  p.candidates = static_cast<std::size_t>(k);
  p.keyframe_every = static_cast<std::size_t>(every);
  p.time_gap_min = cfg.num("loop.time_gap_min");
  p.accept_threshold = cfg.num("loop.accept_threshold");
  p.height_offset = cfg.num("loop.height_offset");
  return p;
}

inline IcpParams odomFromConfig(const RunConfig& cfg) {
  IcpParams p;
  p.iterations = static_cast<int>(cfg.integer("odom.iterations"));
  p.max_correspondence = cfg.num("odom.max_correspondence");
  const long sub = cfg.integer("odom.subsample");
  const long window = cfg.integer("odom.map_frames");
  if (p.iterations < 1 || !(p.max_correspondence > 0.0) || sub < 1 || window < 1)
    fail(ErrorKind::ConfigError, "odom: iterations, max_correspondence, subsample and map_frames must be positive");
  p.subsample = static_cast<std::size_t>(sub);
  p.map_frames = static_cast<std::size_t>(window);
  p.min_height = cfg.num("odom.min_height");
  p.planar = cfg.boolean("odom.planar");
  p.yaw_prior = cfg.num("odom.yaw_prior");
  if (!(p.yaw_prior >= 0.0 && p.yaw_prior <= 1.0)) fail(ErrorKind::ConfigError, "odom.yaw_prior must be in [0, 1]");
  return p;
}

}  // namespace seqmos

#endif  // SEQMOS_SETTINGS_HPP
