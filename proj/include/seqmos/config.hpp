// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_CONFIG_HPP
#define SEQMOS_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqmos/error.hpp"

namespace seqmos {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every key the toolkit understands, with its default.
inline const std::vector<ConfigKey>& configKeys() {
  static const std::vector<ConfigKey> keys{
      {"seed", "1", "global seed (model init, shuffling, synthetic scenes)"},
      {"threads", "1", "worker threads for per-frame parallel stages"},
      {"data.motion_classes", "252,253,254,255,256,257,258,259", "semantic ids labeled Moving"},
      {"data.ignore_classes", "0,1", "semantic ids labeled Ignore"},
      {"data.frame_rate", "10", "frame rate (Hz) used when times.txt is absent"},
      {"grid.h", "16", "radius bins"},
      {"grid.w", "32", "azimuth bins"},
      {"grid.l", "8", "height bins"},
      {"grid.rho_min", "0", "minimum radius (m)"},
      {"grid.rho_max", "32", "maximum radius (m)"},
      {"grid.z_min", "-2.5", "minimum height in the sensor frame (m)"},
      {"grid.z_max", "1.5", "maximum height in the sensor frame (m)"},
      {"model.point_feature_dim", "16", "per-point feature width C"},
      {"model.mlp_hidden", "32", "hidden widths of the point MLP (comma list, may be empty)"},
      {"model.channels", "16,24,32,32", "stem width and widths after each down stage"},
      {"model.refine_hidden", "32", "hidden width of the point refinement head"},
      {"model.residual_frames", "3", "number of previous frames k"},
      {"model.up_kernel", "3,3,3", "kernel extents of the upsampling convolution"},
      {"model.ddcm_kernel", "3,3,3", "extents of the three single-axis context kernels"},
      {"model.leaky_slope", "0.01", "negative slope of the leaky activations"},
      {"loss.alpha", "1", "weight of the point loss"},
      {"loss.beta", "1", "weight of the voxel loss"},
      {"loss.class_weights", "auto", "static,moving weights or 'auto' (inverse frequency)"},
      {"loss.weight_min", "0.1", "lower clamp of automatic class weights"},
      {"loss.weight_max", "10", "upper clamp of automatic class weights"},
      {"train.epochs", "12", "training epochs"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.beta1", "0.9", "Adam beta1"},
      {"train.beta2", "0.999", "Adam beta2"},
      {"train.epsilon", "1e-8", "Adam epsilon"},
      {"train.shuffle", "true", "seeded shuffle of samples every epoch"},
      {"train.frame_stride", "1", "use every n-th frame as a training sample"},
      {"train.augment", "true", "random yaw rotation and lateral mirroring of training stacks"},
      {"train.final_lr_fraction", "0.1", "last-epoch learning rate as a fraction of train.lr (cosine decay)"},
      {"baseline.neighbor_radius", "0.5", "hash cell size of the spatial-difference baseline (m)"},
      {"baseline.distance_threshold", "0.5", "nearest-neighbor distance above which a point moves (m)"},
      {"baseline.frames", "1", "previous frames compared by the baseline"},
      {"loop.rings", "20", "scan-context rings"},
      {"loop.sectors", "60", "scan-context sectors"},
      {"loop.rho_max", "40", "scan-context maximum radius (m)"},
      {"loop.candidates", "5", "ring-key nearest neighbors verified per query"},
      {"loop.time_gap_min", "30", "minimum age (s) of a loop candidate"},
      {"loop.accept_threshold", "0.8", "column-cosine similarity needed to accept a loop"},
      {"loop.keyframe_every", "5", "keyframe admission period (frames)"},
      {"loop.height_offset", "1.8", "added to point heights before description (sensor mount height)"},
      {"loop.revisit_radius", "4", "reference-trajectory distance (m) under which a candidate pair is a true loop"},
      {"eval.first_frame", "0", "first frame of each sequence that enters the MOS metrics"},
      {"map.voxel_leaf", "0", "voxel-grid downsampling of exported maps (m), 0 disables"},
      {"odom.iterations", "30", "ICP iterations per frame"},
      {"odom.max_correspondence", "1.0", "ICP correspondence distance (m)"},
      {"odom.subsample", "2", "use every n-th point as ICP source"},
      {"odom.map_frames", "5", "registered scans kept in the local target map"},
      {"odom.min_height", "-1.5", "points below this sensor-frame height are not matched (m)"},
      {"odom.planar", "true", "estimate x, y and yaw only (flat ground)"},
      {"odom.yaw_prior", "0.5", "fraction of the previous yaw step used in the next initial guess"},
      {"synth.scenario", "benchmark", "benchmark | stopped-car | loop | traffic"},
      {"synth.frames", "50", "frames per generated sequence"},
      {"synth.range_noise", "0", "std-dev of Gaussian range jitter (m)"},
  };
  return keys;
}

/// Flat `key = value` configuration; `#` starts a comment.
class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : configKeys()) values_[k.name] = k.default_value;
  }

  static RunConfig fromText(const std::string& text, const std::string& origin = "<config>") {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::ConfigError, origin + ":" + std::to_string(line_no) + ": expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig fromFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return fromText(ss.str(), path.string());
  }

  /// Unknown keys are errors.
  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    return it->second;
  }

  double num(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::ConfigError, key + ": not a number: '" + v + "'");
  }

  long integer(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const long i = std::stol(v, &used);
      if (used == v.size()) return i;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::ConfigError, key + ": not an integer: '" + v + "'");
  }

  bool boolean(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(ErrorKind::ConfigError, key + ": not a boolean: '" + v + "'");
  }

  std::vector<long> integers(const std::string& key) const {
    std::vector<long> out;
    for (const std::string& tok : split(str(key))) {
      try {
        std::size_t used = 0;
        out.push_back(std::stol(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::ConfigError, key + ": bad integer list '" + str(key) + "'");
      }
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split(str(key))) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::ConfigError, key + ": bad number list '" + str(key) + "'");
      }
    }
    return out;
  }

  /// Resolved configuration, one `key = value` per line in key order.
  std::string dump(const std::string& prefix = "") const {
    std::ostringstream ss;
    for (const auto& [k, v] : values_) ss << prefix << k << " = " << v << "\n";
    return ss.str();
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) out.push_back(tok);
    }
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace seqmos

#endif  // SEQMOS_CONFIG_HPP
