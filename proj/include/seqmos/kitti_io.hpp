// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_KITTI_IO_HPP
#define SEQMOS_KITTI_IO_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/geometry.hpp"
#include "seqmos/types.hpp"

namespace seqmos {
namespace io {

namespace fs = std::filesystem;

/// Per-point SemanticKITTI label: lower 16 bits semantic class, upper 16 bits instance.
struct LabelSet {
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  static std::uint16_t semantic(std::uint32_t label) { return label & 0xFFFFu; }
  static std::uint16_t instance(std::uint32_t label) { return label >> 16; }
};

/// SemanticKITTI "moving-*" classes.
inline std::set<std::uint16_t> defaultMotionClassIds() {
  return {252, 253, 254, 255, 256, 257, 258, 259};
}

/// unlabeled, outlier
inline std::set<std::uint16_t> defaultIgnoreClassIds() { return {0, 1}; }

struct SequenceConfig {
  fs::path scan_dir;
  fs::path label_dir;
  fs::path pose_file;
  std::set<std::uint16_t> motion_class_ids = defaultMotionClassIds();
  std::set<std::uint16_t> ignore_class_ids = defaultIgnoreClassIds();

  void validate() const {
    for (auto id : motion_class_ids)
      if (ignore_class_ids.count(id))
        fail(ErrorKind::ConfigError,
             "class id " + std::to_string(id) + " is both moving and ignored");
  }

  /// Standard SemanticKITTI layout under a sequence directory.
  static SequenceConfig forSequence(const fs::path& seq_dir) {
    SequenceConfig cfg;
    cfg.scan_dir = seq_dir / "velodyne";
    cfg.label_dir = seq_dir / "labels";
    cfg.pose_file = seq_dir / "poses.txt";
    return cfg;
  }
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
U toLittle(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xFF);
    return out;
  } else {
    return v;
  }
}

inline std::vector<char> readBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(bytes.data(), size))
    fail(ErrorKind::IoError, "cannot read " + path.string());
  return bytes;
}

inline void writeBytes(const fs::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

inline std::uint32_t loadU32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return toLittle(v);
}

inline void storeU32(char* p, std::uint32_t v) {
  v = toLittle(v);
  std::memcpy(p, &v, 4);
}

inline std::vector<double> parseNumbers(const std::string& line, const fs::path& path,
                                        std::size_t line_no) {
  std::istringstream ss(line);
  std::vector<double> values;
  std::string token;
  while (ss >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size())
      fail(ErrorKind::MalformedFile, path.string() + ":" + std::to_string(line_no) +
                                         ": bad number '" + token + "'");
    if (!std::isfinite(v))
      fail(ErrorKind::NonFiniteValue,
           path.string() + ":" + std::to_string(line_no) + ": non-finite value");
    values.push_back(v);
  }
  return values;
}

inline Eigen::Matrix4d matrixFromRowMajor12(const std::vector<double>& v) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
  return m;
}

/// Rotation block is projected onto SO(3) when it is not a proper rotation
/// within PoseSE3::kTolerance.
inline PoseSE3 poseFromMatrix(Eigen::Matrix4d m) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if (PoseSE3::orthonormalityDefect(r) > PoseSE3::kTolerance ||
      std::abs(r.determinant() - 1.0) > PoseSE3::kTolerance)
    m.topLeftCorner<3, 3>() = nearestRotation(r);
  return PoseSE3(m);
}

}  // namespace detail

/// Reads a `.bin` scan: little-endian float32 (x, y, z, intensity) per point.
inline RawScan readScan(const fs::path& path, std::size_t frame_index = 0) {
  const std::vector<char> bytes = detail::readBytes(path);
  if (bytes.size() % 16 != 0)
    fail(ErrorKind::MalformedFile,
         path.string() + ": size " + std::to_string(bytes.size()) + " not divisible by 16");
  RawScan scan;
  scan.frame_index = frame_index;
  scan.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    std::array<double, 4> v{};
    for (std::size_t j = 0; j < 4; ++j)
      v[j] = std::bit_cast<float>(detail::loadU32(bytes.data() + 16 * i + 4 * j));
    scan.points[i] = {v[0], v[1], v[2], v[3]};
    if (!isFinite(scan.points[i]))
      fail(ErrorKind::NonFiniteValue, path.string() + ": point " + std::to_string(i));
  }
  return scan;
}

/// Coordinates are narrowed to float32 on write.
inline void writeScan(const fs::path& path, const RawScan& scan) {
  std::vector<char> bytes(scan.points.size() * 16);
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Point& p = scan.points[i];
    const std::array<float, 4> v{static_cast<float>(p.x), static_cast<float>(p.y),
                                 static_cast<float>(p.z), static_cast<float>(p.intensity)};
    for (std::size_t j = 0; j < 4; ++j)
      detail::storeU32(bytes.data() + 16 * i + 4 * j, std::bit_cast<std::uint32_t>(v[j]));
  }
  detail::writeBytes(path, bytes);
}

inline LabelSet readLabels(const fs::path& path) {
  const std::vector<char> bytes = detail::readBytes(path);
  if (bytes.size() % 4 != 0)
    fail(ErrorKind::MalformedFile,
         path.string() + ": size " + std::to_string(bytes.size()) + " not divisible by 4");
  LabelSet out;
  out.labels.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    out.labels[i] = detail::loadU32(bytes.data() + 4 * i);
  return out;
}

inline void writeLabels(const fs::path& path, const LabelSet& labels) {
  std::vector<char> bytes(labels.labels.size() * 4);
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    detail::storeU32(bytes.data() + 4 * i, labels.labels[i]);
  detail::writeBytes(path, bytes);
}

/**
 * @brief Reads a KITTI poses file: 12 row-major numbers (3x4) per nonempty line.
 *
 * Rotation blocks that are not proper rotations to 1e-9 are replaced by the
 * nearest rotation (polar decomposition).
 */
inline std::vector<PoseSE3> readPoses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<PoseSE3> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<double> v = detail::parseNumbers(line, path, line_no);
    if (v.empty()) continue;
    if (v.size() != 12)
      fail(ErrorKind::MalformedFile, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 12 numbers, got " +
                                         std::to_string(v.size()));
    poses.push_back(detail::poseFromMatrix(detail::matrixFromRowMajor12(v)));
  }
  return poses;
}

inline void writePoses(const fs::path& path, const std::vector<PoseSE3>& poses) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (const PoseSE3& p : poses) {
    const Eigen::Matrix4d& m = p.matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) ss << m(r, c) << ((r == 2 && c == 3) ? '\n' : ' ');
  }
  const std::string text = ss.str();
  detail::writeBytes(path, std::vector<char>(text.begin(), text.end()));
}

/// The `Tr:` entry of a KITTI calib file (LiDAR to camera).
inline PoseSE3 readCalibTr(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("Tr:", 0) != 0) continue;
    const std::vector<double> v = detail::parseNumbers(line.substr(3), path, line_no);
    if (v.size() != 12)
      fail(ErrorKind::MalformedFile, path.string() + ": Tr line needs 12 numbers");
    return detail::poseFromMatrix(detail::matrixFromRowMajor12(v));
  }
  fail(ErrorKind::MalformedFile, path.string() + ": no Tr line");
}

/// Re-expresses camera-frame poses as LiDAR-frame poses: Tr^{-1} * P * Tr.
inline std::vector<PoseSE3> applyCalibration(const std::vector<PoseSE3>& poses,
                                             const PoseSE3& tr) {
  std::vector<PoseSE3> out;
  out.reserve(poses.size());
  const PoseSE3 tr_inv = tr.inverse();
  for (const PoseSE3& p : poses) out.push_back(tr_inv * p * tr);
  return out;
}

/// Reads `poses.txt` of a sequence directory, applying `calib.txt` when present.
inline std::vector<PoseSE3> readSequencePoses(const fs::path& pose_file) {
  std::vector<PoseSE3> poses = readPoses(pose_file);
  const fs::path calib = pose_file.parent_path() / "calib.txt";
  if (fs::exists(calib)) poses = applyCalibration(poses, readCalibTr(calib));
  return poses;
}

inline MotionLabels mapSemanticToMotion(const LabelSet& labels, const SequenceConfig& cfg) {
  MotionLabels out;
  out.reserve(labels.size());
  for (std::uint32_t l : labels.labels) {
    const std::uint16_t sem = LabelSet::semantic(l);
    if (cfg.motion_class_ids.count(sem))
      out.push_back(MotionLabel::Moving);
    else if (cfg.ignore_class_ids.count(sem))
      out.push_back(MotionLabel::Ignore);
    else
      out.push_back(MotionLabel::Static);
  }
  return out;
}

/// Predicted-label output: motion value in the lower 16 bits.
inline LabelSet encodePredictions(const MotionLabels& labels) {
  LabelSet out;
  out.labels.reserve(labels.size());
  for (MotionLabel m : labels) out.labels.push_back(static_cast<std::uint32_t>(m));
  return out;
}

/// Inverse of encodePredictions; unknown values map to Ignore.
inline MotionLabels decodePredictions(const LabelSet& labels) {
  MotionLabels out;
  out.reserve(labels.size());
  for (std::uint32_t l : labels.labels) {
    switch (LabelSet::semantic(l)) {
      case 0: out.push_back(MotionLabel::Static); break;
      case 1: out.push_back(MotionLabel::Moving); break;
      default: out.push_back(MotionLabel::Ignore); break;
    }
  }
  return out;
}

inline std::string frameName(std::size_t index, const std::string& ext) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index << ext;
  return ss.str();
}

/// Sorted `.bin` files of a scan directory.
inline std::vector<fs::path> listFiles(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

/// One timestamp (seconds) per line of KITTI `times.txt`.
inline std::vector<double> readTimes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<double> times;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::vector<double> v = detail::parseNumbers(line, path, line_no);
    if (v.empty()) continue;
    if (v.size() != 1) fail(ErrorKind::MalformedFile, path.string() + ": one time per line");
    times.push_back(v[0]);
  }
  return times;
}

inline void writeTimes(const fs::path& path, const std::vector<double>& times) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  for (double t : times) ss << t << '\n';
  const std::string text = ss.str();
  detail::writeBytes(path, std::vector<char>(text.begin(), text.end()));
}

}  // namespace io
}  // namespace seqmos

#endif  // SEQMOS_KITTI_IO_HPP
