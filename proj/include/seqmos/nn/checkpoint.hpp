// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_NN_CHECKPOINT_HPP
#define SEQMOS_NN_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "seqmos/kitti_io.hpp"
#include "seqmos/nn/model.hpp"
#include "seqmos/settings.hpp"

namespace seqmos {
namespace nn {

/*
 * Checkpoint layout, all integers little-endian:
 *
 *   char[8]  magic "SQMOSCK1"
 *   u32      format version (1)
 *   u32      config length, then that many bytes of `key = value` text
 *   u32      tensor count
 *   per tensor:
 *     u32 name length, name bytes
 *     u32 ndim, ndim x u32 extents
 *     u64 element count, that many f64 values (row-major)
 */
inline constexpr char kCheckpointMagic[8] = {'S', 'Q', 'M', 'O', 'S', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    v = io::detail::toLittle(v);
    raw(&v, 4);
  }
  void u64(std::uint64_t v) {
    v = io::detail::toLittle(v);
    raw(&v, 8);
  }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  void raw(void* p, std::size_t n) {
    if (n > bytes_.size() - pos_) fail(ErrorKind::MalformedFile, origin_ + ": truncated checkpoint");
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return io::detail::toLittle(v);
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return io::detail::toLittle(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<char> serializeCheckpoint(Model<T>& model) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(model.config().describe());
  const ParamList<T> params = model.params();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Param<T>* p : params) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->shape.size()));
    for (int e : p->shape) w.u32(static_cast<std::uint32_t>(e));
    w.u64(static_cast<std::uint64_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) w.f64(static_cast<double>(p->value.data()[i]));
  }
  return w.bytes();
}

template <typename T>
void saveCheckpoint(const std::filesystem::path& path, Model<T>& model) {
  io::detail::writeBytes(path, serializeCheckpoint(model));
}

/// Rebuilds the model from the echoed config, then overwrites every tensor.
template <typename T>
Model<T> deserializeCheckpoint(const std::vector<char>& bytes, const std::string& origin = "<checkpoint>") {
  detail::ByteReader r(bytes, origin);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    fail(ErrorKind::MalformedFile, origin + ": not a seqmos checkpoint");
  if (const std::uint32_t v = r.u32(); v != kCheckpointVersion)
    fail(ErrorKind::MalformedFile, origin + ": unsupported checkpoint version " + std::to_string(v));
  const RunConfig cfg = RunConfig::fromText(r.str(), origin);
  Model<T> model(modelFromConfig(cfg));
  const ParamList<T> params = model.params();
  const std::uint32_t count = r.u32();
  if (count != params.size())
    fail(ErrorKind::MalformedFile, origin + ": tensor count " + std::to_string(count) +
                                       " does not match the architecture (" +
                                       std::to_string(params.size()) + ")");
  for (Param<T>* p : params) {
    const std::string name = r.str();
    if (name != p->name) fail(ErrorKind::MalformedFile, origin + ": expected tensor " + p->name + ", found " + name);
    std::vector<int> shape(r.u32());
    for (int& e : shape) e = static_cast<int>(r.u32());
    if (shape != p->shape) fail(ErrorKind::MalformedFile, origin + ": shape of " + name + " differs");
    if (r.u64() != static_cast<std::uint64_t>(p->value.size()))
      fail(ErrorKind::MalformedFile, origin + ": element count of " + name);
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double d = r.f64();
      if (!std::isfinite(d)) fail(ErrorKind::NonFiniteValue, origin + ": non-finite value in " + name);
      p->value.data()[i] = static_cast<T>(d);
    }
  }
  if (!r.done()) fail(ErrorKind::MalformedFile, origin + ": trailing bytes");
  return model;
}

template <typename T>
Model<T> loadCheckpoint(const std::filesystem::path& path) {
  return deserializeCheckpoint<T>(io::detail::readBytes(path), path.string());
}

}  // namespace nn
}  // namespace seqmos

#endif  // SEQMOS_NN_CHECKPOINT_HPP
