// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_LOOPCLOSURE_HPP
#define SEQMOS_LOOPCLOSURE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include <Eigen/Core>

#include "seqmos/error.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

/// Rings x sectors grid of mean point height.
struct ScanContextDesc {
  int rings = 0;
  int sectors = 0;
  Eigen::MatrixXd grid;  // rings x sectors, 0 where empty
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> occupied;
  std::size_t frame_index = 0;
  double timestamp = 0.0;
};

using RingKey = Eigen::VectorXd;

inline int ringOf(double rho, int rings, double rho_max) {
  if (!(rho < rho_max)) return -1;
  return std::min(static_cast<int>(rho / rho_max * rings), rings - 1);
}

inline int sectorOf(double x, double y, int sectors) {
  const double theta = std::atan2(y, x);  // [-pi, pi]
  int s = static_cast<int>((theta + std::numbers::pi) / (2.0 * std::numbers::pi) * sectors);
  return s >= sectors ? s - sectors : s;
}

/**
 * @brief Scan-context descriptor of a scan in its own sensor frame.
 *
 * @param motion_mask optional per-point labels; Moving points are left out
 */
inline ScanContextDesc makeDescriptor(const RawScan& scan, int rings, int sectors, double rho_max,
                                      const MotionLabels* motion_mask = nullptr) {
  if (rings < 1 || sectors < 1) fail(ErrorKind::InvalidArgument, "descriptor needs rings, sectors >= 1");
  if (!(rho_max > 0.0)) fail(ErrorKind::InvalidArgument, "descriptor rho_max must be positive");
  if (motion_mask && motion_mask->size() != scan.size())
    fail(ErrorKind::LengthMismatch, "motion mask length differs from the scan");
  ScanContextDesc d;
  d.rings = rings;
  d.sectors = sectors;
  d.frame_index = scan.frame_index;
  d.grid = Eigen::MatrixXd::Zero(rings, sectors);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(rings, sectors);
  for (std::size_t i = 0; i < scan.size(); ++i) {
    if (motion_mask && (*motion_mask)[i] == MotionLabel::Moving) continue;
    const Point& p = scan.points[i];
    const int r = ringOf(std::hypot(p.x, p.y), rings, rho_max);
    if (r < 0) continue;
    const int s = sectorOf(p.x, p.y, sectors);
    d.grid(r, s) += p.z;
    ++count(r, s);
  }
  d.occupied = count.array() > 0;
  for (int r = 0; r < rings; ++r)
    for (int s = 0; s < sectors; ++s)
      if (count(r, s) > 0) d.grid(r, s) /= count(r, s);
  return d;
}

/// Per-ring mean over occupied sectors; rotation invariant.
inline RingKey ringKey(const ScanContextDesc& d) {
  RingKey key = RingKey::Zero(d.rings);
  for (int r = 0; r < d.rings; ++r) {
    int n = 0;
    for (int s = 0; s < d.sectors; ++s)
      if (d.occupied(r, s)) {
        key[r] += d.grid(r, s);
        ++n;
      }
    if (n > 0) key[r] /= n;
  }
  return key;
}

/// Exact k-nearest-neighbor tree over fixed-dimension keys.
class KdTree {
 public:
  struct Hit {
    std::size_t id;
    double dist;
  };

  void build(const std::vector<RingKey>* keys) {
    keys_ = keys;
    nodes_.clear();
    std::vector<std::size_t> ids(keys->size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    root_ = build(ids, 0, ids.size(), 0);
  }

  /// The k nearest keys with accept(id) true, ascending by distance then id.
  std::vector<Hit> nearest(const RingKey& q, std::size_t k,
                           const std::function<bool(std::size_t)>& accept) const {
    std::priority_queue<std::pair<double, std::size_t>> heap;  // squared distance, id
    if (root_ >= 0 && k > 0) search(root_, q, k, accept, heap);
    std::vector<Hit> out;
    while (!heap.empty()) {
      out.push_back({heap.top().second, std::sqrt(heap.top().first)});
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t id;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::size_t>& ids, std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int dim = static_cast<int>((*keys_)[ids[lo]].size());
    const int axis = dim > 0 ? depth % dim : 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi, [&](std::size_t a, std::size_t b) {
      const double va = dim ? (*keys_)[a][axis] : 0.0;
      const double vb = dim ? (*keys_)[b][axis] : 0.0;
      return va < vb || (va == vb && a < b);
    });
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({ids[mid], axis});
    const int l = build(ids, lo, mid, depth + 1);
    const int r = build(ids, mid + 1, hi, depth + 1);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  void search(int n, const RingKey& q, std::size_t k, const std::function<bool(std::size_t)>& accept,
              std::priority_queue<std::pair<double, std::size_t>>& heap) const {
    const Node& node = nodes_[n];
    const RingKey& key = (*keys_)[node.id];
    if (accept(node.id)) {
      const std::pair<double, std::size_t> cand{(key - q).squaredNorm(), node.id};
      if (heap.size() < k) heap.push(cand);
      else if (cand < heap.top()) {
        heap.pop();
        heap.push(cand);
      }
    }
    if (key.size() == 0) {
      if (node.left >= 0) search(node.left, q, k, accept, heap);
      if (node.right >= 0) search(node.right, q, k, accept, heap);
      return;
    }
    const double diff = q[node.axis] - key[node.axis];
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    if (near >= 0) search(near, q, k, accept, heap);
    // Ties on the split plane can sit on either side, so <= keeps the search exact.
    if (far >= 0 && (heap.size() < k || diff * diff <= heap.top().first)) search(far, q, k, accept, heap);
  }

  const std::vector<RingKey>* keys_ = nullptr;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Append-only keyframe store with a ring-key index.
class KeyframeDB {
 public:
  void add(ScanContextDesc desc) {
    if (!descs_.empty() && desc.frame_index <= descs_.back().frame_index)
      fail(ErrorKind::InvalidArgument, "keyframes must be added with increasing frame index");
    if (!descs_.empty() && (desc.rings != descs_.front().rings || desc.sectors != descs_.front().sectors))
      fail(ErrorKind::ShapeMismatch, "keyframe descriptor shape differs from the database");
    keys_.push_back(ringKey(desc));
    descs_.push_back(std::move(desc));
    dirty_ = true;
  }

  std::size_t size() const { return descs_.size(); }
  const ScanContextDesc& at(std::size_t i) const { return descs_.at(i); }
  const RingKey& key(std::size_t i) const { return keys_.at(i); }

  struct Candidate {
    std::size_t slot;  // position in the database
    std::size_t frame_index;
    double distance;
  };

  /// Up to k stored frames strictly older than time_gap_min, nearest ring key first.
  std::vector<Candidate> queryCandidates(const ScanContextDesc& query, std::size_t k, double time_gap_min) {
    if (k < 1) fail(ErrorKind::InvalidArgument, "query needs k >= 1");
    if (dirty_) {
      tree_.build(&keys_);
      dirty_ = false;
    }
    const RingKey q = ringKey(query);
    std::vector<Candidate> out;
    if (!descs_.empty() && q.size() != keys_.front().size())
      fail(ErrorKind::ShapeMismatch, "query descriptor shape differs from the database");
    for (const auto& hit : tree_.nearest(q, k, [&](std::size_t id) {
           return query.timestamp - descs_[id].timestamp > time_gap_min;
         }))
      out.push_back({hit.id, descs_[hit.id].frame_index, hit.dist});
    return out;
  }

 private:
  std::vector<ScanContextDesc> descs_;
  std::vector<RingKey> keys_;
  KdTree tree_;
  bool dirty_ = false;
};

struct LoopDecision {
  bool accepted = false;
  int shift = 0;
  double similarity = 0.0;
};

/// Mean cosine between query column j and candidate column j - shift, over
/// columns that are nonzero in both; 0 when no column pair qualifies.
inline double shiftedSimilarity(const ScanContextDesc& query, const ScanContextDesc& cand, int shift) {
  const int S = query.sectors;
  double sum = 0.0;
  int n = 0;
  for (int j = 0; j < S; ++j) {
    const int c = ((j - shift) % S + S) % S;
    const double nq = query.grid.col(j).norm();
    const double nc = cand.grid.col(c).norm();
    if (nq == 0.0 || nc == 0.0) continue;
    sum += query.grid.col(j).dot(cand.grid.col(c)) / (nq * nc);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

/// Best cyclic sector shift; ties keep the smallest shift.
inline LoopDecision verifyLoop(const ScanContextDesc& query, const ScanContextDesc& cand, double accept_threshold) {
  if (query.rings != cand.rings || query.sectors != cand.sectors)
    fail(ErrorKind::ShapeMismatch, "descriptor shapes differ");
  LoopDecision best;
  best.similarity = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < query.sectors; ++s) {
    const double sim = shiftedSimilarity(query, cand, s);
    if (sim > best.similarity) {
      best.similarity = sim;
      best.shift = s;
    }
  }
  best.accepted = best.similarity >= accept_threshold;
  return best;
}

/// Yaw of the query frame relative to the candidate implied by a sector shift.
inline double yawFromShift(int shift, int sectors) {
  return static_cast<double>(shift) * 2.0 * std::numbers::pi / sectors;
}

struct LoopRecord {
  std::size_t query_frame = 0;
  std::size_t match_frame = 0;
  int shift = 0;
  double similarity = 0.0;
  bool accepted = false;
};

struct LoopParams {
  int rings = 20;
  int sectors = 60;
  double rho_max = 40.0;
  std::size_t candidates = 5;
  double time_gap_min = 30.0;
  double accept_threshold = 0.8;
  std::size_t keyframe_every = 5;
  /// Added to z before binning so cell heights are measured from the ground.
  double height_offset = 0.0;
};

/**
 * @brief Runs detection over a whole sequence: every frame queries the
 * keyframes admitted so far, then is admitted itself if it is a keyframe.
 *
 * @param masks per-frame motion labels, or empty for no masking
 */
inline std::vector<LoopRecord> detectLoops(const std::vector<RawScan>& scans, const std::vector<double>& times,
                                           const std::vector<MotionLabels>& masks, const LoopParams& p) {
  if (times.size() != scans.size()) fail(ErrorKind::LengthMismatch, "one timestamp per scan");
  if (!masks.empty() && masks.size() != scans.size()) fail(ErrorKind::LengthMismatch, "one mask per scan");
  if (p.keyframe_every < 1) fail(ErrorKind::ConfigError, "loop.keyframe_every must be >= 1");
  KeyframeDB db;
  std::vector<LoopRecord> out;
  for (std::size_t f = 0; f < scans.size(); ++f) {
    RawScan lifted = scans[f];
    for (Point& pt : lifted.points) pt.z += p.height_offset;
    ScanContextDesc d = makeDescriptor(lifted, p.rings, p.sectors, p.rho_max, masks.empty() ? nullptr : &masks[f]);
    d.frame_index = f;
    d.timestamp = times[f];
    for (const auto& c : db.queryCandidates(d, p.candidates, p.time_gap_min)) {
      const LoopDecision dec = verifyLoop(d, db.at(c.slot), p.accept_threshold);
      out.push_back({f, c.frame_index, dec.shift, dec.similarity, dec.accepted});
    }
    if (f % p.keyframe_every == 0) db.add(std::move(d));
  }
  return out;
}

inline void writeLoopCsv(std::ostream& out, const std::vector<LoopRecord>& loops) {
  out << "query_frame,match_frame,shift,similarity,accepted\n" << std::setprecision(17);
  for (const auto& l : loops)
    out << l.query_frame << ',' << l.match_frame << ',' << l.shift << ',' << l.similarity << ','
        << (l.accepted ? 1 : 0) << '\n';
}

/// Accepted loops as `i j yaw` lines for an external pose-graph optimizer.
inline void writePoseGraphEdges(std::ostream& out, const std::vector<LoopRecord>& loops, int sectors) {
  out << "# query_frame match_frame relative_yaw_rad\n" << std::setprecision(17);
  for (const auto& l : loops)
    if (l.accepted) out << l.query_frame << ' ' << l.match_frame << ' ' << yawFromShift(l.shift, sectors) << '\n';
}

}  // namespace seqmos

#endif  // SEQMOS_LOOPCLOSURE_HPP
