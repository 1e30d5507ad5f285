// seqmos - sequential LiDAR moving object segmentation toolkit
//
// Command-line front end. Every command reads one flat config file (plus flag
// overrides), writes its artifacts under --out and echoes the resolved config
// at the top of each text report.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "seqmos/seqmos.hpp"

namespace fs = std::filesystem;
using namespace seqmos;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  long seed = -1;
  long threads = -1;
  std::string out = ".";
  std::vector<std::string> sequences;
  std::string pred;
  std::string checkpoint;
  bool no_mask = false;
  long count = 1;
};

struct Command {
  std::string name;
  std::string summary;
  std::vector<std::string> key_prefixes;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"synth-gen", "render synthetic sequences in the KITTI layout", {"seed", "synth."}},
      {"baseline-diff", "non-learned spatial-difference segmentation",
       {"seed", "threads", "data.", "baseline."}},
      {"train", "train the segmentation network",
       {"seed", "threads", "data.", "grid.", "model.", "loss.", "train."}},
      {"segment", "segment sequences with a trained checkpoint", {"threads", "data.", "grid."}},
      {"eval-mos", "moving-object IoU of predicted labels", {"data.", "eval."}},
      {"eval-odom", "scan-matching odometry with and without moving points", {"data.", "odom."}},
      {"loopclose", "scan-context loop detection with motion masking", {"data.", "loop."}},
      {"clean-map", "aggregate a world map and remove moving points", {"data.", "map."}},
  };
  return list;
}

bool readsKey(const Command& c, const std::string& key) {
  for (const auto& p : c.key_prefixes) {
    if (p.back() == '.' ? key.rfind(p, 0) == 0 : key == p) return true;
  }
  return false;
}

std::string exitCodeTable() {
  std::ostringstream ss;
  ss << "Exit codes:\n  0  success\n  " << kUsageExit << "  usage error\n  " << kInternalExit
     << "  internal error\n";
  for (int k = 0; k <= static_cast<int>(ErrorKind::ConfigError); ++k) {
    const auto kind = static_cast<ErrorKind>(k);
    ss << "  " << exitCode(kind) << " " << errorKindName(kind) << "\n";
  }
  return ss.str();
}

std::string commandFooter(const Command& c) {
  std::ostringstream ss;
  ss << "\nConfig keys read (key = default):\n";
  for (const auto& k : configKeys())
    if (readsKey(c, k.name)) ss << "  " << std::left << std::setw(28) << k.name << " = " << k.default_value << "  " << k.help << "\n";
  ss << "\n" << exitCodeTable();
  return ss.str();
}

RunConfig resolveConfig(const CommonArgs& a) {
  RunConfig cfg = a.config_path.empty() ? RunConfig() : RunConfig::fromFile(a.config_path);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::ConfigError, "--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(RunConfig::trim(kv.substr(0, eq)), RunConfig::trim(kv.substr(eq + 1)));
  }
  if (a.seed >= 0) cfg.set("seed", std::to_string(a.seed));
  if (a.threads >= 0) cfg.set("threads", std::to_string(a.threads));
  if (cfg.integer("threads") < 1) fail(ErrorKind::ConfigError, "threads must be >= 1");
  if (cfg.integer("seed") < 0) fail(ErrorKind::ConfigError, "seed must be >= 0");
  return cfg;
}

std::string header(const std::string& command, const RunConfig& cfg) {
  return "# seqmos " + command + "\n" + cfg.dump("# ");
}

std::ofstream openReport(const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

std::string sequenceName(const std::string& arg) {
  fs::path p = fs::path(arg).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

LabeledSequence loadSeq(const RunConfig& cfg, const std::string& dir, bool require_labels) {
  if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "sequence directory " + dir + " does not exist");
  LabeledSequence s = loadSequence(sequenceFromConfig(cfg, dir), require_labels);
  s.name = sequenceName(dir);
  return s;
}

std::vector<double> loadTimes(const RunConfig& cfg, const std::string& dir, std::size_t frames) {
  const fs::path p = fs::path(dir) / "times.txt";
  if (fs::exists(p)) {
    std::vector<double> t = io::readTimes(p);
    if (t.size() != frames)
      fail(ErrorKind::LengthMismatch, p.string() + ": " + std::to_string(t.size()) + " times for " +
                                          std::to_string(frames) + " scans");
    return t;
  }
  const double rate = cfg.num("data.frame_rate");
  if (!(rate > 0.0)) fail(ErrorKind::ConfigError, "data.frame_rate must be positive");
  std::vector<double> t(frames);
  for (std::size_t i = 0; i < frames; ++i) t[i] = static_cast<double>(i) / rate;
  return t;
}

/// Prediction directory of one sequence: <pred>/<name>, or <pred> itself for a single sequence.
fs::path predictionDir(const std::string& pred, const std::string& name, std::size_t num_sequences) {
  const fs::path nested = fs::path(pred) / name;
  if (fs::is_directory(nested)) return nested;
  if (num_sequences == 1 && fs::is_directory(pred)) return pred;
  fail(ErrorKind::IoError, "no predictions for " + name + " under " + pred);
}

std::vector<MotionLabels> loadPredictions(const fs::path& dir, const LabeledSequence& seq) {
  const auto files = io::listFiles(dir, ".label");
  if (files.size() != seq.size())
    fail(ErrorKind::LengthMismatch, dir.string() + ": " + std::to_string(files.size()) + " label files for " +
                                        std::to_string(seq.size()) + " scans");
  std::vector<MotionLabels> out;
  for (std::size_t f = 0; f < files.size(); ++f) {
    out.push_back(io::decodePredictions(io::readLabels(files[f])));
    if (out.back().size() != seq.scans[f].size())
      fail(ErrorKind::LengthMismatch, files[f].string() + ": label count differs from the scan");
  }
  return out;
}

/// Motion masks from predictions when given, else ground truth, else none.
std::vector<MotionLabels> motionMasks(const CommonArgs& a, const LabeledSequence& seq, std::string& source) {
  if (a.no_mask) {
    source = "none";
    return {};
  }
  if (!a.pred.empty()) {
    source = "predictions";
    return loadPredictions(predictionDir(a.pred, seq.name, a.sequences.size()), seq);
  }
  if (!seq.labels.empty()) {
    source = "ground-truth";
    return seq.labels;
  }
  source = "none";
  return {};
}

void writeLabelDir(const fs::path& dir, const std::vector<MotionLabels>& labels) {
  fs::create_directories(dir);
  for (std::size_t f = 0; f < labels.size(); ++f)
    io::writeLabels(dir / io::frameName(f, ".label"), io::encodePredictions(labels[f]));
}

/// Runs fn(frame, worker) over [0, n) on up to `threads` workers with a static split.
template <typename Fn>
void parallelFrames(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t f = 0; f < n; ++f) fn(f, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t f = w; f < n; f += threads) fn(f, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void writeConfusion(std::ostream& out, const std::string& name, const ConfusionCounts& cc) {
  out << name << ',' << cc.tp[0] << ',' << cc.fp[0] << ',' << cc.fn[0] << ',' << cc.tp[1] << ',' << cc.fp[1] << ','
      << cc.fn[1] << ',' << std::setprecision(9) << iou(cc, 0) << ',' << movingIou(cc) << ',' << miou(cc) << '\n';
}

// ---------------------------------------------------------------------------

int cmdSynthGen(const CommonArgs& a, const RunConfig& cfg) {
  if (a.count < 1) fail(ErrorKind::ConfigError, "--count must be >= 1");
  const std::string scenario = cfg.str("synth.scenario");
  const long frames = cfg.integer("synth.frames");
  if (frames < 1) fail(ErrorKind::ConfigError, "synth.frames must be >= 1");
  const double noise = cfg.num("synth.range_noise");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  for (long i = 0; i < a.count; ++i) {
    synth::SynthSceneSpec spec = synth::sceneByName(scenario, seed + static_cast<std::uint64_t>(i),
                                                    static_cast<std::size_t>(frames));
    spec.sensor.range_noise = noise;
    const synth::SynthSequence seq = synth::generateSequence(spec, static_cast<std::size_t>(frames));
    std::ostringstream name;
    name << std::setw(2) << std::setfill('0') << i;
    const fs::path dir = a.count == 1 ? fs::path(a.out) : fs::path(a.out) / name.str();
    synth::writeSequence(seq, dir);
    std::ofstream info = openReport(dir / "synth_info.txt");
    info << header("synth-gen", cfg) << "scenario " << scenario << "\nseed " << seed + static_cast<std::uint64_t>(i)
         << "\nframes " << seq.size() << "\nactors " << seq.spec.actors.size() << "\n";
    std::cout << "wrote " << dir.string() << " (" << seq.size() << " frames)\n";
  }
  return 0;
}

int cmdBaselineDiff(const CommonArgs& a, const RunConfig& cfg) {
  const SpatialDiffParams params = baselineFromConfig(cfg);
  const long frames = cfg.integer("baseline.frames");
  if (frames < 1) fail(ErrorKind::ConfigError, "baseline.frames must be >= 1");
  const auto threads = static_cast<std::size_t>(cfg.integer("threads"));
  std::ofstream report = openReport(fs::path(a.out) / "baseline_report.txt");
  report << header("baseline-diff", cfg)
         << "sequence,static_tp,static_fp,static_fn,moving_tp,moving_fp,moving_fn,static_iou,moving_iou,miou\n";
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, false);
    std::vector<MotionLabels> pred(seq.size());
    parallelFrames(seq.size(), threads, [&](std::size_t t, std::size_t) {
      pred[t] = spatialDiffBaseline(clampedResidualStack(seq, t, static_cast<std::size_t>(frames)), params);
    });
    writeLabelDir(fs::path(a.out) / seq.name, pred);
    if (!seq.labels.empty()) {
      ConfusionCounts cc;
      for (std::size_t t = 0; t < seq.size(); ++t) cc += confusion(pred[t], seq.labels[t]);
      writeConfusion(report, seq.name, cc);
    }
    std::cout << seq.name << ": " << seq.size() << " frames segmented\n";
  }
  return 0;
}

int cmdTrain(const CommonArgs& a, const RunConfig& cfg) {
  const TrainOptions opt = trainFromConfig(cfg);
  nn::Model<float> model(modelFromConfig(cfg));
  std::vector<LabeledSequence> data;
  for (const auto& dir : a.sequences) data.push_back(loadSeq(cfg, dir, true));
  fs::create_directories(a.out);
  std::ofstream log = openReport(fs::path(a.out) / "train_log.csv");
  log << header("train", cfg);
  writeEpochCsvHeader(log);
  train(model, data, opt, [&](const EpochStats& s) {
    writeEpochCsvRow(log, s);
    log.flush();
    std::cout << "epoch " << s.epoch << " loss " << s.total_loss << " moving_iou " << s.moving_iou << std::endl;
  });
  nn::saveCheckpoint(fs::path(a.out) / "model.ckpt", model);
  std::cout << "wrote " << (fs::path(a.out) / "model.ckpt").string() << "\n";
  return 0;
}

int cmdSegment(const CommonArgs& a, const RunConfig& cfg) {
  if (a.checkpoint.empty()) fail(ErrorKind::ConfigError, "segment needs --checkpoint");
  const CylindricalGridSpec grid = gridFromConfig(cfg);
  const std::vector<char> bytes = io::detail::readBytes(a.checkpoint);
  const auto threads = static_cast<std::size_t>(cfg.integer("threads"));
  std::vector<nn::Model<float>> models;
  for (std::size_t w = 0; w < threads; ++w) models.push_back(nn::deserializeCheckpoint<float>(bytes, a.checkpoint));
  nn::ModelConfig::checkGrid(grid.bins);
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, false);
    std::vector<MotionLabels> pred(seq.size());
    parallelFrames(seq.size(), threads,
                   [&](std::size_t t, std::size_t w) { pred[t] = segmentFrame(models[w], seq, t, grid); });
    writeLabelDir(fs::path(a.out) / seq.name, pred);
    std::cout << seq.name << ": " << seq.size() << " frames segmented\n";
  }
  return 0;
}

int cmdEvalMos(const CommonArgs& a, const RunConfig& cfg) {
  if (a.pred.empty()) fail(ErrorKind::ConfigError, "eval-mos needs --pred");
  const long first = cfg.integer("eval.first_frame");
  if (first < 0) fail(ErrorKind::ConfigError, "eval.first_frame must be >= 0");
  fs::create_directories(a.out);
  std::ofstream report = openReport(fs::path(a.out) / "mos_report.txt");
  report << header("eval-mos", cfg)
         << "sequence,static_tp,static_fp,static_fn,moving_tp,moving_fp,moving_fn,static_iou,moving_iou,miou\n";
  ConfusionCounts total;
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, true);
    const std::vector<MotionLabels> pred = loadPredictions(predictionDir(a.pred, seq.name, a.sequences.size()), seq);
    ConfusionCounts cc;
    for (std::size_t t = static_cast<std::size_t>(first); t < seq.size(); ++t) cc += confusion(pred[t], seq.labels[t]);
    writeConfusion(report, seq.name, cc);
    total += cc;
  }
  writeConfusion(report, "total", total);
  std::cout << "moving IoU " << formatPercent(movingIou(total)) << "  mIoU " << formatPercent(miou(total)) << "\n";
  return 0;
}

int cmdEvalOdom(const CommonArgs& a, const RunConfig& cfg) {
  const IcpParams icp = odomFromConfig(cfg);
  fs::create_directories(a.out);
  std::ofstream report = openReport(fs::path(a.out) / "odom_report.txt");
  report << header("eval-odom", cfg) << "sequence,mask,ate_raw_m,ate_filtered_m,drift_raw_percent,drift_filtered_percent\n";
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, false);
    const std::vector<PoseSE3> gt = io::readSequencePoses(fs::path(dir) / "poses.txt");
    std::string source;
    const std::vector<MotionLabels> masks = motionMasks(a, seq, source);
    const std::vector<PoseSE3> raw = runOdometry(seq.scans, {}, gt.front(), icp);
    const std::vector<PoseSE3> filtered = runOdometry(seq.scans, masks, gt.front(), icp);
    const fs::path out_dir = fs::path(a.out) / seq.name;
    fs::create_directories(out_dir);
    io::writePoses(out_dir / "poses_raw.txt", raw);
    io::writePoses(out_dir / "poses_filtered.txt", filtered);
    const double ate_raw = ate({gt, raw}), ate_filt = ate({gt, filtered});
    const Drift d_raw = drift({gt, raw}), d_filt = drift({gt, filtered});
    report << seq.name << ',' << source << ',' << std::setprecision(9) << ate_raw << ',' << ate_filt << ','
           << d_raw.dr_percent << ',' << d_filt.dr_percent << '\n';
    std::cout << seq.name << ": ATE raw " << ate_raw << " m, filtered (" << source << ") " << ate_filt << " m\n";
  }
  return 0;
}

int cmdLoopclose(const CommonArgs& a, const RunConfig& cfg) {
  const LoopParams params = loopFromConfig(cfg);
  const double radius = cfg.num("loop.revisit_radius");
  fs::create_directories(a.out);
  std::ofstream report = openReport(fs::path(a.out) / "loop_report.txt");
  report << header("loopclose", cfg) << "sequence,mask,candidates,accepted,true_accepted,f1_max\n";
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, false);
    std::string source;
    const std::vector<MotionLabels> masks = motionMasks(a, seq, source);
    const std::vector<LoopRecord> loops = detectLoops(seq.scans, loadTimes(cfg, dir, seq.size()), masks, params);
    const fs::path out_dir = fs::path(a.out) / seq.name;
    fs::create_directories(out_dir);
    {
      std::ofstream csv = openReport(out_dir / "loops.csv");
      csv << header("loopclose", cfg);
      writeLoopCsv(csv, loops);
      std::ofstream edges = openReport(out_dir / "loop_edges.txt");
      edges << header("loopclose", cfg);
      writePoseGraphEdges(edges, loops, params.sectors);
    }
    // Pairs closer than the revisit radius in the reference trajectory count as true loops.
    const std::vector<PoseSE3> gt = io::readSequencePoses(fs::path(dir) / "poses.txt");
    std::vector<double> scores;
    std::vector<bool> truth;
    std::size_t accepted = 0, true_accepted = 0;
    for (const auto& l : loops) {
      const bool near = (gt[l.query_frame].translation() - gt[l.match_frame].translation()).norm() <= radius;
      scores.push_back(l.similarity);
      truth.push_back(near);
      accepted += l.accepted;
      true_accepted += l.accepted && near;
    }
    std::string f1 = "nan";
    if (std::count(truth.begin(), truth.end(), true) > 0) {
      const PRCurve curve = prCurve(scores, truth);
      std::ostringstream ss;
      ss << std::setprecision(9) << f1Max(curve);
      f1 = ss.str();
      std::ofstream pr = openReport(out_dir / "loop_pr.csv");
      pr << header("loopclose", cfg);
      writePrCsv(pr, curve);
      std::ofstream plot = openReport(out_dir / "loop_pr.dat");
      plot << header("loopclose", cfg);
      writePrPlot(plot, curve);
    }
    report << seq.name << ',' << source << ',' << loops.size() << ',' << accepted << ',' << true_accepted << ',' << f1
           << '\n';
    std::cout << seq.name << ": " << accepted << " loops accepted of " << loops.size() << " candidates\n";
  }
  return 0;
}

int cmdCleanMap(const CommonArgs& a, const RunConfig& cfg) {
  const double leaf = cfg.num("map.voxel_leaf");
  fs::create_directories(a.out);
  std::ofstream report = openReport(fs::path(a.out) / "map_report.txt");
  report << header("clean-map", cfg) << "sequence,mask,points_raw,points_clean,true_moving,residual_moving\n";
  for (const auto& dir : a.sequences) {
    const LabeledSequence seq = loadSeq(cfg, dir, false);
    std::string source;
    std::vector<MotionLabels> masks = motionMasks(a, seq, source);
    if (masks.empty())
      for (const auto& s : seq.scans) masks.emplace_back(s.size(), MotionLabel::Static);
    const std::vector<PoseSE3> world = io::readSequencePoses(fs::path(dir) / "poses.txt");
    const GlobalMap raw = aggregateMap(seq.scans, world, masks);
    const GlobalMap clean = filterMoving(raw);
    const fs::path out_dir = fs::path(a.out) / seq.name;
    fs::create_directories(out_dir);
    exportMap(voxelDownsample(raw, leaf), out_dir / "map_raw");
    exportMap(voxelDownsample(clean, leaf), out_dir / "map_clean");
    std::string true_moving = "nan", residual = "nan";
    if (!seq.labels.empty()) {
      std::size_t n = 0;
      for (const auto& l : seq.labels) n += static_cast<std::size_t>(std::count(l.begin(), l.end(), MotionLabel::Moving));
      true_moving = std::to_string(n);
      residual = std::to_string(residualMovingCount(clean, seq.labels));
    }
    report << seq.name << ',' << source << ',' << raw.size() << ',' << clean.size() << ',' << true_moving << ','
           << residual << '\n';
    std::cout << seq.name << ": " << raw.size() << " -> " << clean.size() << " points\n";
  }
  return 0;
}

void printError(int code, const std::string& kind, std::string msg) {
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::cerr << "seqmos: error kind=" << kind << " exit=" << code << " message=" << msg << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqmos - sequential LiDAR moving object segmentation toolkit"};
  app.require_subcommand(1);
  app.footer("\n" + exitCodeTable());
  CommonArgs args;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& c : commands()) {
    CLI::App* sub = app.add_subcommand(c.name, c.summary);
    sub->add_option("--config", args.config_path, "config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--set", args.overrides, "override one config key, KEY=VALUE (repeatable)");
    sub->add_option("--seed", args.seed, "overrides the seed key");
    sub->add_option("--threads", args.threads, "overrides the threads key");
    sub->add_option("--out", args.out, "output directory")->capture_default_str();
    if (c.name == "synth-gen") {
      sub->add_option("--count", args.count, "number of sequences (seeds seed, seed+1, ...)");
    } else {
      sub->add_option("sequences", args.sequences, "sequence directories (velodyne/, labels/, poses.txt)")
          ->required();
    }
    if (c.name == "segment") sub->add_option("--checkpoint", args.checkpoint, "trained model")->required();
    if (c.name == "eval-mos") sub->add_option("--pred", args.pred, "prediction root")->required();
    if (c.name == "eval-odom" || c.name == "loopclose" || c.name == "clean-map") {
      sub->add_option("--pred", args.pred, "prediction root used as motion mask (default: ground-truth labels)");
      sub->add_flag("--no-mask", args.no_mask, "keep moving points");
    }
    sub->footer(commandFooter(c));
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    printError(kUsageExit, "UsageError", e.what());
    return kUsageExit;
  }

  try {
    for (const auto& [sub, cmd] : subs) {
      if (!sub->parsed()) continue;
      const RunConfig cfg = resolveConfig(args);
      fs::create_directories(args.out);
      const std::string& n = cmd->name;
      if (n == "synth-gen") return cmdSynthGen(args, cfg);
      if (n == "baseline-diff") return cmdBaselineDiff(args, cfg);
      if (n == "train") return cmdTrain(args, cfg);
      if (n == "segment") return cmdSegment(args, cfg);
      if (n == "eval-mos") return cmdEvalMos(args, cfg);
      if (n == "eval-odom") return cmdEvalOdom(args, cfg);
      if (n == "loopclose") return cmdLoopclose(args, cfg);
      if (n == "clean-map") return cmdCleanMap(args, cfg);
    }
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string prefix = std::string(errorKindName(e.kind())) + ": ";
    printError(exitCode(e.kind()), std::string(errorKindName(e.kind())),
               what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what);
    return exitCode(e.kind());
  } catch (const std::exception& e) {
    printError(kInternalExit, "Internal", e.what());
    return kInternalExit;
  }
  return kUsageExit;
}
