#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgbpose/dataset.hpp"
#include "rgbpose/model.hpp"
#include "rgbpose/solver.hpp"

namespace rgbpose::eval {

struct PredictedPose {
  geom::Pose pose;
  geom::Vec3 extents = geom::Vec3::Zero();  // NOCS tight box of the predicted model
};

struct SampleScore {
  bool failure = false;  // PnP miss; all metrics false
  bool iou50 = false, iou75 = false, cm10 = false, deg10 = false, deg10cm10 = false;
  double rot_deg = 0, trans_m = 0, iou = 0;
};

/// Thresholds: IoU >= 0.5 / 0.75, rotation < 10 deg, translation < 0.10 m;
/// the combined metric requires both. A missing prediction scores all-false.
SampleScore score_sample(const std::optional<PredictedPose>& pred, const geom::Pose& gt,
                         const geom::Vec3& gt_extents, geom::Symmetry sym, int iou_grid = 40);

struct CategoryScore {
  std::string name;
  int samples = 0, failures = 0;
  long iou50 = 0, iou75 = 0, cm10 = 0, deg10 = 0, deg10cm10 = 0;
  double rate_iou50() const { return samples ? double(iou50) / samples : 0.0; }
  double rate_iou75() const { return samples ? double(iou75) / samples : 0.0; }
  double rate_cm10() const { return samples ? double(cm10) / samples : 0.0; }
  double rate_deg10() const { return samples ? double(deg10) / samples : 0.0; }
  double rate_both() const { return samples ? double(deg10cm10) / samples : 0.0; }
};

struct MetricReport {
  std::vector<CategoryScore> per_category;
  int samples = 0, failures = 0;
  // class-balanced means over categories with samples
  double iou50 = 0, iou75 = 0, cm10 = 0, deg10 = 0, deg10cm10 = 0;
  void finalize();
};

struct EvalOptions {
  bool oracle = false;  // ground-truth correspondences instead of the network
  int oracle_patch = 0;  // token geometry for oracle mode (0: model's patch, else 8)
  int workers = 0;
  uint64_t seed = 1;  // per-sample RANSAC seeds derive from this and the index
  pnp::RansacConfig ransac;
  int iou_grid = 40;
};

/// Runs inference + RANSAC-PnP over a split and aggregates hit rates.
/// model may be null only in oracle mode. Throws ConfigError before any
/// inference when the checkpoint and dataset are incompatible.
MetricReport evaluate(const net::Model* model, const synth::DatasetReader& data,
                      synth::Split split, const EvalOptions& opts);

std::string format_report(const MetricReport& r);
MetricReport parse_report(const std::string& text);

/// Ablation table in the metric column order IoU50, IoU75, 10cm, 10deg,
/// 10deg10cm: one row per run plus delta rows against the first run.
std::string compare_runs(const std::vector<std::pair<std::string, MetricReport>>& runs);

struct ChanceBaseline {
  double mean = 0;    // class-balanced chance rate of the 10deg metric
  double stddev = 0;  // Monte-Carlo standard error of the mean
};

/// Uniform random rotations scored against the split's ground truth.
ChanceBaseline random_pose_deg10_baseline(const synth::DatasetReader& data,
                                          synth::Split split, int trials_per_category,
                                          uint64_t seed);

}  // namespace rgbpose::eval
