#pragma once

#include <cstdint>
#include <string>

#include "rgbpose/synth.hpp"

namespace rgbpose::run {

/// Flat key = value run configuration. Every key is documented in the README;
/// unknown keys are rejected at parse time.
struct RunConfig {
  // model
  int dim = 32;
  int patch_size = 4;
  int image_size = 64;
  int n_prior = 128;
  int geom_hidden = 32;
  int point_hidden = 32;
  int point_feat = 32;
  int a_hidden = 64;
  int d_hidden = 32;
  int s_hidden = 32;
  std::string fusion_mode = "attention";  // attention | concat
  std::string scale_mode = "residual";    // residual | direct

  // losses
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double lambda3 = 100.0;
  double entropy_weight = 1e-3;
  double deform_weight = 1e-2;
  double smooth_l1_beta = 0.1;
  bool scale_loss_l2 = false;

  // training
  int batch_size = 16;
  int epochs = 120;
  double learning_rate = 1e-3;
  int checkpoint_every = 20;
  uint64_t seed = 1;
  int workers = 0;

  // dataset generation
  int train_per_category = 100;
  int test_per_category = 20;
  int n_model_points = 4096;
  int n_render_points = 24576;
  int prior_instances = 16;
  double depth_rel_min = 3.0;
  double depth_rel_max = 3.6;
  double scale_jitter = 0.4;
  double center_jitter = 0.08;
  double focal_factor = 2.0;
  bool noise_augment = false;
  double noise_sigma = 0.02;
  double s_b_bottle = 0.25;
  double s_b_bowl = 0.20;
  double s_b_camera = 0.18;
  double s_b_can = 0.15;
  double s_b_laptop = 0.40;
  double s_b_mug = 0.12;

  // solver
  int ransac_max_iterations = 500;
  double ransac_threshold_px = 1.0;
  double ransac_confidence = 0.999;
  int ransac_min_inliers = 6;
  int ransac_refine_iterations = 10;

  // evaluation
  int iou_grid = 40;
};

/// Parses a config file over the defaults. Unknown keys and malformed values
/// raise ConfigError naming the key.
RunConfig load_config(const std::string& path);
/// Applies "key = value" text (same grammar as the file) over cfg.
void apply_config_line(RunConfig& cfg, const std::string& line);
/// Field-level validation; throws ConfigError on the first bad field.
void validate(const RunConfig& cfg);
/// Canonical key = value serialization (checkpoint snapshot).
std::string serialize(const RunConfig& cfg);
/// Parses a serialized snapshot (all keys known).
RunConfig deserialize_config(const std::string& text);

synth::GenConfig gen_config(const RunConfig& cfg);

}  // namespace rgbpose::run
