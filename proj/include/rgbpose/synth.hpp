#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgbpose/geometry.hpp"
#include "rgbpose/rng.hpp"

namespace rgbpose::synth {

enum class Split { Train, Test };

struct ParamRange {
  std::string name;
  double lo = 0, hi = 0;
};

/// One of the six object families. s_b is the category benchmark scale in
/// meters (NOCS diagonal of a typical instance); symmetric marks continuous
/// rotational symmetry about the vertical NOCS axis.
struct CategorySpec {
  int id = -1;
  std::string name;
  double s_b = 0.0;
  bool symmetric = false;
  std::vector<ParamRange> params;
};

std::vector<CategorySpec> default_categories();
const CategorySpec& category_by_name(const std::vector<CategorySpec>& cats,
                                     const std::string& name);

struct ShapeModel {
  geom::Points points;      // NOCS frame: tight box centered at origin, diagonal 1
  geom::Vec3 extents;       // tight box side lengths, ||extents|| == 1
};

/// Deterministic parametric surface sampling. Instances drawn for Train and
/// Test use disjoint sub-ranges of every shape parameter. Point layout is a
/// function of (family, n_points) only, so same-category instances are
/// index-aligned for prior averaging.
ShapeModel make_shape(const CategorySpec& spec, uint64_t seed, int n_points, Split split);

/// Angular sample count the lathed families use for a given point budget
/// (exposed so tests can bound the sampling resolution).
int lathe_angular_samples(int n_points);

/// Category mean shape over `instances` train-range shapes, farthest-point
/// subsampled to n_prior points and renormalized to unit diagonal.
geom::Points make_prior(const CategorySpec& spec, uint64_t seed, int instances,
                        int n_prior, int n_points);

geom::Points farthest_point_subsample(const geom::Points& points, int count);

struct SceneSample {
  int category = -1;
  int width = 0, height = 0;
  std::vector<double> image;     // H*W*3, row-major, [0,1]
  std::vector<uint8_t> mask;     // H*W, 1 = foreground
  std::vector<double> nocs_map;  // H*W*3, NaN on background
  geom::Intrinsics K;
  geom::Pose pose;               // ground truth
  geom::Vec3 extents;            // instance NOCS tight box
  geom::Points model_points;     // stored instance model (subsample of render cloud)
  geom::Points prior;            // category prior, n_prior points
  uint64_t sample_seed = 0;
};

/// Point-splat z-buffer rasterization; fills image/mask/nocs_map. Each splat
/// lands only on the pixel containing its projection, so every foreground
/// pixel's NOCS entry reprojects into that pixel. Throws GenerationError if
/// any point is behind the camera.
void render_scene(const geom::Points& model_points, const geom::Pose& pose,
                  const geom::Intrinsics& K, int height, int width,
                  std::vector<double>& image, std::vector<uint8_t>& mask,
                  std::vector<double>& nocs_map);

struct GenConfig {
  int image_size = 64;
  int n_prior = 128;
  int n_model_points = 4096;
  int n_render_points = 24576;
  int prior_instances = 16;
  int train_per_category = 100;
  int test_per_category = 20;
  double depth_rel_min = 3.0;   // t_z sampled in s_b * [depth_rel_min, depth_rel_max]
  double depth_rel_max = 3.6;
  double scale_jitter = 0.4;    // s = s_b * (1 + U(-jitter, jitter))
  double center_jitter = 0.08;  // image-plane offset, fraction of image size
  double focal_factor = 2.0;    // fx = fy = focal_factor * image_size
  bool noise_augment = false;
  double noise_sigma = 0.02;
  std::vector<CategorySpec> categories = default_categories();
};

geom::Intrinsics intrinsics_for(const GenConfig& cfg);

/// Generates the full sample for (split, category, index) deterministically
/// from the dataset seed. prior is the category prior (shared).
SceneSample sample_scene(const GenConfig& cfg, const CategorySpec& spec,
                         const geom::Points& prior, uint64_t dataset_seed,
                         Split split, int index);

}  // namespace rgbpose::synth
