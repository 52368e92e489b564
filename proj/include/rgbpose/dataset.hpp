#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgbpose/synth.hpp"

namespace rgbpose::synth {

/// Per-sample record as stored in the manifest. Offsets index the payload.
struct SampleMeta {
  Split split = Split::Train;
  int index = 0;
  int category = 0;
  uint64_t seed = 0;
  long n_model = 0;
  uint64_t image_off = 0, mask_off = 0, nocs_off = 0, model_off = 0;
  geom::Intrinsics K;
  geom::Pose pose;
  geom::Vec3 extents = geom::Vec3::Zero();
};

struct GenSummary {
  std::vector<std::string> category_names;
  std::vector<double> s_b;
  std::vector<int> train_counts;
  std::vector<int> test_counts;
  uint64_t payload_bytes = 0;
};

/// Writes <out_dir>/manifest.txt and <out_dir>/payload.bin. Sample payload
/// order matches manifest order; identical (config, seed) produce identical
/// bytes regardless of worker count.
GenSummary write_dataset(const GenConfig& cfg, uint64_t seed, const std::string& out_dir,
                         int workers = 0);

class DatasetReader {
 public:
  static DatasetReader open(const std::string& dir);

  const GenConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }
  const std::vector<CategorySpec>& categories() const { return cfg_.categories; }
  const geom::Points& prior(int category) const { return priors_.at(category); }

  int count(Split split) const;
  const SampleMeta& meta(Split split, int index) const;
  SceneSample load(Split split, int index) const;

 private:
  GenConfig cfg_;
  uint64_t seed_ = 0;
  std::vector<geom::Points> priors_;
  std::vector<SampleMeta> train_, test_;
  std::vector<char> payload_;
};

std::string split_name(Split s);
Split split_from_name(const std::string& name);

}  // namespace rgbpose::synth
