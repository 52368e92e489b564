#pragma once

#include <array>
#include <string>
#include <vector>

#include "rgbpose/model.hpp"

namespace rgbpose::run {

/// Adam with bias correction. Moment buffers align with the trainable
/// parameter order of the store.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m, v;

  void init(const net::ParamStore& params);
  void step(net::ParamStore& params);
};

struct TrainState {
  int epoch = 0;   // completed epochs
  long step = 0;   // completed optimizer steps
  std::array<uint64_t, 4> rng_state{};
  AdamState adam;
};

/// Single file: text header (format, counters, rng, config snapshot, named
/// tensor table with payload offsets) followed by a raw little-endian f64
/// payload. Offsets are relative to the payload start.
void save_checkpoint(const std::string& path, const net::Model& model,
                     const TrainState& state);

struct LoadedCheckpoint {
  net::Model model;
  TrainState state;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace rgbpose::run
