#pragma once

#include <ostream>
#include <string>

#include "rgbpose/checkpoint.hpp"
#include "rgbpose/dataset.hpp"
#include "rgbpose/losses.hpp"

namespace rgbpose::run {

struct StepLoss {
  long step = 0;
  int epoch = 0;
  double L_s = 0, L_corr = 0, L_g = 0, reg = 0, total = 0;
};

/// Builds the per-sample training loss graph (forward must have ok=true).
loss::LossBreakdown sample_loss(const net::Model& model, const net::ForwardOutputs& fwd,
                                const synth::SceneSample& sample, double s_b);

struct TrainOptions {
  std::string out_dir;
  int epochs = -1;  // overrides cfg.epochs when >= 0
};

/// Seeded shuffling, batched steps, Adam updates, one log line per step.
/// Writes ckpt_<epoch>.ckpt every cfg.checkpoint_every epochs and
/// ckpt_final.ckpt at the end. Aborts with a diagnostic naming the first
/// non-finite tensor if the loss goes NaN. Pass a loaded TrainState to
/// resume; the continuation is bit-identical to an uninterrupted run.
TrainState train(net::Model& model, const synth::DatasetReader& data,
                 const TrainOptions& opts, std::ostream& log,
                 const TrainState* resume = nullptr);

}  // namespace rgbpose::run
