#include "rgbpose/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

namespace rgbpose::run {

using diff::Tensor;

loss::LossBreakdown sample_loss(const net::Model& model, const net::ForwardOutputs& fwd,
                                const synth::SceneSample& sample, double s_b) {
  const auto& cfg = model.cfg;
  Tensor L_s;
  if (model.scale_mode == net::ScaleMode::Residual)
    L_s = loss::scale_loss(fwd.scale.delta, sample.pose.s, s_b, cfg.scale_loss_l2);
  else
    L_s = loss::scale_loss_direct(fwd.scale.delta, sample.pose.s, cfg.scale_loss_l2);

  loss::CorrLoss corr =
      loss::corr_loss(fwd.corr.nocs, fwd.gt_nocs, fwd.assign.logits, fwd.D,
                      cfg.smooth_l1_beta, cfg.entropy_weight, cfg.deform_weight);
  Tensor L_g = loss::guidance_loss(fwd.F_guid, fwd.F_N);
  return loss::total_loss(L_s, corr.main, L_g, corr.reg, cfg.lambda1, cfg.lambda2,
                          cfg.lambda3);
}

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Finds the first tape step whose output holds a non-finite value.
std::string first_nonfinite_op(const diff::Tape& tape) {
  for (const auto& step : tape.steps()) {
    const double* p = step.out.data();
    for (long i = 0; i < step.out.size(); ++i)
      if (!std::isfinite(p[i])) return step.op;
  }
  return "<loss only>";
}

}  // namespace

TrainState train(net::Model& model, const synth::DatasetReader& data,
                 const TrainOptions& opts, std::ostream& log, const TrainState* resume) {
  namespace fs = std::filesystem;
  const auto& cfg = model.cfg;
  const int epochs = opts.epochs >= 0 ? opts.epochs : cfg.epochs;
  if (!opts.out_dir.empty()) fs::create_directories(opts.out_dir);

  const int n_train = data.count(synth::Split::Train);
  if (n_train == 0) throw ConfigError("train: dataset has no training samples");

  // benchmark scales come from the dataset manifest
  std::vector<double> s_b(data.categories().size());
  for (size_t c = 0; c < data.categories().size(); ++c) s_b[c] = data.categories()[c].s_b;

  TrainState state;
  Rng shuffle_rng(derive_seed(cfg.seed, 0x54524149ULL));
  if (resume) {
    state = *resume;
    shuffle_rng.set_state(state.rng_state);
  } else {
    state.adam.lr = cfg.learning_rate;
    state.adam.init(model.params);
  }

  std::vector<int> order(n_train);

  for (int epoch = state.epoch; epoch < epochs; ++epoch) {
    // Fisher-Yates from identity, so a resumed epoch shuffles exactly as the
    // uninterrupted run would
    for (int i = 0; i < n_train; ++i) order[i] = i;
    for (int i = n_train - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }

    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int end = std::min(n_train, start + cfg.batch_size);
      diff::TapeScope scope;

      Tensor total;
      double ls = 0, lc = 0, lg = 0, rg = 0;
      int used = 0;
      for (int bi = start; bi < end; ++bi) {
        const synth::SceneSample sample = data.load(synth::Split::Train, order[bi]);
        net::ForwardOutputs fwd = model.forward(sample, s_b[sample.category], true);
        if (!fwd.ok) continue;
        loss::LossBreakdown b = sample_loss(model, fwd, sample, s_b[sample.category]);
        total = total.defined() ? diff::add(total, b.total_t) : b.total_t;
        ls += b.L_s;
        lc += b.L_corr;
        lg += b.L_g;
        rg += b.reg;
        ++used;
      }
      if (used == 0) continue;
      total = diff::scale(total, 1.0 / used);

      const double total_v = total.value();
      if (!std::isfinite(total_v))
        throw UsageError("train: NaN loss at step " + std::to_string(state.step + 1) +
                         "; first non-finite tensor from op '" +
                         first_nonfinite_op(scope.tape()) + "'");

      diff::backward(total);
      state.adam.step(model.params);
      model.params.zero_grads();

      ++state.step;
      log << "step " << state.step << " epoch " << epoch << " ls " << fmt(ls / used)
          << " lcorr " << fmt(lc / used) << " lg " << fmt(lg / used) << " reg "
          << fmt(rg / used) << " total " << fmt(total_v) << "\n";
    }

    state.epoch = epoch + 1;
    state.rng_state = shuffle_rng.state();
    if (!opts.out_dir.empty() && cfg.checkpoint_every > 0 &&
        state.epoch % cfg.checkpoint_every == 0 && state.epoch < epochs)
      save_checkpoint(opts.out_dir + "/ckpt_" + std::to_string(state.epoch) + ".ckpt", model,
                      state);
  }

  if (!opts.out_dir.empty())
    save_checkpoint(opts.out_dir + "/ckpt_final.ckpt", model, state);
  return state;
}

}  // namespace rgbpose::run
