#include "rgbpose/gradsuite.hpp"

#include "rgbpose/config.hpp"
#include "rgbpose/fusion.hpp"
#include "rgbpose/model.hpp"
#include "rgbpose/rng.hpp"
#include "rgbpose/trainer.hpp"

namespace rgbpose::run {

using diff::GradCheckReport;
using diff::Tensor;

namespace {

Tensor random_tensor(long rows, long cols, Rng& rng, bool rg = true) {
  Tensor t(rows, cols, rg);
  for (long i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

RunConfig tiny_config(uint64_t seed) {
  RunConfig cfg;
  cfg.dim = 8;
  cfg.patch_size = 8;
  cfg.image_size = 24;
  cfg.n_prior = 16;
  cfg.geom_hidden = 8;
  cfg.point_hidden = 8;
  cfg.point_feat = 8;
  cfg.a_hidden = 8;
  cfg.d_hidden = 8;
  cfg.s_hidden = 8;
  cfg.n_model_points = 512;
  cfg.n_render_points = 4096;
  cfg.seed = seed;
  // keep the single object large in the tiny frame
  cfg.depth_rel_min = 1.8;
  cfg.depth_rel_max = 2.2;
  cfg.center_jitter = 0.0;
  return cfg;
}

}  // namespace

std::vector<GradCheckReport> gradient_suite(uint64_t seed) {
  std::vector<GradCheckReport> out;
  Rng rng(derive_seed(seed, 0x6AD));

  {
    Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
    out.push_back(diff::check_gradients(
        "matmul", [&] { return diff::sum_all(diff::matmul(a, b)); }, {a, b}, 1e-5, 1e-6));
  }
  {
    Tensor x = random_tensor(5, 7, rng);
    Tensor tgt = random_tensor(5, 7, rng, false);
    out.push_back(diff::check_gradients(
        "softmax_rows", [&] { return diff::mse(diff::softmax_rows(x), tgt); }, {x}, 1e-5,
        1e-6));
  }
  {
    Tensor x = random_tensor(4, 3, rng);
    diff::Mlp mlp;
    Rng wrng(derive_seed(seed, 0x11));
    diff::LinearLayer l0{random_tensor(3, 8, wrng), random_tensor(1, 8, wrng)};
    diff::LinearLayer l1{random_tensor(8, 2, wrng), random_tensor(1, 2, wrng)};
    mlp.layers = {l0, l1};
    out.push_back(diff::check_gradients(
        "mlp_forward", [&] { return diff::mean_all(diff::mlp_forward(x, mlp)); },
        {x, l0.W, l0.b, l1.W, l1.b}, 1e-5, 1e-6));
  }
  {
    Tensor a = random_tensor(1, 6, rng), b = random_tensor(1, 6, rng);
    out.push_back(diff::check_gradients(
        "mse", [&] { return diff::mse(a, b); }, {a, b}, 1e-5, 1e-6));
  }
  {
    // elements straddling the huber knee (away from the exact kink)
    Tensor a = Tensor::from({0.05, 0.4, -0.02, -0.9, 0.22, 0.0}, 1, 6, true);
    Tensor b = Tensor::from({0.0, 0.0, 0.0, 0.0, 0.0, 0.5}, 1, 6, true);
    out.push_back(diff::check_gradients(
        "smooth_l1", [&] { return diff::smooth_l1(a, b, 0.1); }, {a, b}, 1e-5, 1e-5));
  }
  {
    Tensor x = random_tensor(4, 5, rng);
    out.push_back(diff::check_gradients(
        "avgpool_rows",
        [&] { return diff::sum_all(diff::mul(diff::broadcast_rows(diff::avgpool_rows(x), 4), x)); },
        {x}, 1e-5, 1e-6));
  }
  {
    Tensor x = random_tensor(6, 3, rng);
    Tensor w = random_tensor(1, 3, rng, false);
    out.push_back(diff::check_gradients(
        "maxpool_rows", [&] { return diff::sum_all(diff::mul(diff::maxpool_rows(x), w)); },
        {x}, 1e-6, 1e-5));
  }
  {
    Tensor a = random_tensor(3, 2, rng), b = random_tensor(3, 4, rng);
    Tensor tgt = random_tensor(3, 6, rng, false);
    out.push_back(diff::check_gradients(
        "concat_cols", [&] { return diff::mse(diff::concat_cols(a, b), tgt); }, {a, b}, 1e-5,
        1e-6));
  }
  {
    Tensor x = random_tensor(5, 3, rng);
    const std::vector<long> idx{4, 0, 2, 0};
    out.push_back(diff::check_gradients(
        "take_rows", [&] { return diff::mean_all(diff::take_rows(x, idx)); }, {x}, 1e-5,
        1e-6));
  }
  {
    Tensor x = random_tensor(3, 4, rng);
    out.push_back(diff::check_gradients(
        "leaky_relu", [&] { return diff::sum_all(diff::leaky_relu(x, 0.01)); }, {x}, 1e-6,
        1e-5));
  }
  {
    Tensor x = random_tensor(2, 3, rng);
    out.push_back(diff::check_gradients(
        "scale_add", [&] { return diff::mean_all(diff::add_scalar(diff::scale(x, 2.5), 0.3)); },
        {x}, 1e-5, 1e-6));
  }
  {
    Tensor x = random_tensor(1, 5, rng);
    out.push_back(diff::check_gradients(
        "abs", [&] { return diff::mean_all(diff::abs_elem(x)); }, {x}, 1e-6, 1e-5));
  }
  {
    Tensor x = random_tensor(3, 4, rng);
    out.push_back(diff::check_gradients(
        "row_entropy", [&] { return diff::row_entropy_from_logits(x); }, {x}, 1e-5, 1e-6));
  }
  {
    Rng arng(derive_seed(seed, 0x22));
    Tensor F = random_tensor(4, 6, arng);
    net::AttnParams p{{random_tensor(6, 6, arng), random_tensor(1, 6, arng)},
                      {random_tensor(6, 6, arng), random_tensor(1, 6, arng)},
                      {random_tensor(6, 6, arng), random_tensor(1, 6, arng)}};
    out.push_back(diff::check_gradients(
        "self_attend", [&] { return diff::mean_all(net::self_attend(F, p)); },
        {F, p.q.W, p.k.W, p.v.W, p.q.b, p.k.b, p.v.b}, 1e-5, 1e-5));
  }
  {
    Rng arng(derive_seed(seed, 0x23));
    Tensor Fq = random_tensor(2, 5, arng), Fkv = random_tensor(3, 5, arng);
    net::AttnParams p{{random_tensor(5, 5, arng), random_tensor(1, 5, arng)},
                      {random_tensor(5, 5, arng), random_tensor(1, 5, arng)},
                      {random_tensor(5, 5, arng), random_tensor(1, 5, arng)}};
    out.push_back(diff::check_gradients(
        "cross_attend", [&] { return diff::mean_all(net::cross_attend(Fq, Fkv, p)); },
        {Fq, Fkv, p.q.W, p.k.W, p.v.W}, 1e-5, 1e-5));
  }
  {
    // assignment chain: logits -> softmax -> smooth_l1 against gt points
    Rng hrng(derive_seed(seed, 0x24));
    Tensor F_ins = random_tensor(3, 4, hrng);
    Tensor F_fuse = random_tensor(3, 2, hrng);
    Tensor prior = random_tensor(7, 3, hrng, false);
    Tensor gt = random_tensor(3, 3, hrng, false);
    diff::Mlp a_head;
    a_head.layers = {{random_tensor(6, 8, hrng), random_tensor(1, 8, hrng)},
                     {random_tensor(8, 7, hrng), random_tensor(1, 7, hrng)}};
    out.push_back(diff::check_gradients(
        "assignment_chain",
        [&] {
          Tensor logits = diff::mlp_forward(diff::concat_cols(F_ins, F_fuse), a_head);
          Tensor A = diff::softmax_rows(logits);
          return diff::smooth_l1(diff::matmul(A, prior), gt, 0.1);
        },
        {F_ins, F_fuse, a_head.layers[0].W, a_head.layers[1].W}, 1e-5, 1e-4));
  }
  {
    // end-to-end: whole-network loss on one tiny synthetic sample
    const RunConfig cfg = tiny_config(seed);
    net::Model model = net::Model::build(cfg);
    // nudge heads off their zero init so the check exercises every path
    Rng prng(derive_seed(seed, 0x25));
    for (auto& e : model.params.entries()) {
      if (e.frozen) continue;
      for (long i = 0; i < e.tensor.size(); ++i)
        e.tensor.data()[i] += 0.05 * prng.uniform(-1.0, 1.0);
    }
    const synth::GenConfig gen = gen_config(cfg);
    const auto& spec = gen.categories[3];  // can
    const geom::Points prior =
        synth::make_prior(spec, derive_seed(cfg.seed, 0x50 + spec.id), 8, cfg.n_prior,
                          cfg.n_model_points);
    const synth::SceneSample sample =
        synth::sample_scene(gen, spec, prior, cfg.seed, synth::Split::Train, 0);
    out.push_back(diff::check_gradients(
        "end_to_end_loss",
        [&] {
          net::ForwardOutputs fwd = model.forward(sample, spec.s_b, true);
          if (!fwd.ok) throw UsageError("gradient_suite: sample has no foreground");
          return sample_loss(model, fwd, sample, spec.s_b).total_t;
        },
        model.params.trainable(), 1e-5, 1e-4));
  }
  return out;
}

}  // namespace rgbpose::run
