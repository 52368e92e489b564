#include <doctest.h>

#include <cmath>

#include "rgbpose/gradcheck.hpp"
#include "rgbpose/losses.hpp"
#include "rgbpose/model.hpp"
#include "rgbpose/rng.hpp"
#include "rgbpose/trainer.hpp"

using namespace rgbpose;
using diff::Tensor;

namespace {

Tensor random_tensor(long r, long c, uint64_t seed, bool rg = true) {
  Rng rng(seed);
  Tensor t(r, c, rg);
  for (long i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("scale_loss: exact match, forced value, gradient sign") {
  // dS == dS_hat -> 0 (dS_hat computed exactly as the loss computes it)
  Tensor d1 = Tensor::from({(0.25 - 0.2) / 0.2}, 1, 1);
  CHECK(loss::scale_loss(d1, 0.25, 0.2, false).value() == 0.0);

  // s_gt = 0.25, s_b = 0.2, dS = 0 -> |0.25 - 0| = 0.25
  Tensor d0 = Tensor::from({0.0}, 1, 1);
  CHECK(loss::scale_loss(d0, 0.25, 0.2, false).value() == doctest::Approx(0.25).epsilon(1e-15));

  // gradient sign equals sign(dS - dS_hat)
  for (double ds : {0.4, -0.3}) {
    diff::TapeScope scope;
    Tensor d = Tensor::from({ds}, 1, 1, true);
    Tensor l = loss::scale_loss(d, 0.2, 0.2, false);  // dS_hat = 0
    diff::backward(l);
    CHECK(d.grad()[0] == (ds > 0 ? 1.0 : -1.0));
  }

  CHECK_THROWS_AS(loss::scale_loss(d0, 0.25, 0.0, false), ConfigError);
}

TEST_CASE("corr_loss: exact match with one-hot A is exactly zero") {
  const long n_o = 3, n_r = 4;
  Tensor prior = random_tensor(n_r, 3, 1, false);
  Tensor D = Tensor::zeros(n_r, 3, true);
  // one-hot logits via +/- large values
  Tensor logits = Tensor::zeros(n_o, n_r, true);
  for (long i = 0; i < n_o; ++i)
    for (long j = 0; j < n_r; ++j) logits.at(i, j) = (j == i ? 500.0 : -500.0);
  Tensor pred = diff::matmul(diff::softmax_rows(logits), diff::add(prior, D));
  Tensor gt(n_o, 3);
  for (long i = 0; i < n_o; ++i)
    for (long c = 0; c < 3; ++c) gt.at(i, c) = prior.at(i, c);

  auto cl = loss::corr_loss(pred, gt, logits, D, 0.1, 1e-3, 1e-2);
  CHECK(cl.main.value() <= 1e-12);
  CHECK(cl.reg.value() <= 1e-12);  // one-hot entropy 0, D = 0
}

TEST_CASE("corr_loss entropy term: uniform rows over N_r = 4 give ln 4") {
  const long n_o = 5, n_r = 4;
  Tensor logits = Tensor::zeros(n_o, n_r, true);
  Tensor D = Tensor::zeros(n_r, 3, true);
  Tensor pred = Tensor::zeros(n_o, 3, true);
  Tensor gt = Tensor::zeros(n_o, 3);
  auto cl = loss::corr_loss(pred, gt, logits, D, 0.1, 1.0, 0.0);  // entropy weight 1
  CHECK(cl.reg.value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("corr_loss gradcheck through smooth-l1 + entropy + deformation") {
  const long n_o = 3, n_r = 5;
  Tensor logits = random_tensor(n_o, n_r, 2);
  Tensor D = random_tensor(n_r, 3, 3);
  Tensor prior = random_tensor(n_r, 3, 4, false);
  Tensor gt = random_tensor(n_o, 3, 5, false);
  const auto rep = diff::check_gradients(
      "corr_loss",
      [&] {
        Tensor pred = diff::matmul(diff::softmax_rows(logits), diff::add(prior, D));
        auto cl = loss::corr_loss(pred, gt, logits, D, 0.1, 1e-3, 1e-2);
        return diff::add(cl.main, cl.reg);
      },
      {logits, D}, 1e-5, 1e-4);
  CHECK(rep.pass);
}

TEST_CASE("guidance_loss: exact match and single-element difference") {
  Tensor f = random_tensor(4, 6, 6, false);
  CHECK(loss::guidance_loss(f, f).value() == 0.0);

  Tensor f2(4, 6);
  for (long i = 0; i < f.size(); ++i) f2.data()[i] = f.data()[i];
  f2.at(2, 3) += 1.0;
  CHECK(loss::guidance_loss(f2, f).value() == doctest::Approx(1.0 / 24.0).epsilon(1e-12));

  Tensor wrong(3, 6);
  CHECK_THROWS_AS(loss::guidance_loss(wrong, f), ShapeError);
}

TEST_CASE("total_loss: zeros, paper weights, linearity in each lambda") {
  Tensor z = Tensor::scalar(0.0);
  auto b0 = loss::total_loss(z, z, z, z, 1.0, 0.1, 100.0);
  CHECK(b0.total == 0.0);

  Tensor one = Tensor::scalar(1.0);
  auto b1 = loss::total_loss(one, one, one, z, 1.0, 0.1, 100.0);
  CHECK(std::fabs(b1.total - 101.1) <= 1e-12);

  // lambda3 = 0 removes the guidance term
  auto b2 = loss::total_loss(one, one, one, z, 1.0, 0.1, 0.0);
  CHECK(std::fabs(b2.total - 1.1) <= 1e-12);

  // linearity in each lambda at three settings
  Tensor ls = Tensor::scalar(0.7), lc = Tensor::scalar(0.3), lg = Tensor::scalar(0.11);
  for (double lam : {0.0, 0.5, 2.0}) {
    auto ba = loss::total_loss(ls, lc, lg, z, lam, 0.1, 1.0);
    CHECK(std::fabs(ba.total - (lam * 0.7 + 0.1 * 0.3 + 1.0 * 0.11)) <= 1e-12);
  }

  CHECK_THROWS_AS(loss::total_loss(one, one, one, z, -1.0, 0.1, 1.0), ConfigError);

  // invariant: total = lambda1 Ls + lambda2 Lcorr + lambda3 Lg + reg
  Tensor reg = Tensor::scalar(0.013);
  auto b3 = loss::total_loss(ls, lc, lg, reg, 1.0, 0.1, 100.0);
  CHECK(std::fabs(b3.total - (0.7 + 0.1 * 0.3 + 100.0 * 0.11 + 0.013)) <= 1e-12);
}

TEST_CASE("training only L_g on one fixed sample strictly decreases it") {
  run::RunConfig cfg;
  cfg.dim = 8;
  cfg.image_size = 24;
  cfg.patch_size = 8;
  cfg.n_prior = 16;
  cfg.geom_hidden = 8;
  cfg.point_hidden = 8;
  cfg.point_feat = 8;
  cfg.a_hidden = 8;
  cfg.d_hidden = 8;
  cfg.s_hidden = 8;
  cfg.n_model_points = 512;
  cfg.n_render_points = 4096;
  cfg.depth_rel_min = 1.8;
  cfg.depth_rel_max = 2.2;
  cfg.center_jitter = 0.0;
  cfg.seed = 5;
  net::Model model = net::Model::build(cfg);

  const synth::GenConfig gen = run::gen_config(cfg);
  const auto& spec = gen.categories[1];
  const auto prior = synth::make_prior(spec, 4, 8, cfg.n_prior, cfg.n_model_points);
  const auto sample = synth::sample_scene(gen, spec, prior, 31, synth::Split::Train, 0);

  run::AdamState adam;
  adam.lr = 1e-3;
  adam.init(model.params);

  double first = 0, last = 0;
  for (int step = 0; step < 50; ++step) {
    diff::TapeScope scope;
    auto fwd = model.forward(sample, spec.s_b, true);
    REQUIRE(fwd.ok);
    Tensor lg = loss::guidance_loss(fwd.F_guid, fwd.F_N);
    if (step == 0) first = lg.value();
    last = lg.value();
    diff::backward(lg);
    adam.step(model.params);
    model.params.zero_grads();
  }
  CHECK(last < first);
  CHECK(last < 0.9 * first);
}
