#include <doctest.h>

#include <cmath>

#include "rgbpose/backbone.hpp"
#include "rgbpose/gradcheck.hpp"
#include "rgbpose/model.hpp"
#include "rgbpose/trainer.hpp"

using namespace rgbpose;
using diff::Tensor;

namespace {

std::vector<double> const_image(int h, int w, double v) {
  return std::vector<double>(static_cast<size_t>(h) * w * 3, v);
}

std::vector<uint8_t> full_mask(int h, int w) {
  return std::vector<uint8_t>(static_cast<size_t>(h) * w, 1);
}

Tensor random_tensor(long r, long c, uint64_t seed, bool rg = true) {
  Rng rng(seed);
  Tensor t(r, c, rg);
  for (long i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

net::PointEncoderParams random_encoder(long hidden, long feat, long d_out, uint64_t seed) {
  Rng rng(seed);
  net::PointEncoderParams enc;
  enc.mlp1.layers = {{random_tensor(3, hidden, seed + 1), Tensor::zeros(1, hidden, true)},
                     {random_tensor(hidden, feat, seed + 2), Tensor::zeros(1, feat, true)}};
  enc.mlp2.layers = {{random_tensor(2 * feat, hidden, seed + 3), Tensor::zeros(1, hidden, true)},
                     {random_tensor(hidden, d_out, seed + 4), Tensor::zeros(1, d_out, true)}};
  return enc;
}

}  // namespace

TEST_CASE("embed_patches: zero image gives exactly the positional encodings") {
  const int hw = 16, p = 8, d = 12;
  const auto embed = net::make_patch_embed(hw, p, d, 99);
  const auto grid =
      net::embed_patches(const_image(hw, hw, 0.0), full_mask(hw, hw), hw, hw, embed);
  REQUIRE(grid.tokens.rows() == 4);
  for (long i = 0; i < grid.tokens.size(); ++i)
    CHECK(grid.tokens.data()[i] == embed.posenc.data()[i]);
}

TEST_CASE("embed_patches is linear in the image for a fixed mask") {
  const int hw = 16, p = 8, d = 8;
  const auto embed = net::make_patch_embed(hw, p, d, 7);
  Rng rng(5);
  auto img = const_image(hw, hw, 0.0);
  for (auto& v : img) v = rng.uniform(0.0, 1.0);
  auto scaled = img;
  for (auto& v : scaled) v *= 0.37;

  const auto g1 = net::embed_patches(img, full_mask(hw, hw), hw, hw, embed);
  const auto g2 = net::embed_patches(scaled, full_mask(hw, hw), hw, hw, embed);
  for (long i = 0; i < g1.tokens.size(); ++i) {
    const double c1 = g1.tokens.data()[i] - embed.posenc.data()[i];
    const double c2 = g2.tokens.data()[i] - embed.posenc.data()[i];
    CHECK(std::fabs(c2 - 0.37 * c1) <= 1e-10);
  }
}

TEST_CASE("embed_patches: permuting two patches permutes content terms") {
  const int hw = 16, p = 8, d = 8;
  const auto embed = net::make_patch_embed(hw, p, d, 7);
  Rng rng(6);
  auto img = const_image(hw, hw, 0.0);
  for (auto& v : img) v = rng.uniform(0.0, 1.0);

  // swap patch (0,0) and patch (1,1) pixel blocks
  auto swapped = img;
  for (int dy = 0; dy < p; ++dy)
    for (int dx = 0; dx < p; ++dx)
      for (int c = 0; c < 3; ++c) {
        const size_t a = (static_cast<size_t>(dy) * hw + dx) * 3 + c;
        const size_t b = (static_cast<size_t>(8 + dy) * hw + 8 + dx) * 3 + c;
        std::swap(swapped[a], swapped[b]);
      }
  const auto g1 = net::embed_patches(img, full_mask(hw, hw), hw, hw, embed);
  const auto g2 = net::embed_patches(swapped, full_mask(hw, hw), hw, hw, embed);
  // tokens 0 and 3 swap content; tokens 1 and 2 unchanged
  for (long j = 0; j < d; ++j) {
    CHECK(g2.tokens.at(0, j) - embed.posenc.at(0, j) ==
          doctest::Approx(g1.tokens.at(3, j) - embed.posenc.at(3, j)).epsilon(1e-12));
    CHECK(g2.tokens.at(1, j) == g1.tokens.at(1, j));
    CHECK(g2.tokens.at(2, j) == g1.tokens.at(2, j));
  }
}

TEST_CASE("embed_patches: single-patch perturbation changes exactly one token") {
  const int hw = 24, p = 8, d = 8;
  const auto embed = net::make_patch_embed(hw, p, d, 8);
  Rng rng(7);
  auto img = const_image(hw, hw, 0.0);
  for (auto& v : img) v = rng.uniform(0.0, 1.0);
  auto perturbed = img;
  perturbed[(10 * hw + 3) * 3 + 1] += 0.25;  // inside patch (0,1)

  const auto g1 = net::embed_patches(img, full_mask(hw, hw), hw, hw, embed);
  const auto g2 = net::embed_patches(perturbed, full_mask(hw, hw), hw, hw, embed);
  int changed = 0;
  for (long t = 0; t < g1.tokens.rows(); ++t) {
    bool diff_tok = false;
    for (long j = 0; j < d; ++j)
      diff_tok |= g1.tokens.at(t, j) != g2.tokens.at(t, j);
    changed += diff_tok;
  }
  CHECK(changed == 1);
}

TEST_CASE("embed_patches rejects images not divisible by the patch size") {
  const auto embed = net::make_patch_embed(16, 8, 8, 1);
  CHECK_THROWS_AS(net::embed_patches(const_image(20, 20, 0.0),
                                     std::vector<uint8_t>(400, 1), 20, 20, embed),
                  ConfigError);
  CHECK_THROWS_AS(net::make_patch_embed(20, 8, 8, 1), ConfigError);
}

TEST_CASE("fg_flags require half the patch masked; rep pixel is masked") {
  const int hw = 16, p = 8;
  std::vector<uint8_t> mask(hw * hw, 0);
  // cover 3/4 of patch (0,0), 1/4 of patch (1,0)
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (!(y >= 4 && x >= 4)) mask[y * hw + x] = 1;
  for (int y = 0; y < 4; ++y)
    for (int x = 8; x < 12; ++x) mask[y * hw + x] = 1;

  const auto grid = net::patch_geometry(mask, hw, hw, p);
  CHECK(grid.fg_flags[0] == 1);
  CHECK(grid.fg_flags[1] == 0);
  CHECK(grid.fg_flags[2] == 0);
  CHECK(grid.fg_flags[3] == 0);
  const auto ij = grid.rep_pixel_ij[0];
  CHECK(mask[ij[1] * hw + ij[0]] == 1);
}

TEST_CASE("geom_head: zero-initialized last layer gives zero output at step 0") {
  run::RunConfig cfg;
  cfg.dim = 8;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.n_prior = 16;
  cfg.geom_hidden = 8;
  cfg.point_hidden = 8;
  cfg.point_feat = 8;
  cfg.a_hidden = 8;
  cfg.d_hidden = 8;
  cfg.s_hidden = 8;
  const net::Model model = net::Model::build(cfg);
  Tensor x = random_tensor(4, 8, 3, false);
  Tensor fg = diff::mlp_forward(x, model.geom_head);
  CHECK(fg.rows() == 4);
  CHECK(fg.cols() == 8);
  for (long i = 0; i < fg.size(); ++i) CHECK(fg.data()[i] == 0.0);
}

TEST_CASE("encode_points: single point, permutation equivariance, duplicates") {
  const auto enc = random_encoder(8, 8, 6, 11);

  Tensor one = random_tensor(1, 3, 12, false);
  Tensor f1 = net::encode_points(one, enc);
  CHECK(f1.rows() == 1);
  CHECK(f1.cols() == 6);

  Tensor cloud = random_tensor(16, 3, 13, false);
  Tensor feats = net::encode_points(cloud, enc);

  // reverse-order permutation
  Tensor rev(16, 3);
  for (long i = 0; i < 16; ++i)
    for (long c = 0; c < 3; ++c) rev.at(i, c) = cloud.at(15 - i, c);
  Tensor feats_rev = net::encode_points(rev, enc);
  for (long i = 0; i < 16; ++i)
    for (long j = 0; j < 6; ++j) CHECK(feats_rev.at(i, j) == feats.at(15 - i, j));

  // duplicated point gives duplicated feature rows
  Tensor dup(4, 3);
  for (long c = 0; c < 3; ++c) {
    dup.at(0, c) = cloud.at(0, c);
    dup.at(1, c) = cloud.at(0, c);
    dup.at(2, c) = cloud.at(1, c);
    dup.at(3, c) = cloud.at(2, c);
  }
  Tensor fd = net::encode_points(dup, enc);
  for (long j = 0; j < 6; ++j) CHECK(fd.at(0, j) == fd.at(1, j));
}

TEST_CASE("encode_points gradcheck through both MLPs and the max pool") {
  auto enc = random_encoder(6, 6, 4, 21);
  Tensor pts = random_tensor(10, 3, 22);
  std::vector<Tensor> params{pts};
  for (auto& l : enc.mlp1.layers) {
    params.push_back(l.W);
    params.push_back(l.b);
  }
  for (auto& l : enc.mlp2.layers) {
    params.push_back(l.W);
    params.push_back(l.b);
  }
  const auto rep = diff::check_gradients(
      "encode_points", [&] { return diff::mean_all(net::encode_points(pts, enc)); }, params,
      1e-6, 1e-5);
  CHECK(rep.pass);
}

TEST_CASE("frozen guidance encoder: determinism and geometry sensitivity") {
  run::RunConfig cfg;
  cfg.dim = 8;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.n_prior = 16;
  cfg.geom_hidden = 8;
  cfg.point_hidden = 8;
  cfg.point_feat = 8;
  cfg.a_hidden = 8;
  cfg.d_hidden = 8;
  cfg.s_hidden = 8;
  const net::Model model = net::Model::build(cfg);

  Tensor pn = random_tensor(12, 3, 31, false);
  Tensor f1 = net::encode_points(pn, model.nocs_enc);
  Tensor f2 = net::encode_points(pn, model.nocs_enc);
  CHECK(f1.cols() == 16);  // d_N = 2d
  for (long i = 0; i < f1.size(); ++i) CHECK(f1.data()[i] == f2.data()[i]);

  // clearly different geometry produces different features
  Tensor far(12, 3);
  for (long i = 0; i < far.rows(); ++i)
    for (long c = 0; c < 3; ++c) far.at(i, c) = pn.at(i, c) + 0.3;
  Tensor f3 = net::encode_points(far, model.nocs_enc);
  double diff_abs = 0;
  for (long i = 0; i < f1.size(); ++i) diff_abs += std::fabs(f1.data()[i] - f3.data()[i]);
  CHECK(diff_abs / f1.size() > 0.0);
}

TEST_CASE("frozen parameters are bit-identical after training steps") {
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
  net::Model model = net::Model::build(cfg);

  std::vector<std::pair<std::string, std::vector<double>>> frozen_before;
  for (const auto& e : model.params.entries())
    if (e.frozen)
      frozen_before.emplace_back(
          e.name, std::vector<double>(e.tensor.data(), e.tensor.data() + e.tensor.size()));

  const synth::GenConfig gen = run::gen_config(cfg);
  const auto& spec = gen.categories[3];
  const auto prior = synth::make_prior(spec, 2, 8, cfg.n_prior, cfg.n_model_points);
  const auto sample = synth::sample_scene(gen, spec, prior, 77, synth::Split::Train, 0);

  run::AdamState adam;
  adam.lr = 1e-3;
  adam.init(model.params);
  for (int step = 0; step < 3; ++step) {
    diff::TapeScope scope;
    auto fwd = model.forward(sample, spec.s_b, true);
    REQUIRE(fwd.ok);
    auto breakdown = run::sample_loss(model, fwd, sample, spec.s_b);
    diff::backward(breakdown.total_t);
    adam.step(model.params);
    model.params.zero_grads();
  }

  for (const auto& [name, before] : frozen_before) {
    const Tensor t = model.params.find(name);
    const std::vector<double> after(t.data(), t.data() + t.size());
    CHECK(after == before);
  }
}
