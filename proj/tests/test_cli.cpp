#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rgbpose/checkpoint.hpp"
#include "rgbpose/config.hpp"
#include "rgbpose/gradsuite.hpp"

using namespace rgbpose;

namespace {

run::RunConfig tiny_cfg() {
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
  return cfg;
}

}  // namespace

TEST_CASE("config parsing: overrides, comments, unknown keys, bad values") {
  namespace fs = std::filesystem;
  const std::string path = "cli_test_config.cfg";
  {
    std::ofstream f(path);
    f << "# model size\n";
    f << "dim = 16\n";
    f << "lambda3 = 50.0   # ablation-ready\n";
    f << "fusion_mode = concat\n";
    f << "\n";
  }
  const run::RunConfig cfg = run::load_config(path);
  CHECK(cfg.dim == 16);
  CHECK(cfg.lambda3 == 50.0);
  CHECK(cfg.fusion_mode == "concat");
  // untouched defaults keep their spec values
  CHECK(cfg.lambda1 == 1.0);
  CHECK(cfg.lambda2 == 0.1);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.epochs == 120);
  fs::remove(path);

  run::RunConfig c2;
  CHECK_THROWS_WITH_AS(run::apply_config_line(c2, "no_such_key = 3"),
                       doctest::Contains("no_such_key"), ConfigError);
  CHECK_THROWS_WITH_AS(run::apply_config_line(c2, "dim = banana"),
                       doctest::Contains("dim"), ConfigError);
  CHECK_THROWS_AS(run::apply_config_line(c2, "just words"), ConfigError);
}

TEST_CASE("config validation names the offending field") {
  run::RunConfig cfg = tiny_cfg();
  cfg.patch_size = 7;
  CHECK_THROWS_WITH_AS(run::validate(cfg), doctest::Contains("patch_size"), ConfigError);
  cfg = tiny_cfg();
  cfg.lambda2 = -1;
  CHECK_THROWS_WITH_AS(run::validate(cfg), doctest::Contains("lambda"), ConfigError);
  cfg = tiny_cfg();
  cfg.prior_instances = 4;
  CHECK_THROWS_WITH_AS(run::validate(cfg), doctest::Contains("prior_instances"), ConfigError);
}

TEST_CASE("config serialize/deserialize round-trips every field") {
  run::RunConfig cfg = tiny_cfg();
  cfg.lambda3 = 12.345678901234567;
  cfg.scale_mode = "direct";
  cfg.seed = 0xDEADBEEF;
  const run::RunConfig back = run::deserialize_config(run::serialize(cfg));
  CHECK(back.dim == cfg.dim);
  CHECK(back.lambda3 == cfg.lambda3);
  CHECK(back.scale_mode == cfg.scale_mode);
  CHECK(back.seed == cfg.seed);
  CHECK(run::serialize(back) == run::serialize(cfg));
}

TEST_CASE("checkpoint save/load round-trips every tensor bit-exactly") {
  namespace fs = std::filesystem;
  const run::RunConfig cfg = tiny_cfg();
  net::Model model = net::Model::build(cfg);

  run::TrainState state;
  state.epoch = 7;
  state.step = 123;
  state.rng_state = {1, 2, 3, 4};
  state.adam.lr = cfg.learning_rate;
  state.adam.init(model.params);
  state.adam.t = 55;
  // make the moments non-trivial
  Rng rng(9);
  for (auto& m : state.adam.m)
    for (auto& v : m) v = rng.uniform(-1, 1);
  for (auto& vv : state.adam.v)
    for (auto& v : vv) v = rng.uniform(0, 1);

  const std::string path = "cli_test_ckpt.ckpt";
  run::save_checkpoint(path, model, state);
  const auto loaded = run::load_checkpoint(path);

  CHECK(loaded.state.epoch == 7);
  CHECK(loaded.state.step == 123);
  CHECK(loaded.state.rng_state == std::array<uint64_t, 4>{1, 2, 3, 4});
  CHECK(loaded.state.adam.t == 55);

  REQUIRE(loaded.model.params.entries().size() == model.params.entries().size());
  for (size_t i = 0; i < model.params.entries().size(); ++i) {
    const auto& a = model.params.entries()[i];
    const auto& b = loaded.model.params.entries()[i];
    CHECK(a.name == b.name);
    CHECK(a.frozen == b.frozen);
    REQUIRE(a.tensor.size() == b.tensor.size());
    for (long k = 0; k < a.tensor.size(); ++k)
      CHECK(a.tensor.data()[k] == b.tensor.data()[k]);
  }
  for (size_t k = 0; k < state.adam.m.size(); ++k) {
    CHECK(loaded.state.adam.m[k] == state.adam.m[k]);
    CHECK(loaded.state.adam.v[k] == state.adam.v[k]);
  }
  fs::remove(path);
}

TEST_CASE("gradient suite passes at the default seed and lists per-op errors") {
  const auto reports = run::gradient_suite(1);
  CHECK(reports.size() >= 15);
  bool saw_end_to_end = false;
  for (const auto& r : reports) {
    CAPTURE(r.name);
    CHECK(r.pass);
    CHECK(r.checked > 0);
    saw_end_to_end |= r.name == "end_to_end_loss";
  }
  CHECK(saw_end_to_end);
}

TEST_CASE("shipped presets parse, validate, and build") {
  const std::string root = RGBPOSE_SOURCE_DIR;
  const run::RunConfig desk = run::load_config(root + "/configs/desk.cfg");
  CHECK(desk.image_size == 64);
  CHECK(desk.lambda3 == 100.0);
  const run::RunConfig tiny = run::load_config(root + "/configs/tiny.cfg");
  CHECK(tiny.dim == 8);

  // paper-shape parity: published input geometry flows through the heads
  const run::RunConfig paper = run::load_config(root + "/configs/paper_shape.cfg");
  CHECK(paper.image_size == 224);
  CHECK(paper.n_prior == 1024);
  CHECK(paper.batch_size == 16);
  CHECK(paper.epochs == 120);
  const net::Model model = net::Model::build(paper);
  CHECK(model.params.find("a_head.l1.W").cols() == 1024);  // N_r logits per token
  CHECK(model.params.find("d_head.l1.W").cols() == 3);     // offsets are [N_r x 3]
  CHECK(model.embed.posenc.rows() == (224 / 14) * (224 / 14));
}
