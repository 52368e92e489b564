#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "rgbpose/checkpoint.hpp"
#include "rgbpose/config.hpp"
#include "rgbpose/dataset.hpp"
#include "rgbpose/evalharness.hpp"
#include "rgbpose/gradsuite.hpp"
#include "rgbpose/overlay.hpp"
#include "rgbpose/trainer.hpp"

namespace {

using namespace rgbpose;

struct CommonArgs {
  std::string config_path;
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<double> lambda3;
  std::optional<int> workers;
  bool oracle = false;
};

run::RunConfig resolve_config(const CommonArgs& a) {
  run::RunConfig cfg = a.config_path.empty() ? run::RunConfig{} : run::load_config(a.config_path);
  if (a.seed) cfg.seed = *a.seed;
  if (a.lambda3) cfg.lambda3 = *a.lambda3;
  if (a.workers) cfg.workers = *a.workers;
  run::validate(cfg);
  return cfg;
}

pnp::RansacConfig ransac_config(const run::RunConfig& cfg) {
  pnp::RansacConfig rc;
  rc.max_iterations = cfg.ransac_max_iterations;
  rc.inlier_threshold_px = cfg.ransac_threshold_px;
  rc.confidence = cfg.ransac_confidence;
  rc.min_inliers = cfg.ransac_min_inliers;
  rc.refine_iterations = cfg.ransac_refine_iterations;
  return rc;
}

int cmd_gen_data(const CommonArgs& args) {
  const run::RunConfig cfg = resolve_config(args);
  if (args.out.empty()) throw ConfigError("gen-data: --out directory required");
  const synth::GenConfig gen = run::gen_config(cfg);
  const synth::GenSummary sum = synth::write_dataset(gen, cfg.seed, args.out, cfg.workers);
  std::printf("dataset written to %s (%" PRIu64 " payload bytes)\n", args.out.c_str(),
              sum.payload_bytes);
  std::printf("%-8s %8s %8s %8s\n", "category", "train", "test", "s_b");
  for (size_t c = 0; c < sum.category_names.size(); ++c)
    std::printf("%-8s %8d %8d %8.3f\n", sum.category_names[c].c_str(), sum.train_counts[c],
                sum.test_counts[c], sum.s_b[c]);
  return 0;
}

int cmd_train(const CommonArgs& args) {
  if (args.dataset.empty()) throw ConfigError("train: --dataset required");
  if (args.out.empty()) throw ConfigError("train: --out directory required");
  const synth::DatasetReader data = synth::DatasetReader::open(args.dataset);

  net::Model model = net::Model::build(run::RunConfig{});
  run::TrainState state;
  const run::TrainState* resume = nullptr;
  if (!args.checkpoint.empty()) {
    run::LoadedCheckpoint loaded = run::load_checkpoint(args.checkpoint);
    model = std::move(loaded.model);
    state = loaded.state;
    // CLI overrides that keep resumed runs steerable
    if (args.lambda3) model.cfg.lambda3 = *args.lambda3;
    if (args.workers) model.cfg.workers = *args.workers;
    resume = &state;
  } else {
    const run::RunConfig cfg = resolve_config(args);
    model = net::Model::build(cfg);
  }

  std::filesystem::create_directories(args.out);
  std::ofstream log(args.out + "/train_log.txt",
                    resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + args.out + "/train_log.txt");

  run::TrainOptions opts;
  opts.out_dir = args.out;
  const run::TrainState final_state = run::train(model, data, opts, log, resume);
  std::printf("trained to epoch %d (%ld steps); checkpoints in %s\n", final_state.epoch,
              final_state.step, args.out.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  if (args.dataset.empty()) throw ConfigError("eval: --dataset required");
  const synth::DatasetReader data = synth::DatasetReader::open(args.dataset);

  std::optional<net::Model> model;
  run::RunConfig cfg;
  if (!args.checkpoint.empty()) {
    model = run::load_checkpoint(args.checkpoint).model;
    cfg = model->cfg;
  } else if (args.oracle) {
    cfg = resolve_config(args);
  } else {
    throw ConfigError("eval: --checkpoint required unless --oracle");
  }
  if (args.workers) cfg.workers = *args.workers;

  eval::EvalOptions opts;
  opts.oracle = args.oracle;
  opts.oracle_patch = cfg.patch_size;
  opts.workers = cfg.workers;
  opts.seed = args.seed ? *args.seed : cfg.seed;
  opts.ransac = ransac_config(cfg);
  opts.iou_grid = cfg.iou_grid;

  const eval::MetricReport rep =
      eval::evaluate(model ? &*model : nullptr, data, synth::Split::Test, opts);
  const std::string text = eval::format_report(rep);
  std::fputs(text.c_str(), stdout);
  if (!args.out.empty()) {
    std::filesystem::create_directories(args.out);
    std::ofstream f(args.out + "/report.txt");
    f << text;
  }
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& sample_ref) {
  if (args.dataset.empty()) throw ConfigError("infer: --dataset required");
  const synth::DatasetReader data = synth::DatasetReader::open(args.dataset);

  synth::Split split = synth::Split::Test;
  std::string ref = sample_ref;
  const auto slash = ref.find('/');
  if (slash != std::string::npos) {
    split = synth::split_from_name(ref.substr(0, slash));
    ref = ref.substr(slash + 1);
  }
  int index = 0;
  try {
    index = std::stoi(ref);
  } catch (...) {
    throw UsageError("infer: bad sample id '" + sample_ref + "' (use [split/]index)");
  }

  const synth::SceneSample sample = data.load(split, index);
  const auto& spec = data.categories()[sample.category];

  std::optional<net::Model> model;
  run::RunConfig cfg;
  if (!args.checkpoint.empty()) {
    model = run::load_checkpoint(args.checkpoint).model;
    cfg = model->cfg;
  } else if (args.oracle) {
    cfg = resolve_config(args);
  } else {
    throw ConfigError("infer: --checkpoint required unless --oracle");
  }

  std::vector<geom::Vec2> pixels;
  geom::Points metric;
  double s_pred = 0.0;
  geom::Vec3 extents = geom::Vec3::Zero();
  if (args.oracle) {
    net::PatchGrid grid = net::patch_geometry(sample.mask, sample.height, sample.width,
                                              cfg.patch_size);
    for (long tok : grid.fg_indices()) {
      const auto ij = grid.rep_pixel_ij[tok];
      const size_t pix = static_cast<size_t>(ij[1]) * sample.width + ij[0];
      pixels.emplace_back(grid.rep_pixel[tok][0], grid.rep_pixel[tok][1]);
      metric.push_back(sample.pose.s * geom::Vec3(sample.nocs_map[pix * 3],
                                                  sample.nocs_map[pix * 3 + 1],
                                                  sample.nocs_map[pix * 3 + 2]));
    }
    s_pred = sample.pose.s;
    extents = sample.extents;
  } else {
    net::ForwardOutputs fwd = model->forward(sample, spec.s_b, false);
    if (!fwd.ok) {
      std::printf("pose: FAILED (%s)\n", fwd.skip_reason.c_str());
      return 0;
    }
    pixels = fwd.corr.pixels;
    metric = fwd.corr.metric;
    s_pred = fwd.scale.s;
    extents = fwd.pred_extents;
  }

  pnp::RansacConfig rc = ransac_config(cfg);
  rc.seed = derive_seed(args.seed ? *args.seed : cfg.seed, 0xEF00 + index);
  const pnp::PnPResult res = pnp::ransac_pnp(pixels, metric, sample.K, rc);

  long inliers = 0;
  for (uint8_t f : res.inlier_flags) inliers += f;
  if (!res.success) {
    std::printf("pose: FAILED\ninliers: %ld / %zu\n", inliers, pixels.size());
  } else {
    const geom::Vec3 aa = geom::rotation_to_axis_angle(res.R);
    std::printf("pose: OK\n");
    std::printf("axis_angle: %.9f %.9f %.9f\n", aa.x(), aa.y(), aa.z());
    for (int r = 0; r < 3; ++r)
      std::printf("R: %12.9f %12.9f %12.9f\n", res.R(r, 0), res.R(r, 1), res.R(r, 2));
    std::printf("t: %.9f %.9f %.9f\n", res.t.x(), res.t.y(), res.t.z());
    std::printf("s: %.9f\n", s_pred);
    std::printf("inliers: %ld / %zu\n", inliers, pixels.size());
    std::printf("reproj_rmse_px: %.6f\n", res.reproj_rmse);
  }

  const std::string out_dir = args.out.empty() ? std::string(".") : args.out;
  std::filesystem::create_directories(out_dir);
  std::optional<geom::Pose> pred;
  if (res.success) pred = geom::Pose{res.R, res.t, s_pred};
  const std::string overlay = out_dir + "/overlay_" + synth::split_name(split) + "_" +
                              std::to_string(index) + ".ppm";
  eval::write_overlay_ppm(overlay, sample.image, sample.height, sample.width, sample.K,
                          sample.pose, sample.extents, pred, extents);
  std::printf("overlay: %s\n", overlay.c_str());
  return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
  const run::RunConfig cfg = resolve_config(args);
  const auto reports = run::gradient_suite(cfg.seed);
  bool all_pass = true;
  std::printf("%-18s %12s %8s %s\n", "op", "max_rel_err", "checked", "status");
  for (const auto& r : reports) {
    all_pass &= r.pass;
    std::printf("%-18s %12.3e %8ld %s\n", r.name.c_str(), r.max_rel_err, r.checked,
                r.pass ? "PASS" : "FAIL");
  }
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-only category-level 6D pose estimation on synthetic desk scenes"};
  app.require_subcommand(1);

  CommonArgs args;
  uint64_t seed_val = 0;
  double lambda3_val = 0;
  int workers_val = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "config file (key = value)");
    sub->add_option("--dataset", args.dataset, "dataset directory");
    sub->add_option("--checkpoint", args.checkpoint, "checkpoint file");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", seed_val, "seed override")->each([&](const std::string&) {
      args.seed = seed_val;
    });
    sub->add_option("--lambda3", lambda3_val, "guidance weight override (ablation)")
        ->each([&](const std::string&) { args.lambda3 = lambda3_val; });
    sub->add_option("--workers", workers_val, "worker threads for generation/evaluation")
        ->each([&](const std::string&) { args.workers = workers_val; });
    sub->add_flag("--oracle", args.oracle, "use ground-truth correspondences");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);
  CLI::App* train = app.add_subcommand("train", "train the network");
  add_common(train);
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate on the test split");
  add_common(eval_cmd);
  CLI::App* infer = app.add_subcommand("infer", "single-sample inference + overlay");
  add_common(infer);
  std::string sample_ref = "0";
  infer->add_option("sample", sample_ref, "sample id: [split/]index (default test/0)");
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(args);
    if (train->parsed()) return cmd_train(args);
    if (eval_cmd->parsed()) return cmd_eval(args);
    if (infer->parsed()) return cmd_infer(args, sample_ref);
    if (gc->parsed()) return cmd_gradcheck(args);
  } catch (const rgbpose::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const rgbpose::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
