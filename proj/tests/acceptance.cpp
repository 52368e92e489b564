// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy criteria (training runs) come last; artifacts live under
// ./acceptance_tmp for inspection.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rgbpose/evalharness.hpp"
#include "rgbpose/gradsuite.hpp"
#include "rgbpose/heads.hpp"
#include "rgbpose/losses.hpp"
#include "rgbpose/solver.hpp"
#include "rgbpose/trainer.hpp"

using namespace rgbpose;
using Clock = std::chrono::steady_clock;

namespace {

namespace fs = std::filesystem;
const std::string kTmp = "acceptance_tmp";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---- desk presets -------------------------------------------------------

run::RunConfig desk_config() {
  run::RunConfig cfg;  // defaults are the desk shape already
  cfg.epochs = 30;
  cfg.checkpoint_every = 0;
  cfg.ransac_threshold_px = 2.0;
  return cfg;
}

run::RunConfig ablation_config() {
  run::RunConfig cfg = desk_config();
  cfg.train_per_category = 50;
  cfg.test_per_category = 15;
  cfg.epochs = 18;
  return cfg;
}

eval::EvalOptions eval_options(const run::RunConfig& cfg, uint64_t seed) {
  eval::EvalOptions opts;
  opts.seed = seed;
  opts.ransac.max_iterations = cfg.ransac_max_iterations;
  opts.ransac.inlier_threshold_px = cfg.ransac_threshold_px;
  opts.ransac.confidence = cfg.ransac_confidence;
  opts.ransac.min_inliers = cfg.ransac_min_inliers;
  opts.ransac.refine_iterations = cfg.ransac_refine_iterations;
  opts.iou_grid = cfg.iou_grid;
  return opts;
}

// ---- criterion 1: gradient suite ----------------------------------------

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  const auto reports = run::gradient_suite(1);
  double worst = 0.0;
  std::string failed;
  for (const auto& r : reports) {
    worst = std::max(worst, r.max_rel_err);
    if (!r.pass) failed += " " + r.name;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failed.empty() && secs < 60.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu checks, max rel err %.2e, %.1f s%s%s",
                reports.size(), worst, secs, failed.empty() ? "" : ", failed:",
                failed.c_str());
  o.detail = buf;
  return o;
}

// ---- criterion 2: geometry exactness -------------------------------------

Outcome criterion_geometry() {
  Rng rng(2);
  double worst_rt = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    geom::Pose pose;
    pose.R = geom::random_rotation(rng);
    pose.t = geom::Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2));
    pose.s = rng.uniform(0.2, 2.0);
    geom::Points pts;
    for (int i = 0; i < 10; ++i)
      pts.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const geom::Points rt = geom::from_nocs(geom::to_nocs(pts, pose), pose);
    for (size_t i = 0; i < pts.size(); ++i)
      worst_rt = std::max(worst_rt, (rt[i] - pts[i]).norm());
  }

  double worst_um = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    geom::Pose pose;
    pose.R = geom::random_rotation(rng);
    pose.t = geom::Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pose.s = rng.uniform(0.3, 3.0);
    geom::Points src;
    for (int i = 0; i < 50; ++i)
      src.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const geom::Points dst = geom::from_nocs(src, pose);
    const geom::Pose rec = geom::umeyama_align(src, dst);
    worst_um = std::max({worst_um, (rec.R - pose.R).cwiseAbs().maxCoeff(),
                         (rec.t - pose.t).norm(), std::fabs(rec.s - pose.s)});
  }

  // axis-aligned closed-form IoU oracle
  double worst_iou = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto rand_box = [&] {
      geom::OrientedBox b;
      b.center = geom::Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                            rng.uniform(-0.3, 0.3));
      b.R = geom::Mat3::Identity();
      b.extents = geom::Vec3(rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0),
                             rng.uniform(0.3, 1.0));
      return b;
    };
    const geom::OrientedBox a = rand_box(), b = rand_box();
    double inter = 1.0;
    for (int c = 0; c < 3; ++c) {
      const double lo = std::max(a.center[c] - a.extents[c] / 2, b.center[c] - b.extents[c] / 2);
      const double hi = std::min(a.center[c] + a.extents[c] / 2, b.center[c] + b.extents[c] / 2);
      inter *= std::max(0.0, hi - lo);
    }
    const double exact = inter <= 0 ? 0.0 : inter / (a.volume() + b.volume() - inter);
    worst_iou = std::max(worst_iou, std::fabs(geom::box_iou(a, b, 40) - exact));
  }

  Outcome o;
  o.pass = worst_rt <= 1e-9 && worst_um <= 1e-9 && worst_iou <= 0.01;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "roundtrip %.2e, umeyama %.2e, iou-vs-closed-form %.4f", worst_rt, worst_um,
                worst_iou);
  o.detail = buf;
  return o;
}

// ---- criterion 3: PnP exactness and robustness ----------------------------

Outcome criterion_pnp() {
  const auto t0 = Clock::now();
  const geom::Intrinsics K{128, 128, 32, 32};

  double worst_rot = 0, worst_t = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const geom::Mat3 R = geom::random_rotation(rng);
    const geom::Vec3 t(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                       rng.uniform(0.6, 1.2));
    std::vector<geom::Vec3> pts;
    std::vector<geom::Vec2> px;
    for (int i = 0; i < 100; ++i) {
      pts.emplace_back(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                       rng.uniform(-0.15, 0.15));
      px.push_back(geom::project_point(R * pts.back() + t, K));
    }
    pnp::RansacConfig cfg;
    cfg.seed = seed;
    const auto res = pnp::ransac_pnp(px, pts, K, cfg);
    if (!res.success) {
      return {false, "noise-free ransac failed"};
    }
    const double c = std::clamp(((res.R * R.transpose()).trace() - 1.0) * 0.5, -1.0, 1.0);
    worst_rot = std::max(worst_rot, std::acos(c));
    worst_t = std::max(worst_t, (res.t - t).norm());
  }

  int good = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(4000 + trial);
    const geom::Mat3 R = geom::random_rotation(rng);
    const geom::Vec3 t(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                       rng.uniform(0.6, 1.2));
    std::vector<geom::Vec3> pts;
    std::vector<geom::Vec2> px;
    for (int i = 0; i < 100; ++i) {
      pts.emplace_back(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15),
                       rng.uniform(-0.15, 0.15));
      px.push_back(geom::project_point(R * pts.back() + t, K));
    }
    Rng noise(8000 + trial);
    for (auto& p : px) p += geom::Vec2(0.5 * noise.normal(), 0.5 * noise.normal());
    for (int k = 0; k < 30; ++k) {
      const int idx = static_cast<int>(noise.uniform_index(100));
      px[idx] = geom::Vec2(noise.uniform(0, 64), noise.uniform(0, 64));
    }
    pnp::RansacConfig cfg;
    cfg.seed = 100 + trial;
    cfg.inlier_threshold_px = 2.0;
    const auto res = pnp::ransac_pnp(px, pts, K, cfg);
    if (!res.success) continue;
    const double c = std::clamp(((res.R * R.transpose()).trace() - 1.0) * 0.5, -1.0, 1.0);
    const double rot_deg = std::acos(c) * 180.0 / M_PI;
    if (rot_deg < 2.0 && (res.t - t).norm() / t.z() < 0.01) ++good;
  }
  const double secs = seconds_since(t0);

  Outcome o;
  o.pass = worst_rot <= 1e-6 && worst_t <= 1e-8 && good >= 190 && secs < 30.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "noise-free %.2e rad / %.2e m; robust %d/%d trials, %.1f s", worst_rot,
                worst_t, good, trials, secs);
  o.detail = buf;
  return o;
}

// ---- criterion 4: oracle pipeline ceiling ---------------------------------

Outcome criterion_oracle() {
  run::RunConfig cfg = desk_config();
  cfg.train_per_category = 0;
  cfg.test_per_category = 34;     // 204 noise-free samples
  cfg.n_render_points = 98304;    // dense surface: sharp per-pixel ground truth
  const std::string dir = kTmp + "/oracle_ds";
  if (!fs::exists(dir + "/manifest.txt"))
    synth::write_dataset(run::gen_config(cfg), 404, dir);
  const auto reader = synth::DatasetReader::open(dir);

  eval::EvalOptions opts = eval_options(cfg, 404);
  opts.oracle = true;
  opts.oracle_patch = 1;  // ground-truth correspondence at every masked pixel
  const auto rep = eval::evaluate(nullptr, reader, synth::Split::Test, opts);

  const double mn = std::min({rep.iou50, rep.iou75, rep.cm10, rep.deg10, rep.deg10cm10});
  Outcome o;
  o.pass = mn >= 0.99;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%d samples: IoU50 %.3f IoU75 %.3f 10cm %.3f 10deg %.3f both %.3f",
                rep.samples, rep.iou50, rep.iou75, rep.cm10, rep.deg10, rep.deg10cm10);
  o.detail = buf;
  return o;
}

// ---- criterion 5: learning smoke test --------------------------------------

Outcome criterion_learning() {
  const auto t0 = Clock::now();

  // (a) one-sample overfit
  run::RunConfig ocfg = desk_config();
  ocfg.seed = 21;
  net::Model omodel = net::Model::build(ocfg);
  const synth::GenConfig ogen = run::gen_config(ocfg);
  const auto& spec = ogen.categories[3];
  const auto prior = synth::make_prior(spec, derive_seed(404, 0x50 + spec.id), 16,
                                       ocfg.n_prior, ocfg.n_model_points);
  const auto sample = synth::sample_scene(ogen, spec, prior, 404, synth::Split::Train, 0);
  run::AdamState adam;
  adam.lr = ocfg.learning_rate;
  adam.init(omodel.params);
  double first = 0, best = 1e300;
  for (int step = 0; step < 300; ++step) {
    diff::TapeScope scope;
    auto fwd = omodel.forward(sample, spec.s_b, true);
    if (!fwd.ok) return {false, "overfit sample lost its foreground"};
    auto b = run::sample_loss(omodel, fwd, sample, spec.s_b);
    if (step == 0) first = b.total;
    best = std::min(best, b.total);
    diff::backward(b.total_t);
    adam.step(omodel.params);
    omodel.params.zero_grads();
  }
  const bool overfit_ok = best <= 0.1 * first;

  // (b) 600-sample desk training run
  run::RunConfig cfg = desk_config();
  const std::string ds = kTmp + "/desk_ds";
  if (!fs::exists(ds + "/manifest.txt")) synth::write_dataset(run::gen_config(cfg), cfg.seed, ds);
  const auto reader = synth::DatasetReader::open(ds);

  net::Model untrained = net::Model::build(cfg);
  const auto rep_untrained =
      eval::evaluate(&untrained, reader, synth::Split::Test, eval_options(cfg, 5));

  net::Model model = net::Model::build(cfg);
  std::ofstream log(kTmp + "/desk_train_log.txt");
  run::TrainOptions topts;
  topts.out_dir = kTmp + "/desk_run";
  run::train(model, reader, topts, log);
  const double train_secs = seconds_since(t0);

  const auto rep = eval::evaluate(&model, reader, synth::Split::Test, eval_options(cfg, 5));
  {
    std::ofstream f(kTmp + "/desk_eval_report.txt");
    f << eval::format_report(rep);
  }

  const bool improves = rep.iou50 > rep_untrained.iou50 && rep.iou75 > rep_untrained.iou75 &&
                        rep.cm10 > rep_untrained.cm10 && rep.deg10 > rep_untrained.deg10 &&
                        rep.deg10cm10 > rep_untrained.deg10cm10;

  const auto chance = eval::random_pose_deg10_baseline(reader, synth::Split::Test, 2000, 5);
  const bool beats_chance = rep.deg10 >= chance.mean + 5.0 * chance.stddev;

  Outcome o;
  o.pass = overfit_ok && improves && beats_chance && train_secs < 1800.0;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "overfit %.1f%% drop; trained[%.2f %.2f %.2f %.2f %.2f] vs untrained[%.2f "
                "%.2f %.2f %.2f %.2f]; 10deg %.3f vs chance %.4f+5*%.4f; %.0f s",
                100.0 * (1.0 - best / std::max(first, 1e-12)), rep.iou50, rep.iou75, rep.cm10,
                rep.deg10, rep.deg10cm10, rep_untrained.iou50, rep_untrained.iou75,
                rep_untrained.cm10, rep_untrained.deg10, rep_untrained.deg10cm10, rep.deg10,
                chance.mean, chance.stddev, train_secs);
  o.detail = buf;
  return o;
}

// ---- criterion 6: ablation direction ---------------------------------------

Outcome criterion_ablations() {
  run::RunConfig base = ablation_config();
  const std::string ds = kTmp + "/abl_ds";
  if (!fs::exists(ds + "/manifest.txt")) synth::write_dataset(run::gen_config(base), 606, ds);
  const auto reader = synth::DatasetReader::open(ds);

  const uint64_t replicate_seeds[3] = {11, 22, 33};
  struct AblationSpec {
    const char* name;
    std::function<void(run::RunConfig&)> apply;
  };
  const std::vector<AblationSpec> ablations = {
      {"guidance-off", [](run::RunConfig& c) { c.lambda3 = 0.0; }},
      {"fusion-concat", [](run::RunConfig& c) { c.fusion_mode = "concat"; }},
      {"scale-direct", [](run::RunConfig& c) { c.scale_mode = "direct"; }},
  };

  auto train_and_score = [&](const run::RunConfig& cfg) {
    net::Model model = net::Model::build(cfg);
    std::ostringstream log;
    run::TrainOptions topts;  // no checkpoint dir: keep the 12 runs light
    run::train(model, reader, topts, log);
    return eval::evaluate(&model, reader, synth::Split::Test, eval_options(cfg, 6));
  };

  int wins[3] = {0, 0, 0};
  std::ostringstream tables;
  for (uint64_t seed : replicate_seeds) {
    run::RunConfig full_cfg = base;
    full_cfg.seed = seed;
    const auto full = train_and_score(full_cfg);
    std::vector<std::pair<std::string, eval::MetricReport>> runs{{"full", full}};
    for (size_t a = 0; a < ablations.size(); ++a) {
      run::RunConfig cfg = base;
      cfg.seed = seed;
      ablations[a].apply(cfg);
      const auto rep = train_and_score(cfg);
      runs.emplace_back(ablations[a].name, rep);
      if (full.deg10cm10 >= rep.deg10cm10) ++wins[a];
    }
    tables << "replicate seed " << seed << "\n" << eval::compare_runs(runs) << "\n";
  }
  {
    std::ofstream f(kTmp + "/ablation_tables.txt");
    f << tables.str();
  }

  Outcome o;
  o.pass = wins[0] >= 2 && wins[1] >= 2 && wins[2] >= 2;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "full >= ablation on 10deg10cm: guidance %d/3, fusion %d/3, scale %d/3 "
                "(tables in %s/ablation_tables.txt)",
                wins[0], wins[1], wins[2], kTmp.c_str());
  o.detail = buf;
  return o;
}

// ---- criterion 7: equation spot-checks --------------------------------------

Outcome criterion_equations() {
  using diff::Tensor;
  double worst = 0.0;

  // s = s_b + s_b * dS through the scale head
  {
    diff::Mlp const_head;
    const_head.layers = {{Tensor::zeros(12, 1, true), Tensor::from({0.1}, 1, 1, true)}};
    Tensor F_ins = Tensor::zeros(2, 8);
    Tensor F_fuse = Tensor::zeros(2, 4);
    const auto sp = net::predict_scale(F_ins, F_fuse, 0.2, const_head, net::ScaleMode::Residual);
    worst = std::max(worst, std::fabs(sp.s - 0.22));
  }
  // dS_hat = (s_gt - s_b)/s_b through the scale loss
  {
    Tensor zero = Tensor::from({0.0}, 1, 1);
    worst = std::max(worst, std::fabs(loss::scale_loss(zero, 0.25, 0.2, false).value() - 0.25));
  }
  // lambda-weighted total with the published weights
  {
    Tensor one = Tensor::scalar(1.0);
    Tensor z = Tensor::scalar(0.0);
    const auto b = loss::total_loss(one, one, one, z, 1.0, 0.1, 100.0);
    worst = std::max(worst, std::fabs(b.total - 101.1));
  }

  Outcome o;
  o.pass = worst <= 1e-12;
  char buf[80];
  std::snprintf(buf, sizeof(buf), "max deviation %.2e", worst);
  o.detail = buf;
  return o;
}

// ---- criterion 8: reproducibility -------------------------------------------

Outcome criterion_reproducibility() {
  run::RunConfig cfg = desk_config();
  cfg.train_per_category = 4;
  cfg.test_per_category = 2;
  cfg.epochs = 2;
  cfg.checkpoint_every = 1;

  const std::string dsa = kTmp + "/repro_ds_a", dsb = kTmp + "/repro_ds_b";
  fs::remove_all(dsa);
  fs::remove_all(dsb);
  synth::write_dataset(run::gen_config(cfg), 808, dsa);
  synth::write_dataset(run::gen_config(cfg), 808, dsb);
  const bool gen_ok = slurp(dsa + "/manifest.txt") == slurp(dsb + "/manifest.txt") &&
                      slurp(dsa + "/payload.bin") == slurp(dsb + "/payload.bin");

  const auto reader = synth::DatasetReader::open(dsa);

  std::ostringstream log1, log2, log3;
  const std::string runa = kTmp + "/repro_run_a", runc = kTmp + "/repro_run_c";
  fs::remove_all(runa);
  fs::remove_all(runc);
  {
    net::Model m = net::Model::build(cfg);
    run::TrainOptions o;
    o.out_dir = runa;
    run::train(m, reader, o, log1);
  }
  {
    net::Model m = net::Model::build(cfg);
    run::TrainOptions o;
    o.out_dir = "";
    run::train(m, reader, o, log2);
  }
  const bool train_ok = log1.str() == log2.str();

  // resume: 1 epoch, then continue to 2
  {
    net::Model m = net::Model::build(cfg);
    run::TrainOptions o;
    o.out_dir = runc;
    o.epochs = 1;
    run::train(m, reader, o, log3);
    auto loaded = run::load_checkpoint(runc + "/ckpt_final.ckpt");
    run::TrainOptions o2;
    o2.out_dir = runc;
    o2.epochs = 2;
    run::train(loaded.model, reader, o2, log3, &loaded.state);
  }
  const bool resume_ok = log3.str() == log1.str() &&
                         slurp(runa + "/ckpt_final.ckpt") == slurp(runc + "/ckpt_final.ckpt");

  // eval determinism
  auto loaded = run::load_checkpoint(runa + "/ckpt_final.ckpt");
  const auto r1 =
      eval::evaluate(&loaded.model, reader, synth::Split::Test, eval_options(cfg, 8));
  const auto r2 =
      eval::evaluate(&loaded.model, reader, synth::Split::Test, eval_options(cfg, 8));
  const bool eval_ok = eval::format_report(r1) == eval::format_report(r2);

  Outcome o;
  o.pass = gen_ok && train_ok && resume_ok && eval_ok;
  std::ostringstream d;
  d << "gen " << (gen_ok ? "ok" : "MISMATCH") << ", train " << (train_ok ? "ok" : "MISMATCH")
    << ", resume " << (resume_ok ? "ok" : "MISMATCH") << ", eval "
    << (eval_ok ? "ok" : "MISMATCH");
  o.detail = d.str();
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", criterion_gradients},
      {2, "geometry exactness", criterion_geometry},
      {3, "pnp exactness and robustness", criterion_pnp},
      {4, "oracle pipeline ceiling", criterion_oracle},
      {7, "equation spot-checks", criterion_equations},
      {8, "reproducibility", criterion_reproducibility},
      {5, "learning smoke test", criterion_learning},
      {6, "ablation direction", criterion_ablations},
  };

  fs::create_directories(kTmp);
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all_pass &= o.pass;
    std::printf("[%s] criterion %d: %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
