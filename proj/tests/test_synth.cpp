#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rgbpose/dataset.hpp"
#include "rgbpose/synth.hpp"

using namespace rgbpose;
using geom::Vec3;
using synth::Split;

namespace {

synth::GenConfig small_gen() {
  synth::GenConfig cfg;
  cfg.image_size = 32;
  cfg.n_prior = 32;
  cfg.n_model_points = 512;
  cfg.n_render_points = 8192;
  cfg.prior_instances = 8;
  cfg.train_per_category = 2;
  cfg.test_per_category = 1;
  cfg.focal_factor = 2.0;
  return cfg;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  REQUIRE(f);
  std::vector<char> data(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(data.data(), static_cast<std::streamsize>(data.size()));
  return data;
}

double hausdorff(const geom::Points& a, const geom::Points& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = 1e30;
    for (const auto& q : b) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("make_shape: determinism and unit-diagonal normalization") {
  const auto cats = synth::default_categories();
  for (const auto& spec : cats) {
    const auto m1 = synth::make_shape(spec, 77, 2048, Split::Train);
    const auto m2 = synth::make_shape(spec, 77, 2048, Split::Train);
    REQUIRE(m1.points.size() == m2.points.size());
    for (size_t i = 0; i < m1.points.size(); ++i)
      CHECK((m1.points[i] - m2.points[i]).norm() == 0.0);
    CHECK(std::fabs(m1.extents.norm() - 1.0) <= 1e-9);
  }
}

TEST_CASE("can points are rotationally symmetric up to sampling resolution") {
  const auto cats = synth::default_categories();
  const auto& can = synth::category_by_name(cats, "can");
  const int n = 2048;
  const auto model = synth::make_shape(can, 3, n, Split::Train);
  const int k = synth::lathe_angular_samples(n);

  double r_max = 0.0;
  for (const auto& p : model.points)
    r_max = std::max(r_max, std::hypot(p.x(), p.z()));

  geom::Points rotated;
  const geom::Mat3 R = geom::rotation_about_y(37.0 * M_PI / 180.0);
  for (const auto& p : model.points) rotated.push_back(R * p);

  const double resolution = 2.0 * r_max * std::sin(M_PI / (2.0 * k));
  CHECK(hausdorff(rotated, model.points) <= resolution + 1e-12);
}

TEST_CASE("mug handle breaks rotational symmetry") {
  const auto cats = synth::default_categories();
  const auto& mug = synth::category_by_name(cats, "mug");
  const auto model = synth::make_shape(mug, 3, 2048, Split::Train);
  geom::Points rotated;
  const geom::Mat3 R = geom::rotation_about_y(M_PI);
  for (const auto& p : model.points) rotated.push_back(R * p);
  CHECK(hausdorff(rotated, model.points) > 0.05);
}

TEST_CASE("make_prior: cardinality, renormalized diagonal, single instance") {
  const auto cats = synth::default_categories();
  const auto& bowl = synth::category_by_name(cats, "bowl");
  const auto prior = synth::make_prior(bowl, 9, 8, 128, 1024);
  CHECK(prior.size() == 128);

  Vec3 lo = Vec3::Constant(1e30), hi = -lo;
  for (const auto& p : prior) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  CHECK(std::fabs((hi - lo).norm() - 1.0) <= 1e-6);

  const auto single = synth::make_prior(bowl, 9, 1, 64, 1024);
  CHECK(single.size() == 64);
}

TEST_CASE("paper-size prior has exactly 1024 points") {
  const auto cats = synth::default_categories();
  const auto prior = synth::make_prior(cats[0], 4, 8, 1024, 4096);
  CHECK(prior.size() == 1024);
}

TEST_CASE("render: centered object has mask centroid at the principal point") {
  synth::GenConfig cfg = small_gen();
  const auto cats = cfg.categories;
  const auto& can = synth::category_by_name(cats, "can");
  const auto model = synth::make_shape(can, 21, cfg.n_render_points, Split::Train);

  geom::Pose pose;
  pose.s = can.s_b;
  pose.t = Vec3(0, 0, 3.0 * can.s_b);
  const geom::Intrinsics K = synth::intrinsics_for(cfg);

  std::vector<double> image, nocs;
  std::vector<uint8_t> mask;
  synth::render_scene(model.points, pose, K, cfg.image_size, cfg.image_size, image, mask, nocs);

  double cx = 0, cy = 0;
  long count = 0;
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size; ++x)
      if (mask[y * cfg.image_size + x]) {
        cx += x + 0.5;
        cy += y + 0.5;
        ++count;
      }
  REQUIRE(count > 0);
  CHECK(std::fabs(cx / count - K.cx) <= 1.0);
  CHECK(std::fabs(cy / count - K.cy) <= 1.0);
}

TEST_CASE("render: doubling depth roughly halves the mask diameter") {
  synth::GenConfig cfg = small_gen();
  cfg.image_size = 64;
  const auto& bowl = synth::category_by_name(cfg.categories, "bowl");
  const auto model = synth::make_shape(bowl, 31, cfg.n_render_points, Split::Train);
  const geom::Intrinsics K = synth::intrinsics_for(cfg);

  auto diameter_at = [&](double tz) {
    geom::Pose pose;
    pose.s = 0.2;
    pose.t = Vec3(0, 0, tz);
    std::vector<double> image, nocs;
    std::vector<uint8_t> mask;
    synth::render_scene(model.points, pose, K, cfg.image_size, cfg.image_size, image, mask,
                        nocs);
    int x0 = 1 << 20, x1 = -1, y0 = 1 << 20, y1 = -1;
    for (int y = 0; y < cfg.image_size; ++y)
      for (int x = 0; x < cfg.image_size; ++x)
        if (mask[y * cfg.image_size + x]) {
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    return std::max(x1 - x0 + 1, y1 - y0 + 1);
  };
  const double near = diameter_at(0.5);
  const double far = diameter_at(1.0);
  CHECK(std::fabs(near / far - 2.0) <= 0.2);  // within 10% of halving
}

TEST_CASE("render: object behind camera raises a generation error") {
  synth::GenConfig cfg = small_gen();
  const auto& can = synth::category_by_name(cfg.categories, "can");
  const auto model = synth::make_shape(can, 5, 2048, Split::Train);
  geom::Pose pose;
  pose.t = Vec3(0, 0, -1.0);
  std::vector<double> image, nocs;
  std::vector<uint8_t> mask;
  CHECK_THROWS_AS(synth::render_scene(model.points, pose, synth::intrinsics_for(cfg), 32, 32,
                                      image, mask, nocs),
                  GenerationError);
}

TEST_CASE("nocs_map consistency: every foreground pixel reprojects into itself") {
  synth::GenConfig cfg = small_gen();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto& spec = cfg.categories[trial % cfg.categories.size()];
    const auto prior = synth::make_prior(spec, 1, 8, cfg.n_prior, cfg.n_model_points);
    const auto s = synth::sample_scene(cfg, spec, prior, 1000 + trial, Split::Train, trial);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        const size_t pix = static_cast<size_t>(y) * s.width + x;
        if (!s.mask[pix]) {
          CHECK(std::isnan(s.nocs_map[pix * 3]));
          continue;
        }
        const Vec3 nocs(s.nocs_map[pix * 3], s.nocs_map[pix * 3 + 1], s.nocs_map[pix * 3 + 2]);
        CHECK(nocs.cwiseAbs().maxCoeff() <= 1.0);
        const Vec3 cam = s.pose.s * (s.pose.R * nocs) + s.pose.t;
        const geom::Vec2 px = geom::project_point(cam, s.K);
        worst = std::max({worst, std::fabs(px.x() - (x + 0.5)), std::fabs(px.y() - (y + 0.5))});
      }
  }
  CHECK(worst <= 0.51);
}

TEST_CASE("sample ground-truth scale residual lies in [-0.4, 0.4]") {
  synth::GenConfig cfg = small_gen();
  for (int trial = 0; trial < 200; ++trial) {
    const auto& spec = cfg.categories[trial % cfg.categories.size()];
    const uint64_t seed = rgbpose::derive_seed(
        55, (trial % 2 ? 0x100000ULL : 0x200000ULL) + spec.id * 65536ULL + trial);
    Rng rng(seed);
    (void)rng;
    // scale jitter bound is enforced by construction; verify via sampling
    const auto prior = synth::make_prior(spec, 1, 8, cfg.n_prior, cfg.n_model_points);
    const auto s = synth::sample_scene(cfg, spec, prior, 55, Split::Train, trial);
    const double delta = (s.pose.s - spec.s_b) / spec.s_b;
    CHECK(delta >= -0.4);
    CHECK(delta <= 0.4);
  }
}

TEST_CASE("scale distribution mean within 5% of s_b over 1000 samples") {
  synth::GenConfig cfg = small_gen();
  cfg.n_render_points = 512;  // pose sampling only; keep it fast
  const auto& can = synth::category_by_name(cfg.categories, "can");
  const auto prior = synth::make_prior(can, 1, 8, cfg.n_prior, 512);
  double mean = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i)
    mean += synth::sample_scene(cfg, can, prior, 777, Split::Train, i).pose.s;
  mean /= n;
  CHECK(std::fabs(mean - can.s_b) <= 0.05 * can.s_b);
}

TEST_CASE("dataset: identical seed produces identical bytes; reload round-trips") {
  namespace fs = std::filesystem;
  const synth::GenConfig cfg = small_gen();
  const std::string dir1 = "synth_test_ds1", dir2 = "synth_test_ds2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  synth::write_dataset(cfg, 4242, dir1);
  synth::write_dataset(cfg, 4242, dir2);
  CHECK(slurp(dir1 + "/manifest.txt") == slurp(dir2 + "/manifest.txt"));
  CHECK(slurp(dir1 + "/payload.bin") == slurp(dir2 + "/payload.bin"));

  const auto reader = synth::DatasetReader::open(dir1);
  CHECK(reader.count(Split::Train) == 12);
  CHECK(reader.count(Split::Test) == 6);
  CHECK(reader.categories().size() == 6);

  // regenerating one sample from the manifest seed reproduces the payload
  const auto& meta = reader.meta(Split::Train, 3);
  const auto& spec = reader.categories()[meta.category];
  const auto loaded = reader.load(Split::Train, 3);
  const auto regen =
      synth::sample_scene(reader.config(), spec, reader.prior(meta.category), reader.seed(),
                          Split::Train, meta.index);
  REQUIRE(regen.model_points.size() == loaded.model_points.size());
  for (size_t i = 0; i < regen.image.size(); ++i)
    CHECK(static_cast<float>(regen.image[i]) == static_cast<float>(loaded.image[i]));
  CHECK(regen.mask == loaded.mask);
  CHECK(regen.pose.s == loaded.pose.s);
  CHECK((regen.pose.t - loaded.pose.t).norm() == 0.0);

  // mask is exactly the finite part of the nocs map
  for (size_t pix = 0; pix < loaded.mask.size(); ++pix)
    CHECK(static_cast<bool>(loaded.mask[pix]) == !std::isnan(loaded.nocs_map[pix * 3]));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("dataset: empty config writes a valid empty manifest") {
  namespace fs = std::filesystem;
  synth::GenConfig cfg = small_gen();
  cfg.train_per_category = 0;
  cfg.test_per_category = 0;
  const std::string dir = "synth_test_empty";
  fs::remove_all(dir);
  synth::write_dataset(cfg, 1, dir);
  const auto reader = synth::DatasetReader::open(dir);
  CHECK(reader.count(Split::Train) == 0);
  CHECK(reader.count(Split::Test) == 0);
  fs::remove_all(dir);
}

TEST_CASE("train and test shape parameters are disjoint") {
  // same seed, different split: every drawn parameter differs because the
  // split u-ranges are disjoint
  const auto cats = synth::default_categories();
  for (const auto& spec : cats) {
    const auto train = synth::make_shape(spec, 123, 512, Split::Train);
    const auto test = synth::make_shape(spec, 123, 512, Split::Test);
    CHECK(hausdorff(train.points, test.points) > 0.0);
  }
}

TEST_CASE("golden dataset: regeneration is byte-identical to the committed files") {
  namespace fs = std::filesystem;
  synth::GenConfig cfg;
  cfg.image_size = 16;
  cfg.n_prior = 16;
  cfg.n_model_points = 64;
  cfg.n_render_points = 2048;
  cfg.prior_instances = 8;
  cfg.train_per_category = 0;
  cfg.test_per_category = 1;
  const std::string out = "golden_regen";
  fs::remove_all(out);
  synth::write_dataset(cfg, 20260809, out);
  const std::string golden = std::string(RGBPOSE_SOURCE_DIR) + "/data/golden";
  CHECK(slurp(out + "/manifest.txt") == slurp(golden + "/manifest.txt"));
  CHECK(slurp(out + "/payload.bin") == slurp(golden + "/payload.bin"));
  fs::remove_all(out);
}
