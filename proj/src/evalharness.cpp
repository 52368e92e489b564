#include "rgbpose/evalharness.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rgbpose::eval {

using geom::Symmetry;
using synth::SceneSample;
using synth::Split;

SampleScore score_sample(const std::optional<PredictedPose>& pred, const geom::Pose& gt,
                         const geom::Vec3& gt_extents, Symmetry sym, int iou_grid) {
  SampleScore s;
  if (!pred) {
    s.failure = true;
    s.rot_deg = 180.0;
    s.trans_m = 1e9;
    return s;
  }
  const geom::PoseErrors e =
      geom::pose_errors(pred->pose, pred->extents, gt, gt_extents, sym, iou_grid);
  s.rot_deg = e.rot_deg;
  s.trans_m = e.trans_m;
  s.iou = e.iou;
  s.iou50 = e.iou >= 0.5;
  s.iou75 = e.iou >= 0.75;
  s.cm10 = e.trans_m < 0.10;
  s.deg10 = e.rot_deg < 10.0;
  s.deg10cm10 = s.cm10 && s.deg10;
  return s;
}

void MetricReport::finalize() {
  samples = 0;
  failures = 0;
  int cats = 0;
  iou50 = iou75 = cm10 = deg10 = deg10cm10 = 0;
  for (const auto& c : per_category) {
    samples += c.samples;
    failures += c.failures;
    if (c.samples == 0) continue;
    ++cats;
    iou50 += c.rate_iou50();
    iou75 += c.rate_iou75();
    cm10 += c.rate_cm10();
    deg10 += c.rate_deg10();
    deg10cm10 += c.rate_both();
  }
  if (cats > 0) {
    iou50 /= cats;
    iou75 /= cats;
    cm10 /= cats;
    deg10 /= cats;
    deg10cm10 /= cats;
  }
}

MetricReport evaluate(const net::Model* model, const synth::DatasetReader& data, Split split,
                      const EvalOptions& opts) {
  if (!opts.oracle) {
    if (!model) throw ConfigError("evaluate: model required unless oracle mode");
    const auto& c = model->cfg;
    if (c.image_size != data.config().image_size)
      throw ConfigError("evaluate: checkpoint image_size " + std::to_string(c.image_size) +
                        " != dataset " + std::to_string(data.config().image_size));
    if (c.n_prior != data.config().n_prior)
      throw ConfigError("evaluate: checkpoint n_prior " + std::to_string(c.n_prior) +
                        " != dataset " + std::to_string(data.config().n_prior));
  }
  const int patch = model ? model->cfg.patch_size : 0;

  const int n = data.count(split);
  const auto& cats = data.categories();
  std::vector<SampleScore> scores(n);
  std::vector<int> sample_cat(n);

#ifdef _OPENMP
  if (opts.workers > 0) omp_set_num_threads(opts.workers);
#endif
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const SceneSample sample = data.load(split, i);
    sample_cat[i] = sample.category;
    const auto& spec = cats[sample.category];
    const Symmetry sym = spec.symmetric ? Symmetry::AxisY : Symmetry::None;

    std::vector<geom::Vec2> pixels;
    geom::Points metric;
    double s_pred = 0.0;
    geom::Vec3 extents_pred = geom::Vec3::Zero();
    bool have_corr = false;

    if (opts.oracle) {
      const int p = opts.oracle_patch > 0 ? opts.oracle_patch : (patch > 0 ? patch : 8);
      net::PatchGrid grid = net::patch_geometry(sample.mask, sample.height, sample.width, p);
      for (long tok : grid.fg_indices()) {
        const auto ij = grid.rep_pixel_ij[tok];
        const size_t pix = static_cast<size_t>(ij[1]) * sample.width + ij[0];
        const geom::Vec3 nocs(sample.nocs_map[pix * 3], sample.nocs_map[pix * 3 + 1],
                              sample.nocs_map[pix * 3 + 2]);
        pixels.emplace_back(grid.rep_pixel[tok][0], grid.rep_pixel[tok][1]);
        metric.push_back(sample.pose.s * nocs);
      }
      s_pred = sample.pose.s;
      extents_pred = sample.extents;
      have_corr = !pixels.empty();
    } else {
      net::ForwardOutputs fwd = model->forward(sample, spec.s_b, false);
      if (fwd.ok) {
        pixels = fwd.corr.pixels;
        metric = fwd.corr.metric;
        s_pred = fwd.scale.s;
        extents_pred = fwd.pred_extents;
        have_corr = true;
      }
    }

    std::optional<PredictedPose> pred;
    if (have_corr) {
      pnp::RansacConfig rc = opts.ransac;
      rc.seed = derive_seed(opts.seed, 0xEF00 + static_cast<uint64_t>(i));
      const pnp::PnPResult r = pnp::ransac_pnp(pixels, metric, sample.K, rc);
      if (r.success) {
        PredictedPose pp;
        pp.pose.R = r.R;
        pp.pose.t = r.t;
        pp.pose.s = s_pred;
        pp.extents = extents_pred;
        pred = pp;
      }
    }
    scores[i] = score_sample(pred, sample.pose, sample.extents, sym, opts.iou_grid);
  }

  MetricReport rep;
  rep.per_category.resize(cats.size());
  for (size_t c = 0; c < cats.size(); ++c) rep.per_category[c].name = cats[c].name;
  for (int i = 0; i < n; ++i) {
    CategoryScore& c = rep.per_category[sample_cat[i]];
    const SampleScore& s = scores[i];
    ++c.samples;
    if (s.failure) ++c.failures;
    c.iou50 += s.iou50;
    c.iou75 += s.iou75;
    c.cm10 += s.cm10;
    c.deg10 += s.deg10;
    c.deg10cm10 += s.deg10cm10;
  }
  rep.finalize();
  return rep;
}

namespace {
std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string format_report(const MetricReport& r) {
  std::ostringstream out;
  out << "rgbpose_report 1\n";
  out << "samples " << r.samples << "\n";
  out << "failures " << r.failures << "\n";
  out << "categories " << r.per_category.size() << "\n";
  for (const auto& c : r.per_category) {
    out << "category " << c.name << " samples " << c.samples << " failures " << c.failures
        << " iou50 " << fmt(c.rate_iou50()) << " iou75 " << fmt(c.rate_iou75()) << " cm10 "
        << fmt(c.rate_cm10()) << " deg10 " << fmt(c.rate_deg10()) << " deg10cm10 "
        << fmt(c.rate_both()) << "\n";
  }
  out << "overall iou50 " << fmt(r.iou50) << " iou75 " << fmt(r.iou75) << " cm10 "
      << fmt(r.cm10) << " deg10 " << fmt(r.deg10) << " deg10cm10 " << fmt(r.deg10cm10)
      << "\n";
  return out.str();
}

MetricReport parse_report(const std::string& text) {
  MetricReport r;
  std::istringstream in(text);
  std::string word;
  in >> word;
  if (word != "rgbpose_report") throw IoError("not a metric report");
  int version;
  in >> version;
  while (in >> word) {
    if (word == "samples") in >> r.samples;
    else if (word == "failures") in >> r.failures;
    else if (word == "categories") {
      int k;
      in >> k;
    } else if (word == "category") {
      CategoryScore c;
      std::string tag;
      double v50, v75, vcm, vdeg, vboth;
      in >> c.name >> tag >> c.samples >> tag >> c.failures >> tag >> v50 >> tag >> v75 >>
          tag >> vcm >> tag >> vdeg >> tag >> vboth;
      c.iou50 = std::lround(v50 * c.samples);
      c.iou75 = std::lround(v75 * c.samples);
      c.cm10 = std::lround(vcm * c.samples);
      c.deg10 = std::lround(vdeg * c.samples);
      c.deg10cm10 = std::lround(vboth * c.samples);
      r.per_category.push_back(c);
    } else if (word == "overall") {
      std::string tag;
      in >> tag >> r.iou50 >> tag >> r.iou75 >> tag >> r.cm10 >> tag >> r.deg10 >> tag >>
          r.deg10cm10;
    }
  }
  return r;
}

std::string compare_runs(const std::vector<std::pair<std::string, MetricReport>>& runs) {
  if (runs.size() < 2) throw UsageError("compare_runs: need at least 2 reports");
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s %7s %7s %7s %7s %10s\n", "config", "IoU50", "IoU75",
                "10cm", "10deg", "10deg10cm");
  out << buf;
  auto row = [&](const std::string& label, double a, double b, double c, double d, double e) {
    std::snprintf(buf, sizeof(buf), "%-24s %7.3f %7.3f %7.3f %7.3f %10.3f\n", label.c_str(),
                  a, b, c, d, e);
    out << buf;
  };
  for (const auto& [label, r] : runs) row(label, r.iou50, r.iou75, r.cm10, r.deg10, r.deg10cm10);
  const MetricReport& base = runs.front().second;
  for (size_t i = 1; i < runs.size(); ++i) {
    const MetricReport& r = runs[i].second;
    row("delta " + runs[i].first, r.iou50 - base.iou50, r.iou75 - base.iou75,
        r.cm10 - base.cm10, r.deg10 - base.deg10, r.deg10cm10 - base.deg10cm10);
  }
  return out.str();
}

ChanceBaseline random_pose_deg10_baseline(const synth::DatasetReader& data, Split split,
                                          int trials_per_category, uint64_t seed) {
  const auto& cats = data.categories();
  const int n = data.count(split);
  std::vector<std::vector<const synth::SampleMeta*>> by_cat(cats.size());
  for (int i = 0; i < n; ++i) {
    const auto& m = data.meta(split, i);
    by_cat[m.category].push_back(&m);
  }
  double mean = 0.0, var = 0.0;
  int used_cats = 0;
  for (size_t c = 0; c < cats.size(); ++c) {
    if (by_cat[c].empty()) continue;
    Rng rng(derive_seed(seed, 0xBA5E + c));
    const Symmetry sym = cats[c].symmetric ? Symmetry::AxisY : Symmetry::None;
    long hits = 0;
    for (int t = 0; t < trials_per_category; ++t) {
      const auto* meta = by_cat[c][t % by_cat[c].size()];
      const geom::Mat3 R = geom::random_rotation(rng);
      if (geom::rotation_error_deg(R, meta->pose.R, sym) < 10.0) ++hits;
    }
    const double p = static_cast<double>(hits) / trials_per_category;
    mean += p;
    var += p * (1.0 - p) / trials_per_category;
    ++used_cats;
  }
  ChanceBaseline out;
  if (used_cats > 0) {
    out.mean = mean / used_cats;
    out.stddev = std::sqrt(var) / used_cats;
  }
  return out;
}

}  // namespace rgbpose::eval
