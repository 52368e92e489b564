#include "rgbpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rgbpose::synth {

using geom::Mat3;
using geom::Points;
using geom::Vec3;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Shape parameters are drawn from disjoint sub-ranges per split.
double draw_param(const ParamRange& r, Rng& rng, Split split) {
  const double u = split == Split::Train ? rng.uniform(0.0, 0.45) : rng.uniform(0.55, 1.0);
  return r.lo + (r.hi - r.lo) * u;
}

struct DrawnParams {
  std::vector<double> v;
  double operator[](size_t i) const { return v[i]; }
};

DrawnParams draw_all(const CategorySpec& spec, Rng& rng, Split split) {
  DrawnParams p;
  p.v.reserve(spec.params.size());
  for (const auto& r : spec.params) p.v.push_back(draw_param(r, rng, split));
  return p;
}

// ---- lathe ------------------------------------------------------------

struct ProfilePoint {
  double r, y;
};

// Samples `rows` points along the polyline by arc length, then sweeps each
// around the y axis at `k` fixed angles. Layout depends only on (rows, k).
Points lathe(const std::vector<ProfilePoint>& profile, int rows, int k) {
  std::vector<double> seg_len;
  double total = 0.0;
  for (size_t i = 0; i + 1 < profile.size(); ++i) {
    const double dr = profile[i + 1].r - profile[i].r;
    const double dy = profile[i + 1].y - profile[i].y;
    seg_len.push_back(std::sqrt(dr * dr + dy * dy));
    total += seg_len.back();
  }
  Points out;
  out.reserve(static_cast<size_t>(rows) * k);
  for (int i = 0; i < rows; ++i) {
    const double target = total * (i + 0.5) / rows;
    double acc = 0.0;
    size_t seg = 0;
    while (seg + 1 < seg_len.size() && acc + seg_len[seg] < target) acc += seg_len[seg++];
    const double t = seg_len[seg] > 0 ? (target - acc) / seg_len[seg] : 0.0;
    const double r = profile[seg].r + t * (profile[seg + 1].r - profile[seg].r);
    const double y = profile[seg].y + t * (profile[seg + 1].y - profile[seg].y);
    for (int j = 0; j < k; ++j) {
      const double th = 2.0 * kPi * j / k;
      out.emplace_back(r * std::cos(th), y, r * std::sin(th));
    }
  }
  return out;
}

// Uniform grid over the six faces of a box, fixed per-face fractions so the
// layout is invariant to the box's actual aspect.
Points box_surface(const Vec3& half, int n) {
  Points out;
  out.reserve(static_cast<size_t>(n));
  // (axis, sign) pairs; flat fraction each.
  const int per_face = n / 6;
  for (int f = 0; f < 6; ++f) {
    const int axis = f / 2;
    const double sign = (f % 2 == 0) ? 1.0 : -1.0;
    const int g = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(per_face)))));
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b) {
        const double ua = (a + 0.5) / g * 2.0 - 1.0;
        const double ub = (b + 0.5) / g * 2.0 - 1.0;
        Vec3 p;
        p[axis] = sign * half[axis];
        p[(axis + 1) % 3] = ua * half[(axis + 1) % 3];
        p[(axis + 2) % 3] = ub * half[(axis + 2) % 3];
        out.push_back(p);
      }
  }
  return out;
}

Points transformed(const Points& pts, const Mat3& R, const Vec3& t) {
  Points out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(R * p + t);
  return out;
}

void append(Points& dst, const Points& src) { dst.insert(dst.end(), src.begin(), src.end()); }

// Tube swept along a circular arc in the x-y plane (the mug handle).
Points handle_arc(double cx, double cy, double arc_r, double tube_r, int n_arc, int n_ring) {
  Points out;
  out.reserve(static_cast<size_t>(n_arc) * n_ring);
  for (int i = 0; i < n_arc; ++i) {
    const double phi = (-70.0 + 140.0 * (i + 0.5) / n_arc) * kPi / 180.0;
    const Vec3 c(cx + arc_r * std::cos(phi), cy + arc_r * std::sin(phi), 0.0);
    const Vec3 n1(std::cos(phi), std::sin(phi), 0.0);  // radial, in-plane
    const Vec3 n2(0.0, 0.0, 1.0);
    for (int j = 0; j < n_ring; ++j) {
      const double a = 2.0 * kPi * j / n_ring;
      out.push_back(c + tube_r * (std::cos(a) * n1 + std::sin(a) * n2));
    }
  }
  return out;
}

void normalize_model(Points& pts, Vec3& extents) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const Vec3 size = hi - lo;
  const double diag = size.norm();
  for (auto& p : pts) p = (p - center) / diag;
  extents = size / diag;
}

}  // namespace

std::vector<CategorySpec> default_categories() {
  std::vector<CategorySpec> cats;
  cats.push_back({0, "bottle", 0.25, true,
                  {{"body_r", 0.32, 0.42}, {"neck_r", 0.10, 0.16}, {"body_frac", 0.50, 0.62}, {"aspect", 1.9, 2.6}}});
  cats.push_back({1, "bowl", 0.20, true,
                  {{"curve", 0.45, 0.70}, {"aspect", 0.32, 0.45}}});
  cats.push_back({2, "camera", 0.18, false,
                  {{"height", 0.55, 0.70}, {"depth", 0.35, 0.50}, {"lens_r", 0.16, 0.24}, {"lens_len", 0.25, 0.40}}});
  cats.push_back({3, "can", 0.15, true, {{"aspect", 1.1, 1.7}}});
  cats.push_back({4, "laptop", 0.40, false,
                  {{"depth", 0.60, 0.75}, {"screen_h", 0.55, 0.70}, {"open_deg", 100.0, 125.0}}});
  cats.push_back({5, "mug", 0.12, false,
                  {{"aspect", 0.90, 1.30}, {"handle_r", 0.28, 0.38}, {"tube_r", 0.055, 0.080}}});
  return cats;
}

const CategorySpec& category_by_name(const std::vector<CategorySpec>& cats,
                                     const std::string& name) {
  for (const auto& c : cats)
    if (c.name == name) return c;
  throw ConfigError("unknown category '" + name + "'");
}

int lathe_angular_samples(int n_points) {
  int k = static_cast<int>(std::lround(std::sqrt(2.0 * n_points)));
  k = std::clamp(k, 16, 512);
  return k;
}

ShapeModel make_shape(const CategorySpec& spec, uint64_t seed, int n_points, Split split) {
  Rng rng(seed);
  const DrawnParams p = draw_all(spec, rng, split);

  Points pts;
  const int k = lathe_angular_samples(n_points);
  const int rows = std::max(8, n_points / k);

  if (spec.name == "bottle") {
    const double rb = p[0], rn = p[1], bf = p[2], h = p[3] * 2.0 * p[0];
    pts = lathe({{0, 0}, {rb, 0}, {rb, bf * h}, {rn, bf * h + 0.12 * h}, {rn, h}, {0, h}}, rows, k);
  } else if (spec.name == "bowl") {
    const double curve = p[0], rb = 0.5, h = p[1] * 2.0 * rb / 0.8;
    std::vector<ProfilePoint> prof{{0.0, 0.0}, {0.3 * rb, 0.0}};
    for (int q = 1; q <= 8; ++q) {
      const double t = q / 8.0;
      prof.push_back({0.3 * rb + 0.7 * rb * std::pow(t, curve), h * t});
    }
    prof.push_back({0.82 * rb, h});  // rim lip
    pts = lathe(prof, rows, k);
  } else if (spec.name == "can") {
    const double rc = 0.5, h = p[0] * 2.0 * rc;
    pts = lathe({{0, 0}, {rc, 0}, {rc, h}, {0, h}}, rows, k);
  } else if (spec.name == "mug") {
    const double rm = 0.5, h = p[0] * 2.0 * rm;
    const int body_n = static_cast<int>(n_points * 0.85);
    const int kb = lathe_angular_samples(body_n);
    pts = lathe({{0, 0}, {rm, 0}, {rm, h}, {0.82 * rm, h}}, std::max(8, body_n / kb), kb);
    const double arc_r = p[1] * h, tube_r = p[2] * h;
    const int n_arc = 24, n_ring = std::max(4, (n_points - body_n) / 24);
    append(pts, handle_arc(rm * 0.98, 0.5 * h, arc_r, tube_r, n_arc, n_ring));
  } else if (spec.name == "laptop") {
    const double w = 1.0, dep = p[0], base_t = 0.045, screen_h = p[1], screen_t = 0.035;
    const double open = p[2] * kPi / 180.0;
    const int half_n = n_points / 2;
    Points base = box_surface(Vec3(w / 2, base_t / 2, dep / 2), half_n);
    append(pts, transformed(base, Mat3::Identity(), Vec3(0, base_t / 2, 0)));
    // screen hinged at the back edge, leaning past vertical by (open - 90 deg)
    const Mat3 Rs = geom::axis_angle_to_rotation(Vec3(-(open - kPi / 2), 0, 0));
    Points screen = box_surface(Vec3(w / 2, screen_h / 2, screen_t / 2), half_n);
    const Vec3 hinge(0, base_t, -dep / 2);
    append(pts, transformed(screen, Rs, hinge + Rs * Vec3(0, screen_h / 2, 0)));
  } else if (spec.name == "camera") {
    const double w = 1.0, h = p[0], dep = p[1], lens_r = p[2], lens_len = p[3];
    const int body_n = static_cast<int>(n_points * 0.8);
    append(pts, box_surface(Vec3(w / 2, h / 2, dep / 2), body_n));
    // lens barrel along +z from the front face
    const int lens_n = n_points - body_n;
    const int kl = std::max(12, lathe_angular_samples(lens_n) / 2);
    const int lrows = std::max(4, lens_n / kl);
    Points lens = lathe({{lens_r, 0}, {lens_r, lens_len}, {0, lens_len}}, lrows, kl);
    // lathe builds about y; rotate to the z axis
    Mat3 y_to_z;
    y_to_z << 1, 0, 0, 0, 0, -1, 0, 1, 0;
    append(pts, transformed(lens, y_to_z, Vec3(0, 0, dep / 2)));
  } else {
    throw ConfigError("make_shape: unknown family '" + spec.name + "'");
  }

  ShapeModel model;
  model.points = std::move(pts);
  normalize_model(model.points, model.extents);
  return model;
}

Points farthest_point_subsample(const Points& points, int count) {
  const int n = static_cast<int>(points.size());
  if (count >= n) return points;
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= double(n);
  // deterministic start: farthest from the centroid, lowest index on ties
  int cur = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - centroid).squaredNorm();
    if (d > best) {
      best = d;
      cur = i;
    }
  }
  Points out;
  out.reserve(count);
  out.push_back(points[cur]);
  for (int picked = 1; picked < count; ++picked) {
    double far_d = -1.0;
    int far_i = 0;
    for (int i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (points[i] - points[cur]).squaredNorm());
      if (dist[i] > far_d) {
        far_d = dist[i];
        far_i = i;
      }
    }
    cur = far_i;
    out.push_back(points[cur]);
  }
  return out;
}

geom::Points make_prior(const CategorySpec& spec, uint64_t seed, int instances,
                        int n_prior, int n_points) {
  if (instances < 1) throw ConfigError("make_prior: need at least one instance");
  Points mean;
  for (int i = 0; i < instances; ++i) {
    const uint64_t s = derive_seed(seed, 0x9000 + spec.id * 131 + i);
    ShapeModel m = make_shape(spec, s, n_points, Split::Train);
    if (mean.empty()) {
      mean = std::move(m.points);
    } else {
      if (mean.size() != m.points.size())
        throw ConfigError("make_prior: instance point layouts differ");
      for (size_t j = 0; j < mean.size(); ++j) mean[j] += m.points[j];
    }
  }
  for (auto& p : mean) p /= double(instances);
  Points prior = farthest_point_subsample(mean, n_prior);
  Vec3 extents;
  normalize_model(prior, extents);
  return prior;
}

geom::Intrinsics intrinsics_for(const GenConfig& cfg) {
  geom::Intrinsics K;
  K.fx = K.fy = cfg.focal_factor * cfg.image_size;
  K.cx = K.cy = cfg.image_size / 2.0;
  return K;
}

void render_scene(const Points& model_points, const geom::Pose& pose,
                  const geom::Intrinsics& K, int height, int width,
                  std::vector<double>& image, std::vector<uint8_t>& mask,
                  std::vector<double>& nocs_map) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  image.assign(static_cast<size_t>(height) * width * 3, 0.05);
  mask.assign(static_cast<size_t>(height) * width, 0);
  nocs_map.assign(static_cast<size_t>(height) * width * 3, nan);

  struct Splat {
    double u, v, z;
    int pix = -1;
  };
  std::vector<Splat> splats(model_points.size());
  std::vector<double> zbuf(static_cast<size_t>(height) * width, inf);

  // pass 1: visibility (minimal depth per pixel)
  for (size_t i = 0; i < model_points.size(); ++i) {
    const Vec3 pc = pose.s * (pose.R * model_points[i]) + pose.t;
    if (pc.z() <= 0.0)
      throw GenerationError("render_scene: model point behind camera (z <= 0)");
    Splat& s = splats[i];
    s.u = K.fx * pc.x() / pc.z() + K.cx;
    s.v = K.fy * pc.y() / pc.z() + K.cy;
    s.z = pc.z();
    const int ix = static_cast<int>(std::floor(s.u));
    const int iy = static_cast<int>(std::floor(s.v));
    if (ix < 0 || iy < 0 || ix >= width || iy >= height) continue;
    s.pix = iy * width + ix;
    zbuf[s.pix] = std::min(zbuf[s.pix], s.z);
  }

  // pass 2: among points within a small depth slack of the visible surface,
  // keep the one closest to the pixel center (shrinks correspondence error
  // well below the half-pixel splat bound)
  std::vector<double> center_d(static_cast<size_t>(height) * width, inf);
  const Vec3 light = Vec3(-0.4, 0.6, -0.7).normalized();
  for (size_t i = 0; i < model_points.size(); ++i) {
    const Splat& s = splats[i];
    if (s.pix < 0) continue;
    // the slack must cover the front sheet's in-pixel depth range on steep
    // surfaces (else the nearest-to-center pick biases toward the camera)
    // while staying below the front-to-back sheet gap
    if (s.z > zbuf[s.pix] * 1.02) continue;  // occluded
    const double cu = std::floor(s.u) + 0.5, cv = std::floor(s.v) + 0.5;
    const double d2 = (s.u - cu) * (s.u - cu) + (s.v - cv) * (s.v - cv);
    if (d2 >= center_d[s.pix]) continue;
    center_d[s.pix] = d2;
    mask[s.pix] = 1;
    const Vec3& pn = model_points[i];
    // shading (pseudo-normal from the NOCS radial direction) plus NOCS tint;
    // the additive mix keeps the coordinates linearly recoverable from RGB
    const Vec3 n_cam = pose.R * (pn.norm() > 1e-12 ? pn.normalized() : Vec3(0, 1, 0));
    const double shade = 0.05 * std::max(0.0, n_cam.dot(light));
    for (int c = 0; c < 3; ++c) {
      const double tint = std::clamp(pn[c] + 0.5, 0.0, 1.0);
      image[s.pix * 3 + c] = std::clamp(0.08 + 0.84 * tint + shade, 0.0, 1.0);
      nocs_map[s.pix * 3 + c] = pn[c];
    }
  }
}

SceneSample sample_scene(const GenConfig& cfg, const CategorySpec& spec,
                         const Points& prior, uint64_t dataset_seed, Split split,
                         int index) {
  const uint64_t seed = derive_seed(
      dataset_seed, (split == Split::Train ? 0x100000ULL : 0x200000ULL) +
                        static_cast<uint64_t>(spec.id) * 65536ULL + index);
  Rng rng(seed);

  ShapeModel render_model = make_shape(spec, derive_seed(seed, 1), cfg.n_render_points, split);

  SceneSample s;
  s.category = spec.id;
  s.width = s.height = cfg.image_size;
  s.sample_seed = seed;
  s.K = intrinsics_for(cfg);
  s.prior = prior;
  s.extents = render_model.extents;

  // stored model: strided subsample of the render cloud
  const int stride = std::max(1, cfg.n_render_points / cfg.n_model_points);
  for (size_t i = 0; i < render_model.points.size(); i += stride)
    s.model_points.push_back(render_model.points[i]);

  s.pose.R = geom::random_rotation(rng);
  s.pose.s = spec.s_b * (1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter));
  // depth anchored to the category benchmark scale, not the drawn instance
  // scale: apparent size then carries the scale residual the network predicts
  const double tz = spec.s_b * rng.uniform(cfg.depth_rel_min, cfg.depth_rel_max);
  const double du = rng.uniform(-cfg.center_jitter, cfg.center_jitter) * cfg.image_size;
  const double dv = rng.uniform(-cfg.center_jitter, cfg.center_jitter) * cfg.image_size;
  s.pose.t = Vec3(du * tz / s.K.fx, dv * tz / s.K.fy, tz);

  render_scene(render_model.points, s.pose, s.K, s.height, s.width, s.image, s.mask,
               s.nocs_map);

  if (cfg.noise_augment && cfg.noise_sigma > 0.0) {
    for (auto& px : s.image)
      px = std::clamp(px + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
  }
  return s;
}

}  // namespace rgbpose::synth
