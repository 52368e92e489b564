#include "rgbpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rgbpose::geom {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

bool is_rotation(const Mat3& R, double tol) {
  const Mat3 should_be_id = R.transpose() * R - Mat3::Identity();
  return should_be_id.cwiseAbs().maxCoeff() <= tol && std::fabs(R.determinant() - 1.0) <= tol;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 axis_angle_to_rotation(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    // second-order expansion keeps the map smooth through zero
    return Mat3::Identity() + skew(w) + 0.5 * skew(w) * skew(w);
  }
  const Vec3 axis = w / theta;
  const Mat3 K = skew(axis);
  return Mat3::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

Vec3 rotation_to_axis_angle(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-12) return Vec3::Zero();
  if (theta > kPi - 1e-6) {
    // near pi: extract axis from R + I
    Mat3 A = 0.5 * (R + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(0.0, A(0, 0))), std::sqrt(std::max(0.0, A(1, 1))),
              std::sqrt(std::max(0.0, A(2, 2))));
    // fix signs from off-diagonals
    int k = 0;
    if (axis.y() > axis.x()) k = 1;
    if (axis.z() > axis[k]) k = 2;
    if (axis[k] < 1e-12) return Vec3(kPi, 0, 0);
    if (k == 0) {
      axis.y() = std::copysign(axis.y(), A(0, 1));
      axis.z() = std::copysign(axis.z(), A(0, 2));
    } else if (k == 1) {
      axis.x() = std::copysign(axis.x(), A(0, 1));
      axis.z() = std::copysign(axis.z(), A(1, 2));
    } else {
      axis.x() = std::copysign(axis.x(), A(0, 2));
      axis.y() = std::copysign(axis.y(), A(1, 2));
    }
    return theta * axis.normalized();
  }
  Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return theta / (2.0 * std::sin(theta)) * axis;
}

Mat3 rotation_about_y(double radians) {
  Mat3 m;
  const double c = std::cos(radians), s = std::sin(radians);
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 random_rotation(Rng& rng) {
  // Shoemake's uniform quaternion construction.
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double qx = a * std::sin(2.0 * kPi * u2);
  const double qy = a * std::cos(2.0 * kPi * u2);
  const double qz = b * std::sin(2.0 * kPi * u3);
  const double qw = b * std::cos(2.0 * kPi * u3);
  return Eigen::Quaterniond(qw, qx, qy, qz).toRotationMatrix();
}

Points to_nocs(const Points& cam_points, const Pose& pose) {
  Points out;
  out.reserve(cam_points.size());
  const Mat3 Rt = pose.R.transpose();
  const double inv_s = 1.0 / pose.s;
  for (const auto& p : cam_points) out.push_back(Rt * (p - pose.t) * inv_s);
  return out;
}

Points from_nocs(const Points& nocs_points, const Pose& pose) {
  Points out;
  out.reserve(nocs_points.size());
  for (const auto& p : nocs_points) out.push_back(pose.s * (pose.R * p) + pose.t);
  return out;
}

Vec2 project_point(const Vec3& p, const Intrinsics& K) {
  return Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
}

std::vector<Vec2> project(const Points& cam_points, const Intrinsics& K) {
  std::string bad;
  for (size_t i = 0; i < cam_points.size(); ++i)
    if (cam_points[i].z() <= 0.0) bad += (bad.empty() ? "" : ",") + std::to_string(i);
  if (!bad.empty())
    throw GenerationError("project: points behind camera at indices [" + bad + "]");
  std::vector<Vec2> out;
  out.reserve(cam_points.size());
  for (const auto& p : cam_points) out.push_back(project_point(p, K));
  return out;
}

Points backproject(const std::vector<Vec2>& pixels, const std::vector<double>& depths,
                   const Intrinsics& K) {
  if (pixels.size() != depths.size())
    throw ShapeError("backproject: pixel/depth counts differ");
  Points out;
  out.reserve(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    const double z = depths[i];
    out.emplace_back((pixels[i].x() - K.cx) / K.fx * z, (pixels[i].y() - K.cy) / K.fy * z, z);
  }
  return out;
}

Pose umeyama_align(const Points& src, const Points& dst) {
  if (src.size() != dst.size()) throw ShapeError("umeyama_align: point counts differ");
  const size_t n = src.size();
  if (n < 3) throw DegenerateError("umeyama_align: need at least 3 points");

  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= double(n);
  mu_d /= double(n);

  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 ds = src[i] - mu_s;
    const Vec3 dd = dst[i] - mu_d;
    cov += dd * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= double(n);
  var_s /= double(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(1.0, sv(0)))
    throw DegenerateError("umeyama_align: degenerate (collinear) configuration, rank < 2");

  Vec3 d_sign = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d_sign(2) = -1.0;

  Pose pose;
  pose.R = svd.matrixU() * d_sign.asDiagonal() * svd.matrixV().transpose();
  pose.s = sv.dot(d_sign) / var_s;
  pose.t = mu_d - pose.s * (pose.R * mu_s);
  return pose;
}

double box_iou(const OrientedBox& a, const OrientedBox& b, int grid) {
  const double va = a.volume(), vb = b.volume();

  // Canonical choice of the sampled box: smaller volume, ties broken by a
  // lexicographic key so iou(a,b) == iou(b,a) exactly.
  auto key_less = [](const OrientedBox& x, const OrientedBox& y) {
    for (int i = 0; i < 3; ++i)
      if (x.center[i] != y.center[i]) return x.center[i] < y.center[i];
    for (int i = 0; i < 3; ++i)
      if (x.extents[i] != y.extents[i]) return x.extents[i] < y.extents[i];
    for (int i = 0; i < 9; ++i)
      if (x.R(i / 3, i % 3) != y.R(i / 3, i % 3)) return x.R(i / 3, i % 3) < y.R(i / 3, i % 3);
    return false;
  };
  const bool sample_a = (va < vb) || (va == vb && !key_less(b, a));
  const OrientedBox& small = sample_a ? a : b;
  const OrientedBox& other = sample_a ? b : a;

  // Transverse grid of columns through the sampled box (4x supersampled per
  // axis); each column's overlap with the other box is a contiguous interval
  // computed exactly by slab clipping, so the discretization error is
  // transverse only and relative to the intersection, not the volume.
  const Mat3 other_rt = other.R.transpose();
  const Vec3 other_half = 0.5 * other.extents;
  const int cols = 4 * grid;
  const double g = static_cast<double>(cols);
  const Vec3 dir = other_rt * small.R.col(2);  // column direction, other-local
  double frac_sum = 0.0;
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < cols; ++j) {
      const Vec3 local(small.extents.x() * ((i + 0.5) / g - 0.5),
                       small.extents.y() * ((j + 0.5) / g - 0.5),
                       -0.5 * small.extents.z());
      const Vec3 origin = other_rt * (small.center + small.R * local - other.center);
      // clip t in [0, e_z] against the three slabs |origin + t*dir| <= half
      double t0 = 0.0, t1 = small.extents.z();
      for (int ax = 0; ax < 3 && t0 < t1; ++ax) {
        if (std::fabs(dir[ax]) < 1e-300) {
          if (std::fabs(origin[ax]) > other_half[ax]) t0 = t1;
          continue;
        }
        double lo = (-other_half[ax] - origin[ax]) / dir[ax];
        double hi = (other_half[ax] - origin[ax]) / dir[ax];
        if (lo > hi) std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
      }
      if (t1 > t0) frac_sum += (t1 - t0) / small.extents.z();
    }
  const double inter = small.volume() * frac_sum / (g * g);
  const double uni = va + vb - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double rotation_error_deg(const Mat3& pred, const Mat3& gt, Symmetry sym) {
  if (sym == Symmetry::None) {
    const double c = std::clamp((( pred * gt.transpose()).trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c) * 180.0 / kPi;
  }
  // Minimize the geodesic angle of pred * Rot(y,phi) vs gt over phi.
  // tr(Rot(y,phi) M) = cos(phi)(tr M - yMy) + sin(phi) tr([y]x M) + yMy,
  // maximized at c + sqrt(a^2 + b^2).
  const Vec3 y(0, 1, 0);
  const Mat3 M = gt.transpose() * pred;
  const double yMy = y.dot(M * y);
  const double a = M.trace() - yMy;
  const double b = (skew(y) * M).trace();
  const double max_trace = yMy + std::sqrt(a * a + b * b);
  const double c = std::clamp((max_trace - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c) * 180.0 / kPi;
}

PoseErrors pose_errors(const Pose& pred, const Vec3& pred_extents, const Pose& gt,
                       const Vec3& gt_extents, Symmetry sym, int iou_grid) {
  PoseErrors e;
  e.rot_deg = rotation_error_deg(pred.R, gt.R, sym);
  e.trans_m = (pred.t - gt.t).norm();
  OrientedBox pb{pred.t, pred.R, pred.s * pred_extents};
  OrientedBox gb{gt.t, gt.R, gt.s * gt_extents};
  e.iou = box_iou(pb, gb, iou_grid);
  return e;
}

}  // namespace rgbpose::geom
