#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rgbpose/errors.hpp"
#include "rgbpose/rng.hpp"

namespace rgbpose::geom {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Points = std::vector<Vec3>;

/// Similarity transform object->camera: p_cam = s * R * p_nocs + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  double s = 1.0;
};

/// Returns true when R is orthonormal with det +1 within tol.
bool is_rotation(const Mat3& R, double tol = 1e-9);

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 extents = Vec3::Zero();  // full side lengths
  double volume() const { return extents.x() * extents.y() * extents.z(); }
};

enum class Symmetry { None, AxisY };

// ---- rotation helpers ---------------------------------------------------

Mat3 skew(const Vec3& v);
Mat3 axis_angle_to_rotation(const Vec3& axis_times_angle);
Vec3 rotation_to_axis_angle(const Mat3& R);
Mat3 rotation_about_y(double radians);
Mat3 random_rotation(Rng& rng);  // uniform over SO(3) via quaternions

// ---- NOCS mapping ---------------------------------------------------------

/// p_nocs = R^T (p_cam - t) / s for each point.
Points to_nocs(const Points& cam_points, const Pose& pose);
/// Inverse of to_nocs.
Points from_nocs(const Points& nocs_points, const Pose& pose);

// ---- camera ---------------------------------------------------------------

/// Pinhole projection u = fx*x/z + cx, v = fy*y/z + cy. Requires z > 0 for
/// every point; throws GenerationError listing offending indices otherwise.
std::vector<Vec2> project(const Points& cam_points, const Intrinsics& K);
Vec2 project_point(const Vec3& p, const Intrinsics& K);
/// Inverse of projection given per-pixel depth.
Points backproject(const std::vector<Vec2>& pixels, const std::vector<double>& depths,
                   const Intrinsics& K);

// ---- alignment -------------------------------------------------------------

/// Least-squares similarity transform: minimizes sum ||dst - (s R src + t)||^2.
/// det(R) = +1 enforced by sign correction. Throws DegenerateError when the
/// source configuration is collinear (covariance rank < 2).
Pose umeyama_align(const Points& src, const Points& dst);

// ---- metrics ----------------------------------------------------------------

/// IoU of two oriented boxes by deterministic grid sampling (grid^3 cells) of
/// the canonically chosen smaller box. Symmetric by construction.
double box_iou(const OrientedBox& a, const OrientedBox& b, int grid = 40);

/// Geodesic rotation distance in degrees, minimized over the symmetry group.
double rotation_error_deg(const Mat3& pred, const Mat3& gt, Symmetry sym);

struct PoseErrors {
  double rot_deg = 0.0;
  double trans_m = 0.0;
  double iou = 0.0;
};

/// extents are NOCS-frame tight box sides; metric boxes use extents * s.
PoseErrors pose_errors(const Pose& pred, const Vec3& pred_extents,
                       const Pose& gt, const Vec3& gt_extents,
                       Symmetry sym, int iou_grid = 40);

}  // namespace rgbpose::geom
