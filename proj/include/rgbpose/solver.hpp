#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rgbpose/geometry.hpp"

namespace rgbpose::pnp {

struct RansacConfig {
  int max_iterations = 500;
  double inlier_threshold_px = 1.0;
  double confidence = 0.999;
  int min_inliers = 6;
  int refine_iterations = 10;
  uint64_t seed = 0;
};

struct PnPResult {
  bool success = false;
  geom::Mat3 R = geom::Mat3::Identity();
  geom::Vec3 t = geom::Vec3::Zero();
  std::vector<uint8_t> inlier_flags;  // aligned with the input correspondences
  double reproj_rmse = 0.0;           // over final inliers
  int iterations_used = 0;
};

/// P3P (Grunert quartic) on the first three pairs, disambiguated by the
/// fourth pair's reprojection error (best first). Candidates placing any of
/// the four points behind the camera are discarded. Degenerate input yields
/// an empty set, never a throw.
std::vector<std::pair<geom::Mat3, geom::Vec3>> pnp_minimal(
    const std::array<geom::Vec2, 4>& pixels, const std::array<geom::Vec3, 4>& points,
    const geom::Intrinsics& K);

/// Seeded RANSAC over 4-point subsets with Gauss-Newton refinement of the
/// best consensus. Subsets are drawn from a canonically sorted view of the
/// correspondences, so the result is invariant to input ordering. Failure
/// (insufficient consensus, too few correspondences) is reported in the
/// result, not thrown.
PnPResult ransac_pnp(const std::vector<geom::Vec2>& pixels,
                     const std::vector<geom::Vec3>& points, const geom::Intrinsics& K,
                     const RansacConfig& cfg);

/// Gauss-Newton on squared pixel residuals with step halving (cost never
/// increases). Rotation updated by left axis-angle increments. Returns false
/// (pose untouched beyond last accepted step) when the normal equations are
/// singular at the start.
bool refine_pose(geom::Mat3& R, geom::Vec3& t, const std::vector<geom::Vec3>& points,
                 const std::vector<geom::Vec2>& pixels, const geom::Intrinsics& K,
                 int max_iterations);

/// RMSE of pixel reprojection over the given correspondences; +inf when any
/// point lands behind the camera.
double reproj_rmse(const geom::Mat3& R, const geom::Vec3& t,
                   const std::vector<geom::Vec3>& points,
                   const std::vector<geom::Vec2>& pixels, const geom::Intrinsics& K);

/// Real roots of sum_i c[i] x^i (ascending coefficients), via the companion
/// matrix with Newton polishing.
std::vector<double> real_polynomial_roots(const std::vector<double>& coeffs);

}  // namespace rgbpose::pnp
