#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgbpose/geometry.hpp"

namespace rgbpose::eval {

/// Writes the sample image with projected 3D box wireframes as a binary PPM.
/// Ground truth in green, prediction (when present) in red.
void write_overlay_ppm(const std::string& path, const std::vector<double>& image, int height,
                       int width, const geom::Intrinsics& K, const geom::Pose& gt,
                       const geom::Vec3& gt_extents, const std::optional<geom::Pose>& pred,
                       const geom::Vec3& pred_extents);

}  // namespace rgbpose::eval
