#include "rgbpose/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rgbpose::eval {

namespace {

using geom::Vec3;

void draw_line(std::vector<uint8_t>& rgb, int h, int w, double x0, double y0, double x1,
               double y1, uint8_t r, uint8_t g, uint8_t b) {
  const int steps = std::max(2, static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0) * 2)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x < 0 || y < 0 || x >= w || y >= h) continue;
    const size_t idx = (static_cast<size_t>(y) * w + x) * 3;
    rgb[idx] = r;
    rgb[idx + 1] = g;
    rgb[idx + 2] = b;
  }
}

void draw_box(std::vector<uint8_t>& rgb, int h, int w, const geom::Intrinsics& K,
              const geom::Pose& pose, const Vec3& extents, uint8_t r, uint8_t g, uint8_t b) {
  const Vec3 half = 0.5 * extents;
  std::vector<geom::Vec2> px(8);
  bool visible = true;
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner(((i & 1) ? half.x() : -half.x()), ((i & 2) ? half.y() : -half.y()),
                      ((i & 4) ? half.z() : -half.z()));
    const Vec3 cam = pose.s * (pose.R * corner) + pose.t;
    if (cam.z() <= 0.0) {
      visible = false;
      break;
    }
    px[i] = geom::project_point(cam, K);
  }
  if (!visible) return;
  static const int edges[12][2] = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {4, 5}, {4, 6},
                                   {5, 7}, {6, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (const auto& e : edges)
    draw_line(rgb, h, w, px[e[0]].x(), px[e[0]].y(), px[e[1]].x(), px[e[1]].y(), r, g, b);
}

}  // namespace

void write_overlay_ppm(const std::string& path, const std::vector<double>& image, int height,
                       int width, const geom::Intrinsics& K, const geom::Pose& gt,
                       const geom::Vec3& gt_extents, const std::optional<geom::Pose>& pred,
                       const geom::Vec3& pred_extents) {
  std::vector<uint8_t> rgb(static_cast<size_t>(height) * width * 3);
  for (size_t i = 0; i < rgb.size(); ++i)
    rgb[i] = static_cast<uint8_t>(std::clamp(image[i], 0.0, 1.0) * 255.0 + 0.5);

  draw_box(rgb, height, width, K, gt, gt_extents, 0, 220, 0);
  if (pred) draw_box(rgb, height, width, K, *pred, pred_extents, 230, 0, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write overlay '" + path + "'");
  f << "P6\n" << width << " " << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

}  // namespace rgbpose::eval
