#include "rgbpose/backbone.hpp"

#include <cmath>

namespace rgbpose::net {

using diff::Tensor;

std::vector<long> PatchGrid::fg_indices() const {
  std::vector<long> idx;
  for (size_t i = 0; i < fg_flags.size(); ++i)
    if (fg_flags[i]) idx.push_back(static_cast<long>(i));
  return idx;
}

PatchEmbed make_patch_embed(int image, int patch, int dim, uint64_t seed) {
  if (patch <= 0 || image % patch != 0)
    throw ConfigError("patch size " + std::to_string(patch) + " does not divide image size " +
                      std::to_string(image));
  PatchEmbed e;
  e.patch = patch;
  e.image = image;
  e.dim = dim;
  const long in_dim = 3L * patch * patch;
  Rng rng(seed);
  std::vector<double> w(static_cast<size_t>(in_dim) * dim);
  const double std_w = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (auto& v : w) v = std_w * rng.normal();
  e.W = Tensor::from(std::move(w), in_dim, dim);  // frozen: requires_grad stays false

  const int grid = image / patch;
  const long n_tokens = static_cast<long>(grid) * grid;
  Tensor pe(n_tokens, dim);
  const int half = dim / 2;
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const long tok = static_cast<long>(gy) * grid + gx;
      for (int k = 0; k < dim; ++k) {
        const bool second = k >= half;
        const double coord = second ? gy : gx;
        const int kk = second ? k - half : k;
        const int span = second ? dim - half : half;
        const double freq =
            std::pow(10000.0, -2.0 * (kk / 2) / std::max(1.0, static_cast<double>(span)));
        pe.at(tok, k) = (kk % 2 == 0) ? std::sin(coord * freq) : std::cos(coord * freq);
      }
    }
  e.posenc = pe;
  return e;
}

PatchGrid patch_geometry(const std::vector<uint8_t>& mask, int height, int width, int patch) {
  if (patch <= 0 || height % patch != 0 || width % patch != 0)
    throw ConfigError("patch_geometry: image " + std::to_string(width) + "x" +
                      std::to_string(height) + " not divisible by patch " +
                      std::to_string(patch));
  const int p = patch;
  const int gw = width / p, gh = height / p;
  const long n_tokens = static_cast<long>(gw) * gh;

  PatchGrid grid;
  grid.pixel_centers.resize(n_tokens);
  grid.fg_flags.assign(n_tokens, 0);
  grid.rep_pixel.resize(n_tokens);
  grid.rep_pixel_ij.resize(n_tokens);

  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const long tok = static_cast<long>(gy) * gw + gx;
      grid.pixel_centers[tok] = {gx * p + p / 2.0, gy * p + p / 2.0};
      int covered = 0;
      double best_d = 1e30;
      int best_x = -1, best_y = -1;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx) {
          const int x = gx * p + dx, y = gy * p + dy;
          const size_t pix = static_cast<size_t>(y) * width + x;
          if (mask[pix]) {
            ++covered;
            const double du = (x + 0.5) - grid.pixel_centers[tok][0];
            const double dv = (y + 0.5) - grid.pixel_centers[tok][1];
            const double d2 = du * du + dv * dv;
            if (d2 < best_d) {
              best_d = d2;
              best_x = x;
              best_y = y;
            }
          }
        }
      if (2 * covered >= p * p) {
        grid.fg_flags[tok] = 1;
        grid.rep_pixel[tok] = {best_x + 0.5, best_y + 0.5};
        grid.rep_pixel_ij[tok] = {best_x, best_y};
      }
    }
  return grid;
}

PatchGrid embed_patches(const std::vector<double>& image, const std::vector<uint8_t>& mask,
                        int height, int width, const PatchEmbed& embed) {
  const int p = embed.patch;
  PatchGrid grid = patch_geometry(mask, height, width, p);
  const int gw = width / p, gh = height / p;
  const long n_tokens = static_cast<long>(gw) * gh;
  const long in_dim = 3L * p * p;

  Tensor patches(n_tokens, in_dim);
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const long tok = static_cast<long>(gy) * gw + gx;
      long col = 0;
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx) {
          const size_t pix = static_cast<size_t>(gy * p + dy) * width + (gx * p + dx);
          for (int c = 0; c < 3; ++c) patches.at(tok, col++) = image[pix * 3 + c];
        }
    }

  grid.tokens = diff::add(diff::matmul(patches, embed.W), embed.posenc);
  return grid;
}

diff::Tensor encode_points(const Tensor& points, const PointEncoderParams& enc) {
  if (points.cols() != 3)
    throw ShapeError("encode_points: expected [Nx3] input, got [" +
                     std::to_string(points.rows()) + "x" + std::to_string(points.cols()) + "]");
  Tensor per_point = diff::mlp_forward(points, enc.mlp1);
  Tensor pooled = diff::maxpool_rows(per_point);
  Tensor global = diff::broadcast_rows(pooled, points.rows());
  Tensor joined = diff::concat_cols(per_point, global);
  return diff::mlp_forward(joined, enc.mlp2);
}

}  // namespace rgbpose::net
