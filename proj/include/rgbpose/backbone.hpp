#pragma once

#include <array>
#include <vector>

#include "rgbpose/synth.hpp"
#include "rgbpose/tensor.hpp"

namespace rgbpose::net {

/// Patch tokens plus their image-plane geometry. pixel_centers are the
/// geometric patch centers; for foreground tokens rep_pixel is the center of
/// the masked pixel nearest the patch center (the 2D coordinate the token's
/// NOCS ground truth and PnP correspondence use).
struct PatchGrid {
  diff::Tensor tokens;  // [N_p x d]
  std::vector<std::array<double, 2>> pixel_centers;
  std::vector<uint8_t> fg_flags;                    // >= 50% masked pixels
  std::vector<std::array<double, 2>> rep_pixel;     // valid where fg
  std::vector<std::array<int, 2>> rep_pixel_ij;     // integer pixel coords
  std::vector<long> fg_indices() const;
};

/// Frozen patch projector + fixed 2D sinusoidal positional encoding.
struct PatchEmbed {
  diff::Tensor W;        // [3*p*p x d], frozen
  diff::Tensor posenc;   // [N_p x d], constant
  int patch = 0;
  int image = 0;
  int dim = 0;
};

PatchEmbed make_patch_embed(int image, int patch, int dim, uint64_t seed);

/// Patch centers, foreground flags and representative pixels from the mask
/// alone (tokens left empty). Used by embed_patches and by oracle evaluation.
PatchGrid patch_geometry(const std::vector<uint8_t>& mask, int height, int width, int patch);

/// Requires image extents divisible by the patch size (ConfigError otherwise).
PatchGrid embed_patches(const std::vector<double>& image, const std::vector<uint8_t>& mask,
                        int height, int width, const PatchEmbed& embed);

/// Single-scale point encoder: per-point MLP, global max-pool, concat of the
/// pooled vector to every point, second per-point MLP. Permutation
/// equivariant.
struct PointEncoderParams {
  diff::Mlp mlp1;  // 3 -> h
  diff::Mlp mlp2;  // 2h -> d_out
};

diff::Tensor encode_points(const diff::Tensor& points, const PointEncoderParams& enc);

}  // namespace rgbpose::net
