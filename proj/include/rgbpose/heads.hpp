#pragma once

#include <vector>

#include "rgbpose/geometry.hpp"
#include "rgbpose/tensor.hpp"

namespace rgbpose::net {

enum class ScaleMode { Residual, Direct };

struct HeadsParams {
  diff::Mlp a_head;  // 3d -> N_r logits, zero-init last layer
  diff::Mlp d_head;  // 2d -> 3, zero-init last layer
  diff::Mlp s_head;  // 3d -> 1, zero-init last layer
};

struct AssignmentPred {
  diff::Tensor logits;  // [N_o x N_r]
  diff::Tensor A;       // row-stochastic
};

/// Per-token MLP over concat(F_ins row, F_fuse row), then row softmax.
AssignmentPred predict_assignment(const diff::Tensor& F_ins, const diff::Tensor& F_fuse,
                                  const diff::Mlp& a_head);

/// Per-prior-point MLP over concat(F_cat row, pooled F_fuse): offsets [N_r x 3].
diff::Tensor predict_deformation(const diff::Tensor& F_cat, const diff::Tensor& F_fuse,
                                 const diff::Mlp& d_head);

struct ScalePred {
  diff::Tensor delta;  // [1x1]; residual mode: clamped dS, direct mode: raw s
  double s = 0.0;      // metric scale used by PnP
};

/// Residual mode: s = s_b + s_b * dS with dS clamped to (-0.9, 4.0).
/// Direct mode (ablation): s = max(raw, 0.01), no benchmark scale.
ScalePred predict_scale(const diff::Tensor& F_ins, const diff::Tensor& F_fuse, double s_b,
                        const diff::Mlp& s_head, ScaleMode mode);

struct Correspondences {
  std::vector<geom::Vec2> pixels;  // [N_o]
  diff::Tensor nocs;               // [N_o x 3] = A (P_r + D)
  geom::Points metric;             // s * nocs
};

/// nocs = A (P_r + D); metric = s * nocs; pixels passed through.
Correspondences assemble_correspondences(const diff::Tensor& A, const diff::Tensor& D,
                                         const diff::Tensor& prior, double s,
                                         std::vector<geom::Vec2> pixels);

}  // namespace rgbpose::net
