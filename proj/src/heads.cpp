#include "rgbpose/heads.hpp"

#include <algorithm>

namespace rgbpose::net {

using diff::Tensor;

AssignmentPred predict_assignment(const Tensor& F_ins, const Tensor& F_fuse,
                                  const diff::Mlp& a_head) {
  if (F_ins.rows() != F_fuse.rows())
    throw ShapeError("predict_assignment: row counts differ");
  AssignmentPred out;
  out.logits = diff::mlp_forward(diff::concat_cols(F_ins, F_fuse), a_head);
  out.A = diff::softmax_rows(out.logits);
  return out;
}

Tensor predict_deformation(const Tensor& F_cat, const Tensor& F_fuse,
                           const diff::Mlp& d_head) {
  Tensor pooled = diff::broadcast_rows(diff::avgpool_rows(F_fuse), F_cat.rows());
  return diff::mlp_forward(diff::concat_cols(F_cat, pooled), d_head);
}

ScalePred predict_scale(const Tensor& F_ins, const Tensor& F_fuse, double s_b,
                        const diff::Mlp& s_head, ScaleMode mode) {
  if (s_b <= 0.0) throw ConfigError("predict_scale: benchmark scale must be positive");
  Tensor pooled = diff::concat_cols(diff::avgpool_rows(F_ins), diff::avgpool_rows(F_fuse));
  Tensor raw = diff::mlp_forward(pooled, s_head);
  ScalePred out;
  if (mode == ScaleMode::Residual) {
    out.delta = diff::clamp(raw, -0.9, 4.0);
    out.s = s_b + s_b * out.delta.value();
  } else {
    out.delta = raw;
    out.s = std::max(raw.value(), 0.01);
  }
  return out;
}

Correspondences assemble_correspondences(const Tensor& A, const Tensor& D,
                                         const Tensor& prior, double s,
                                         std::vector<geom::Vec2> pixels) {
  if (A.cols() != prior.rows() || prior.rows() != D.rows() || prior.cols() != 3)
    throw ShapeError("assemble_correspondences: inconsistent A/D/prior shapes");
  if (static_cast<long>(pixels.size()) != A.rows())
    throw ShapeError("assemble_correspondences: pixel count does not match A rows");
  Correspondences out;
  out.pixels = std::move(pixels);
  out.nocs = diff::matmul(A, diff::add(prior, D));
  out.metric.reserve(out.nocs.rows());
  for (long i = 0; i < out.nocs.rows(); ++i)
    out.metric.emplace_back(s * out.nocs.at(i, 0), s * out.nocs.at(i, 1),
                            s * out.nocs.at(i, 2));
  return out;
}

}  // namespace rgbpose::net
