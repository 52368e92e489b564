#include "rgbpose/fusion.hpp"

#include <cmath>

namespace rgbpose::net {

using diff::Tensor;

namespace {

// Transposed matmul via a transpose copy (shapes here are small).
Tensor transpose(Tensor x) {
  Tensor xt(x.cols(), x.rows());
  for (long i = 0; i < x.rows(); ++i)
    for (long j = 0; j < x.cols(); ++j) xt.at(j, i) = x.at(i, j);
  if (x.requires_grad()) {
    xt.set_requires_grad(true);
    if (diff::Tape::active())
      diff::Tape::active()->record("transpose", xt, [x, xt]() mutable {
        const double* g = xt.grad();
        x.ensure_grad();
        double* d = x.grad();
        const long r = x.rows(), c = x.cols();
        for (long i = 0; i < r; ++i)
          for (long j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
      });
  }
  return xt;
}

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(k.cols()));
  Tensor scores = diff::scale(diff::matmul(q, transpose(k)), inv_sqrt_dk);
  Tensor weights = diff::softmax_rows(scores);
  return diff::matmul(weights, v);
}

}  // namespace

Tensor self_attend(const Tensor& F, const AttnParams& p) {
  Tensor q = diff::linear(F, p.q);
  Tensor k = diff::linear(F, p.k);
  Tensor v = diff::linear(F, p.v);
  return diff::add(attention_core(q, k, v), F);
}

Tensor cross_attend(const Tensor& F_q, const Tensor& F_kv, const AttnParams& p) {
  Tensor q = diff::linear(F_q, p.q);
  Tensor k = diff::linear(F_kv, p.k);
  Tensor v = diff::linear(F_kv, p.v);
  return diff::add(attention_core(q, k, v), q);
}

InstanceFusion fuse_instance(const Tensor& F_rgb, const Tensor& F_g,
                             const std::vector<long>& fg_idx,
                             const InstanceFusionParams& p, FusionMode mode) {
  if (F_rgb.rows() != F_g.rows())
    throw ShapeError("fuse_instance: token counts differ");
  if (fg_idx.empty())
    throw UsageError("fuse_instance: no foreground tokens in sample");

  Tensor sa_rgb = self_attend(F_rgb, p.sa_rgb);
  Tensor sa_g = self_attend(F_g, p.sa_g);

  InstanceFusion out;
  if (mode == FusionMode::Attention) {
    Tensor ca_rgb = cross_attend(sa_rgb, sa_g, p.ca_rgb);
    Tensor ca_g = cross_attend(sa_g, sa_rgb, p.ca_g);
    out.f_rgb = diff::take_rows(ca_rgb, fg_idx);
    out.f_g = diff::take_rows(ca_g, fg_idx);
  } else {
    out.f_rgb = diff::take_rows(sa_rgb, fg_idx);
    out.f_g = diff::take_rows(sa_g, fg_idx);
  }
  out.f_ins = diff::concat_cols(out.f_rgb, out.f_g);
  return out;
}

Tensor fuse_with_category(const Tensor& F_ins, const Tensor& F_cat,
                          const CategoryFusionParams& p, FusionMode mode) {
  Tensor reduced = diff::mlp_forward(F_ins, p.reduce);
  if (mode == FusionMode::Attention) return cross_attend(reduced, F_cat, p.ca);
  // ablation path: plain concatenation with the pooled category feature
  Tensor cat_global = diff::broadcast_rows(diff::avgpool_rows(F_cat), reduced.rows());
  return diff::linear(diff::concat_cols(reduced, cat_global), p.mix);
}

Tensor build_guidance_feature(const Tensor& F_fuse) {
  Tensor mean = diff::avgpool_rows(F_fuse);
  return diff::concat_cols(F_fuse, diff::broadcast_rows(mean, F_fuse.rows()));
}

}  // namespace rgbpose::net
