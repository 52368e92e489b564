#pragma once

#include <vector>

#include "rgbpose/tensor.hpp"

namespace rgbpose::net {

enum class FusionMode { Attention, Concat };

/// Affine q/k/v projectors of one attention site. For cross-attention q
/// applies to the query stream and k/v to the key/value stream.
struct AttnParams {
  diff::LinearLayer q, k, v;
};

/// softmax(q k^T / sqrt(d_k)) v + F  (residual adds the input stream).
diff::Tensor self_attend(const diff::Tensor& F, const AttnParams& p);

/// softmax(q_i k_j^T / sqrt(d_k)) v_j + q_i  (residual adds the projected query).
diff::Tensor cross_attend(const diff::Tensor& F_q, const diff::Tensor& F_kv,
                          const AttnParams& p);

struct InstanceFusionParams {
  AttnParams sa_rgb, sa_g;
  AttnParams ca_rgb;  // queries from rgb, keys/values from g
  AttnParams ca_g;    // queries from g, keys/values from rgb
};

struct InstanceFusion {
  diff::Tensor f_rgb;  // [N_o x d] cross-attended rgb stream (foreground rows)
  diff::Tensor f_g;    // [N_o x d]
  diff::Tensor f_ins;  // [N_o x 2d]
};

/// Self-attention per stream, bidirectional cross-attention, then columnwise
/// concat restricted to foreground tokens. Concat mode skips the cross step.
/// Throws UsageError when fg_idx is empty (sample must be skipped upstream).
InstanceFusion fuse_instance(const diff::Tensor& F_rgb, const diff::Tensor& F_g,
                             const std::vector<long>& fg_idx,
                             const InstanceFusionParams& p, FusionMode mode);

struct CategoryFusionParams {
  diff::Mlp reduce;       // 2d -> d on instance tokens
  AttnParams ca;          // queries from reduced instance, k/v from category
  diff::LinearLayer mix;  // concat-mode replacement: 2d -> d
};

/// Cross-attention with instance-side queries over category features.
diff::Tensor fuse_with_category(const diff::Tensor& F_ins, const diff::Tensor& F_cat,
                                const CategoryFusionParams& p, FusionMode mode);

/// Concat of per-token features with the broadcast columnwise mean: [N_o x 2d].
diff::Tensor build_guidance_feature(const diff::Tensor& F_fuse);

}  // namespace rgbpose::net
