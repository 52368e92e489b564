#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "rgbpose/backbone.hpp"
#include "rgbpose/config.hpp"
#include "rgbpose/fusion.hpp"
#include "rgbpose/heads.hpp"

namespace rgbpose::net {

/// Named parameter registry. Entry order is the creation order and fixes the
/// optimizer/checkpoint layout.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    diff::Tensor tensor;
    bool frozen = false;
  };

  diff::Tensor add(const std::string& name, long rows, long cols, bool frozen);
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  diff::Tensor find(const std::string& name) const;
  std::vector<diff::Tensor> trainable() const;
  void zero_grads();

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct ForwardOutputs {
  bool ok = false;
  std::string skip_reason;
  int n_fg = 0;
  diff::Tensor F_ins;    // [N_o x 2d]
  diff::Tensor F_cat;    // [N_r x d]
  diff::Tensor F_fuse;   // [N_o x d]
  diff::Tensor F_guid;   // [N_o x 2d]
  AssignmentPred assign;
  diff::Tensor D;        // [N_r x 3]
  ScalePred scale;
  Correspondences corr;
  geom::Vec3 pred_extents = geom::Vec3::Zero();  // deformed prior tight box
  diff::Tensor gt_nocs;  // [N_o x 3], training only
  diff::Tensor F_N;      // [N_o x 2d], training only
};

/// The full network: frozen patch embedder, geometric head, attention fusion,
/// prior encoder, frozen NOCS guidance encoder, and the three heads.
struct Model {
  run::RunConfig cfg;
  ParamStore params;

  PatchEmbed embed;
  diff::Mlp geom_head;
  InstanceFusionParams fusion_p;
  PointEncoderParams prior_enc;
  AttnParams sa_cat;
  CategoryFusionParams catfuse;
  PointEncoderParams nocs_enc;  // frozen, output width 2d
  HeadsParams heads;
  FusionMode fusion_mode = FusionMode::Attention;
  ScaleMode scale_mode = ScaleMode::Residual;

  static Model build(const run::RunConfig& cfg);

  /// Runs the pipeline on one sample. s_b is the category benchmark scale
  /// (from the dataset manifest). training adds the guidance target and the
  /// per-token NOCS ground truth. Inference should be run without an active
  /// tape. ok=false means the sample has no foreground tokens.
  ForwardOutputs forward(const synth::SceneSample& sample, double s_b, bool training) const;
};

}  // namespace rgbpose::net
