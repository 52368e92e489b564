#pragma once

#include "rgbpose/tensor.hpp"

namespace rgbpose::loss {

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.1;
  double lambda3 = 100.0;
  double entropy_w = 1e-3;
  double deform_w = 1e-2;
  double smooth_l1_beta = 0.1;
  bool scale_loss_l2 = false;
};

/// | dS_hat - dS | (or squared when l2), dS_hat = (s_gt - s_b)/s_b.
diff::Tensor scale_loss(const diff::Tensor& delta_s, double s_gt, double s_b, bool l2);

/// Direct-regression ablation: |s_raw - s_gt|.
diff::Tensor scale_loss_direct(const diff::Tensor& s_raw, double s_gt, bool l2);

struct CorrLoss {
  diff::Tensor main;  // smooth-L1 of predicted vs gt NOCS points
  diff::Tensor reg;   // entropy + deformation regularizers
};

CorrLoss corr_loss(const diff::Tensor& pred_nocs, const diff::Tensor& gt_nocs,
                   const diff::Tensor& a_logits, const diff::Tensor& D,
                   double beta, double entropy_w, double deform_w);

/// MSE between the guidance construction and the frozen NOCS features.
diff::Tensor guidance_loss(const diff::Tensor& f_fuse_guid, const diff::Tensor& f_n);

struct LossBreakdown {
  double L_s = 0, L_corr = 0, L_g = 0, reg = 0, total = 0;
  diff::Tensor total_t;
};

/// total = lambda1 L_s + lambda2 L_corr + lambda3 L_g + reg.
LossBreakdown total_loss(const diff::Tensor& L_s, const diff::Tensor& L_corr,
                         const diff::Tensor& L_g, const diff::Tensor& reg,
                         double lambda1, double lambda2, double lambda3);

}  // namespace rgbpose::loss
