#include "rgbpose/losses.hpp"

namespace rgbpose::loss {

using diff::Tensor;

Tensor scale_loss(const Tensor& delta_s, double s_gt, double s_b, bool l2) {
  if (s_b <= 0.0) throw ConfigError("scale_loss: benchmark scale must be positive");
  const double delta_hat = (s_gt - s_b) / s_b;
  Tensor diff_t = diff::add_scalar(delta_s, -delta_hat);
  if (l2) return diff::mean_all(diff::mul(diff_t, diff_t));
  return diff::mean_all(diff::abs_elem(diff_t));
}

Tensor scale_loss_direct(const Tensor& s_raw, double s_gt, bool l2) {
  Tensor diff_t = diff::add_scalar(s_raw, -s_gt);
  if (l2) return diff::mean_all(diff::mul(diff_t, diff_t));
  return diff::mean_all(diff::abs_elem(diff_t));
}

CorrLoss corr_loss(const Tensor& pred_nocs, const Tensor& gt_nocs, const Tensor& a_logits,
                   const Tensor& D, double beta, double entropy_w, double deform_w) {
  CorrLoss out;
  out.main = diff::smooth_l1(pred_nocs, gt_nocs, beta);
  Tensor entropy = diff::row_entropy_from_logits(a_logits);
  // mean squared offset norm = sum(D^2) / N_r
  Tensor deform = diff::scale(diff::sum_all(diff::mul(D, D)), 1.0 / static_cast<double>(D.rows()));
  out.reg = diff::add(diff::scale(entropy, entropy_w), diff::scale(deform, deform_w));
  return out;
}

Tensor guidance_loss(const Tensor& f_fuse_guid, const Tensor& f_n) {
  return diff::mse(f_fuse_guid, f_n);
}

LossBreakdown total_loss(const Tensor& L_s, const Tensor& L_corr, const Tensor& L_g,
                         const Tensor& reg, double lambda1, double lambda2, double lambda3) {
  if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0)
    throw ConfigError("total_loss: loss weights must be non-negative");
  LossBreakdown b;
  b.L_s = L_s.value();
  b.L_corr = L_corr.value();
  b.L_g = L_g.value();
  b.reg = reg.defined() ? reg.value() : 0.0;
  Tensor t = diff::add(diff::add(diff::scale(L_s, lambda1), diff::scale(L_corr, lambda2)),
                       diff::scale(L_g, lambda3));
  if (reg.defined()) t = diff::add(t, reg);
  b.total_t = t;
  b.total = t.value();
  return b;
}

}  // namespace rgbpose::loss
