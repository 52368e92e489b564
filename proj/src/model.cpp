#include "rgbpose/model.hpp"

#include <cmath>

namespace rgbpose::net {

using diff::Tensor;

diff::Tensor ParamStore::add(const std::string& name, long rows, long cols, bool frozen) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Entry e;
  e.name = name;
  e.tensor = Tensor::zeros(rows, cols, !frozen);
  e.frozen = frozen;
  index_[name] = entries_.size();
  entries_.push_back(e);
  return entries_.back().tensor;
}

diff::Tensor ParamStore::find(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

std::vector<diff::Tensor> ParamStore::trainable() const {
  std::vector<diff::Tensor> out;
  for (const auto& e : entries_)
    if (!e.frozen) out.push_back(e.tensor);
  return out;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.drop_grad();
}

namespace {

void he_init(Tensor t, Rng& rng) {
  const double std_w = std::sqrt(2.0 / static_cast<double>(t.rows()));
  for (long i = 0; i < t.size(); ++i) t.data()[i] = std_w * rng.normal();
}

diff::LinearLayer make_linear(ParamStore& ps, const std::string& name, long d_in, long d_out,
                              Rng& rng, bool frozen, bool zero_init) {
  diff::LinearLayer l;
  l.W = ps.add(name + ".W", d_in, d_out, frozen);
  l.b = ps.add(name + ".b", 1, d_out, frozen);
  if (!zero_init) he_init(l.W, rng);
  return l;
}

diff::Mlp make_mlp(ParamStore& ps, const std::string& name, long d_in,
                   const std::vector<long>& hidden, long d_out, Rng& rng, bool frozen,
                   bool zero_init_last) {
  diff::Mlp mlp;
  long cur = d_in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    mlp.layers.push_back(
        make_linear(ps, name + ".l" + std::to_string(i), cur, hidden[i], rng, frozen, false));
    cur = hidden[i];
  }
  mlp.layers.push_back(make_linear(ps, name + ".l" + std::to_string(hidden.size()), cur, d_out,
                                   rng, frozen, zero_init_last));
  diff::validate_mlp(mlp, d_in, d_out, name);
  return mlp;
}

AttnParams make_attn(ParamStore& ps, const std::string& name, long d, Rng& rng) {
  AttnParams p;
  p.q = make_linear(ps, name + ".q", d, d, rng, false, false);
  p.k = make_linear(ps, name + ".k", d, d, rng, false, false);
  p.v = make_linear(ps, name + ".v", d, d, rng, false, false);
  return p;
}

PointEncoderParams make_point_encoder(ParamStore& ps, const std::string& name, long hidden,
                                      long feat, long d_out, Rng& rng, bool frozen) {
  PointEncoderParams enc;
  enc.mlp1 = make_mlp(ps, name + ".mlp1", 3, {hidden}, feat, rng, frozen, false);
  enc.mlp2 = make_mlp(ps, name + ".mlp2", 2 * feat, {hidden}, d_out, rng, frozen, false);
  return enc;
}

}  // namespace

Model Model::build(const run::RunConfig& cfg) {
  run::validate(cfg);
  Model m;
  m.cfg = cfg;
  m.fusion_mode = cfg.fusion_mode == "concat" ? FusionMode::Concat : FusionMode::Attention;
  m.scale_mode = cfg.scale_mode == "direct" ? ScaleMode::Direct : ScaleMode::Residual;
  const long d = cfg.dim;

  Rng rng(derive_seed(cfg.seed, 0x4d4f44454cULL));  // model init stream

  // frozen patch projector; registered so checkpoints carry it
  m.embed = make_patch_embed(cfg.image_size, cfg.patch_size, cfg.dim,
                             derive_seed(cfg.seed, 0x454d4245ULL));
  {
    Tensor w = m.params.add("embed.W", m.embed.W.rows(), m.embed.W.cols(), true);
    std::copy(m.embed.W.data(), m.embed.W.data() + m.embed.W.size(), w.data());
    m.embed.W = w;
  }

  m.geom_head = make_mlp(m.params, "geom_head", d, {cfg.geom_hidden}, d, rng, false, true);

  m.fusion_p.sa_rgb = make_attn(m.params, "sa_rgb", d, rng);
  m.fusion_p.sa_g = make_attn(m.params, "sa_g", d, rng);
  m.fusion_p.ca_rgb = make_attn(m.params, "ca_rgb", d, rng);
  m.fusion_p.ca_g = make_attn(m.params, "ca_g", d, rng);

  m.prior_enc = make_point_encoder(m.params, "prior_enc", cfg.point_hidden, cfg.point_feat,
                                   d, rng, false);
  m.sa_cat = make_attn(m.params, "sa_cat", d, rng);

  m.catfuse.reduce = make_mlp(m.params, "fuse_reduce", 2 * d, {}, d, rng, false, false);
  m.catfuse.ca = make_attn(m.params, "ca_fuse", d, rng);
  m.catfuse.mix = make_linear(m.params, "fuse_mix", 2 * d, d, rng, false, false);

  // frozen guidance encoder; output width 2d matches the guidance construction
  m.nocs_enc = make_point_encoder(m.params, "nocs_enc", cfg.point_hidden, cfg.point_feat,
                                  2 * d, rng, true);
  {
    // frozen weights come from a dedicated stream so they are independent of
    // the trainable init order
    Rng frozen_rng(derive_seed(cfg.seed, 0x4e4f4353ULL));
    for (auto& e : m.params.entries())
      if (e.frozen && e.name.rfind("nocs_enc", 0) == 0 && e.name.back() == 'W')
        he_init(e.tensor, frozen_rng);
  }

  m.heads.a_head =
      make_mlp(m.params, "a_head", 3 * d, {cfg.a_hidden}, cfg.n_prior, rng, false, true);
  m.heads.d_head = make_mlp(m.params, "d_head", 2 * d, {cfg.d_hidden}, 3, rng, false, true);
  m.heads.s_head = make_mlp(m.params, "s_head", 3 * d, {cfg.s_hidden}, 1, rng, false, true);
  return m;
}

ForwardOutputs Model::forward(const synth::SceneSample& sample, double s_b,
                              bool training) const {
  ForwardOutputs out;

  PatchGrid grid = embed_patches(sample.image, sample.mask, sample.height, sample.width, embed);
  const std::vector<long> fg = grid.fg_indices();
  if (fg.empty()) {
    out.skip_reason = "no foreground tokens";
    return out;
  }
  out.n_fg = static_cast<int>(fg.size());

  Tensor F_rgb = grid.tokens;
  Tensor F_g = diff::mlp_forward(F_rgb, geom_head);

  InstanceFusion ins = fuse_instance(F_rgb, F_g, fg, fusion_p, fusion_mode);
  out.F_ins = ins.f_ins;

  // prior branch
  Tensor prior_t(static_cast<long>(sample.prior.size()), 3);
  for (size_t i = 0; i < sample.prior.size(); ++i)
    for (int c = 0; c < 3; ++c) prior_t.at(static_cast<long>(i), c) = sample.prior[i][c];
  Tensor F_r = encode_points(prior_t, prior_enc);
  out.F_cat = self_attend(F_r, sa_cat);

  out.F_fuse = fuse_with_category(out.F_ins, out.F_cat, catfuse, fusion_mode);
  out.F_guid = build_guidance_feature(out.F_fuse);

  out.assign = predict_assignment(out.F_ins, out.F_fuse, heads.a_head);
  out.D = predict_deformation(out.F_cat, out.F_fuse, heads.d_head);
  out.scale = predict_scale(out.F_ins, out.F_fuse, s_b, heads.s_head, scale_mode);

  std::vector<geom::Vec2> pixels;
  pixels.reserve(fg.size());
  for (long tok : fg) pixels.emplace_back(grid.rep_pixel[tok][0], grid.rep_pixel[tok][1]);
  out.corr =
      assemble_correspondences(out.assign.A, out.D, prior_t, out.scale.s, std::move(pixels));

  {
    // tight box of the deformed prior (values only; not differentiated)
    geom::Vec3 lo = geom::Vec3::Constant(1e30), hi = geom::Vec3::Constant(-1e30);
    for (long i = 0; i < out.D.rows(); ++i)
      for (int c = 0; c < 3; ++c) {
        const double v = prior_t.at(i, c) + out.D.at(i, c);
        lo[c] = std::min(lo[c], v);
        hi[c] = std::max(hi[c], v);
      }
    out.pred_extents = hi - lo;
  }

  if (training) {
    Tensor gt(static_cast<long>(fg.size()), 3);
    for (size_t r = 0; r < fg.size(); ++r) {
      const auto ij = grid.rep_pixel_ij[fg[r]];
      const size_t pix = static_cast<size_t>(ij[1]) * sample.width + ij[0];
      for (int c = 0; c < 3; ++c) gt.at(static_cast<long>(r), c) = sample.nocs_map[pix * 3 + c];
    }
    out.gt_nocs = gt;
    out.F_N = encode_points(gt, nocs_enc);
  }

  out.ok = true;
  return out;
}

}  // namespace rgbpose::net
