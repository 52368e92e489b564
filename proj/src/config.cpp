#include "rgbpose/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rgbpose::run {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_f(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_num(const std::string& key, const std::string& v);

template <>
int parse_num<int>(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  return out;
}

template <>
uint64_t parse_num<uint64_t>(const std::string& key, const std::string& v) {
  size_t pos = 0;
  uint64_t out;
  try {
    out = std::stoull(v, &pos);
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  return out;
}

template <>
double parse_num<double>(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
  if (pos != v.size())
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': expected 0/1, got '" + v + "'");
}

const std::map<std::string, Field>& fields() {
#define INT_FIELD(name)                                                            \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_num<int>(#name, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define U64_FIELD(name)                                                            \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_num<uint64_t>(#name, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define DBL_FIELD(name)                                                            \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_num<double>(#name, v); }, \
           [](const RunConfig& c) { return fmt_f(c.name); }}}
#define BOOL_FIELD(name)                                                           \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
           [](const RunConfig& c) { return std::string(c.name ? "1" : "0"); }}}
#define STR_FIELD(name)                                                            \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = v; },                 \
           [](const RunConfig& c) { return c.name; }}}

  static const std::map<std::string, Field> m = {
      INT_FIELD(dim), INT_FIELD(patch_size), INT_FIELD(image_size), INT_FIELD(n_prior),
      INT_FIELD(geom_hidden), INT_FIELD(point_hidden), INT_FIELD(point_feat),
      INT_FIELD(a_hidden), INT_FIELD(d_hidden), INT_FIELD(s_hidden),
      STR_FIELD(fusion_mode), STR_FIELD(scale_mode), DBL_FIELD(lambda1), DBL_FIELD(lambda2),
      DBL_FIELD(lambda3), DBL_FIELD(entropy_weight), DBL_FIELD(deform_weight),
      DBL_FIELD(smooth_l1_beta), BOOL_FIELD(scale_loss_l2), INT_FIELD(batch_size),
      INT_FIELD(epochs), DBL_FIELD(learning_rate), INT_FIELD(checkpoint_every),
      U64_FIELD(seed), INT_FIELD(workers), INT_FIELD(train_per_category),
      INT_FIELD(test_per_category), INT_FIELD(n_model_points), INT_FIELD(n_render_points),
      INT_FIELD(prior_instances), DBL_FIELD(depth_rel_min), DBL_FIELD(depth_rel_max),
      DBL_FIELD(scale_jitter), DBL_FIELD(center_jitter), DBL_FIELD(focal_factor),
      BOOL_FIELD(noise_augment), DBL_FIELD(noise_sigma), DBL_FIELD(s_b_bottle),
      DBL_FIELD(s_b_bowl), DBL_FIELD(s_b_camera), DBL_FIELD(s_b_can), DBL_FIELD(s_b_laptop),
      DBL_FIELD(s_b_mug), INT_FIELD(ransac_max_iterations), DBL_FIELD(ransac_threshold_px),
      DBL_FIELD(ransac_confidence), INT_FIELD(ransac_min_inliers),
      INT_FIELD(ransac_refine_iterations), INT_FIELD(iou_grid),
  };
#undef INT_FIELD
#undef U64_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD
#undef STR_FIELD
  return m;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& raw) {
  std::string line = raw;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: expected 'key = value', got '" + line + "'");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig cfg;
  std::string line;
  while (std::getline(f, line)) apply_config_line(cfg, line);
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0))
      throw ConfigError(std::string("config field '") + name + "' must be positive");
  };
  positive("dim", c.dim);
  positive("patch_size", c.patch_size);
  positive("image_size", c.image_size);
  positive("n_prior", c.n_prior);
  positive("geom_hidden", c.geom_hidden);
  positive("point_hidden", c.point_hidden);
  positive("point_feat", c.point_feat);
  positive("a_hidden", c.a_hidden);
  positive("d_hidden", c.d_hidden);
  positive("s_hidden", c.s_hidden);
  positive("batch_size", c.batch_size);
  positive("learning_rate", c.learning_rate);
  positive("smooth_l1_beta", c.smooth_l1_beta);
  positive("n_model_points", c.n_model_points);
  positive("n_render_points", c.n_render_points);
  positive("focal_factor", c.focal_factor);
  positive("ransac_threshold_px", c.ransac_threshold_px);
  positive("iou_grid", c.iou_grid);
  if (c.image_size % c.patch_size != 0)
    throw ConfigError("config: patch_size must divide image_size");
  if (c.epochs < 0) throw ConfigError("config field 'epochs' must be >= 0");
  if (c.lambda1 < 0 || c.lambda2 < 0 || c.lambda3 < 0)
    throw ConfigError("config: lambda weights must be >= 0");
  if (c.fusion_mode != "attention" && c.fusion_mode != "concat")
    throw ConfigError("config field 'fusion_mode' must be attention|concat");
  if (c.scale_mode != "residual" && c.scale_mode != "direct")
    throw ConfigError("config field 'scale_mode' must be residual|direct");
  if (c.prior_instances < 8)
    throw ConfigError("config field 'prior_instances' must be >= 8 training shapes");
  if (!(c.ransac_confidence > 0 && c.ransac_confidence < 1))
    throw ConfigError("config field 'ransac_confidence' must be in (0,1)");
  if (c.ransac_min_inliers < 4)
    throw ConfigError("config field 'ransac_min_inliers' must be >= 4");
  if (c.depth_rel_min <= 0 || c.depth_rel_max < c.depth_rel_min)
    throw ConfigError("config: depth range must satisfy 0 < depth_rel_min <= depth_rel_max");
  if (c.scale_jitter < 0 || c.scale_jitter >= 1)
    throw ConfigError("config field 'scale_jitter' must be in [0,1)");
  if (c.train_per_category < 0 || c.test_per_category < 0)
    throw ConfigError("config: per-category sample counts must be >= 0");
  for (double sb : {c.s_b_bottle, c.s_b_bowl, c.s_b_camera, c.s_b_can, c.s_b_laptop, c.s_b_mug})
    if (!(sb > 0)) throw ConfigError("config: benchmark scales must be positive");
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, field] : fields()) out << key << " = " << field.get(cfg) << "\n";
  return out.str();
}

RunConfig deserialize_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) apply_config_line(cfg, line);
  validate(cfg);
  return cfg;
}

synth::GenConfig gen_config(const RunConfig& c) {
  synth::GenConfig g;
  g.image_size = c.image_size;
  g.n_prior = c.n_prior;
  g.n_model_points = c.n_model_points;
  g.n_render_points = c.n_render_points;
  g.prior_instances = c.prior_instances;
  g.train_per_category = c.train_per_category;
  g.test_per_category = c.test_per_category;
  g.depth_rel_min = c.depth_rel_min;
  g.depth_rel_max = c.depth_rel_max;
  g.scale_jitter = c.scale_jitter;
  g.center_jitter = c.center_jitter;
  g.focal_factor = c.focal_factor;
  g.noise_augment = c.noise_augment;
  g.noise_sigma = c.noise_sigma;
  g.categories = synth::default_categories();
  const double sb[6] = {c.s_b_bottle, c.s_b_bowl, c.s_b_camera,
                        c.s_b_can,    c.s_b_laptop, c.s_b_mug};
  for (auto& cat : g.categories) cat.s_b = sb[cat.id];
  return g;
}

}  // namespace rgbpose::run
