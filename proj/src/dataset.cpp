#include "rgbpose/dataset.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rgbpose::synth {

namespace {

std::string fmt_f(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_f32(std::vector<char>& out, const std::vector<double>& v) {
  for (double d : v) {
    const float f = static_cast<float>(d);
    const char* p = reinterpret_cast<const char*>(&f);
    out.insert(out.end(), p, p + 4);
  }
}

void append_points_f32(std::vector<char>& out, const geom::Points& pts) {
  for (const auto& p : pts)
    for (int c = 0; c < 3; ++c) {
      const float f = static_cast<float>(p[c]);
      const char* q = reinterpret_cast<const char*>(&f);
      out.insert(out.end(), q, q + 4);
    }
}

std::vector<double> read_f32(const std::vector<char>& payload, uint64_t off, size_t count) {
  if (off + count * 4 > payload.size()) throw IoError("dataset payload: offset out of range");
  std::vector<double> out(count);
  for (size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, payload.data() + off + i * 4, 4);
    out[i] = static_cast<double>(f);
  }
  return out;
}

geom::Points read_points_f32(const std::vector<char>& payload, uint64_t off, size_t count) {
  std::vector<double> flat = read_f32(payload, off, count * 3);
  geom::Points pts(count);
  for (size_t i = 0; i < count; ++i)
    pts[i] = geom::Vec3(flat[i * 3], flat[i * 3 + 1], flat[i * 3 + 2]);
  return pts;
}

}  // namespace

std::string split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw IoError("unknown split '" + name + "'");
}

GenSummary write_dataset(const GenConfig& cfg, uint64_t seed, const std::string& out_dir,
                         int workers) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  const int n_cats = static_cast<int>(cfg.categories.size());

  // priors first
  std::vector<geom::Points> priors(n_cats);
  for (int c = 0; c < n_cats; ++c)
    priors[c] = make_prior(cfg.categories[c], derive_seed(seed, 0x50 + c),
                           cfg.prior_instances, cfg.n_prior, cfg.n_model_points);

  struct Job {
    Split split;
    int index;
    int category;
  };
  std::vector<Job> jobs;
  for (int c = 0; c < n_cats; ++c)
    for (int i = 0; i < cfg.train_per_category; ++i) jobs.push_back({Split::Train, i, c});
  for (int c = 0; c < n_cats; ++c)
    for (int i = 0; i < cfg.test_per_category; ++i) jobs.push_back({Split::Test, i, c});

  std::vector<SceneSample> samples(jobs.size());
  std::string gen_error;
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#endif
#pragma omp parallel for schedule(dynamic)
  for (long j = 0; j < static_cast<long>(jobs.size()); ++j) {
    try {
      const Job& job = jobs[j];
      samples[j] = sample_scene(cfg, cfg.categories[job.category], priors[job.category],
                                seed, job.split, job.index);
    } catch (const std::exception& e) {
#pragma omp critical
      gen_error = e.what();
    }
  }
  if (!gen_error.empty()) throw GenerationError("dataset generation failed: " + gen_error);

  // payload: priors, then per-sample blocks in job order
  std::vector<char> payload;
  std::vector<uint64_t> prior_off(n_cats);
  for (int c = 0; c < n_cats; ++c) {
    prior_off[c] = payload.size();
    append_points_f32(payload, priors[c]);
  }
  std::vector<SampleMeta> metas(jobs.size());
  for (size_t j = 0; j < jobs.size(); ++j) {
    const SceneSample& s = samples[j];
    SampleMeta m;
    m.split = jobs[j].split;
    m.index = jobs[j].index;
    m.category = s.category;
    m.seed = s.sample_seed;
    m.n_model = static_cast<long>(s.model_points.size());
    m.K = s.K;
    m.pose = s.pose;
    m.extents = s.extents;
    m.image_off = payload.size();
    append_f32(payload, s.image);
    m.mask_off = payload.size();
    payload.insert(payload.end(), s.mask.begin(), s.mask.end());
    m.nocs_off = payload.size();
    append_f32(payload, s.nocs_map);
    m.model_off = payload.size();
    append_points_f32(payload, s.model_points);
    metas[j] = m;
  }

  std::ostringstream man;
  man << "rgbpose_dataset 1\n";
  man << "seed " << seed << "\n";
  man << "image_size " << cfg.image_size << "\n";
  man << "n_prior " << cfg.n_prior << "\n";
  man << "n_model_points " << cfg.n_model_points << "\n";
  man << "n_render_points " << cfg.n_render_points << "\n";
  man << "prior_instances " << cfg.prior_instances << "\n";
  man << "train_per_category " << cfg.train_per_category << "\n";
  man << "test_per_category " << cfg.test_per_category << "\n";
  man << "depth_rel_min " << fmt_f(cfg.depth_rel_min) << "\n";
  man << "depth_rel_max " << fmt_f(cfg.depth_rel_max) << "\n";
  man << "scale_jitter " << fmt_f(cfg.scale_jitter) << "\n";
  man << "center_jitter " << fmt_f(cfg.center_jitter) << "\n";
  man << "focal_factor " << fmt_f(cfg.focal_factor) << "\n";
  man << "noise_augment " << (cfg.noise_augment ? 1 : 0) << "\n";
  man << "noise_sigma " << fmt_f(cfg.noise_sigma) << "\n";
  man << "categories " << n_cats << "\n";
  for (int c = 0; c < n_cats; ++c) {
    const auto& cat = cfg.categories[c];
    man << "category " << cat.id << " " << cat.name << " " << fmt_f(cat.s_b) << " "
        << (cat.symmetric ? 1 : 0) << " " << prior_off[c] << "\n";
  }
  man << "samples " << metas.size() << "\n";
  for (const auto& m : metas) {
    man << "sample " << split_name(m.split) << " " << m.index << " " << m.category << " "
        << m.seed << " " << m.n_model << " " << m.image_off << " " << m.mask_off << " "
        << m.nocs_off << " " << m.model_off << " " << fmt_f(m.K.fx) << " " << fmt_f(m.K.fy)
        << " " << fmt_f(m.K.cx) << " " << fmt_f(m.K.cy);
    for (int r = 0; r < 3; ++r)
      for (int c2 = 0; c2 < 3; ++c2) man << " " << fmt_f(m.pose.R(r, c2));
    for (int c2 = 0; c2 < 3; ++c2) man << " " << fmt_f(m.pose.t[c2]);
    man << " " << fmt_f(m.pose.s);
    for (int c2 = 0; c2 < 3; ++c2) man << " " << fmt_f(m.extents[c2]);
    man << "\n";
  }

  {
    std::ofstream f(out_dir + "/manifest.txt", std::ios::binary);
    if (!f) throw IoError("cannot write " + out_dir + "/manifest.txt");
    f << man.str();
  }
  {
    std::ofstream f(out_dir + "/payload.bin", std::ios::binary);
    if (!f) throw IoError("cannot write " + out_dir + "/payload.bin");
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }

  GenSummary sum;
  for (int c = 0; c < n_cats; ++c) {
    sum.category_names.push_back(cfg.categories[c].name);
    sum.s_b.push_back(cfg.categories[c].s_b);
    sum.train_counts.push_back(cfg.train_per_category);
    sum.test_counts.push_back(cfg.test_per_category);
  }
  sum.payload_bytes = payload.size();
  return sum;
}

DatasetReader DatasetReader::open(const std::string& dir) {
  DatasetReader r;
  std::ifstream f(dir + "/manifest.txt");
  if (!f) throw IoError("cannot open " + dir + "/manifest.txt");

  std::string word;
  f >> word;
  if (word != "rgbpose_dataset") throw IoError("not a dataset manifest: " + dir);
  int version;
  f >> version;
  if (version != 1) throw IoError("unsupported dataset version " + std::to_string(version));

  GenConfig& cfg = r.cfg_;
  cfg.categories.clear();
  std::vector<uint64_t> prior_off;
  long n_samples = -1;

  while (f >> word) {
    if (word == "seed") f >> r.seed_;
    else if (word == "image_size") f >> cfg.image_size;
    else if (word == "n_prior") f >> cfg.n_prior;
    else if (word == "n_model_points") f >> cfg.n_model_points;
    else if (word == "n_render_points") f >> cfg.n_render_points;
    else if (word == "prior_instances") f >> cfg.prior_instances;
    else if (word == "train_per_category") f >> cfg.train_per_category;
    else if (word == "test_per_category") f >> cfg.test_per_category;
    else if (word == "depth_rel_min") f >> cfg.depth_rel_min;
    else if (word == "depth_rel_max") f >> cfg.depth_rel_max;
    else if (word == "scale_jitter") f >> cfg.scale_jitter;
    else if (word == "center_jitter") f >> cfg.center_jitter;
    else if (word == "focal_factor") f >> cfg.focal_factor;
    else if (word == "noise_augment") { int v; f >> v; cfg.noise_augment = v != 0; }
    else if (word == "noise_sigma") f >> cfg.noise_sigma;
    else if (word == "categories") { int n; f >> n; }
    else if (word == "category") {
      CategorySpec spec;
      int sym;
      uint64_t off;
      f >> spec.id >> spec.name >> spec.s_b >> sym >> off;
      spec.symmetric = sym != 0;
      // parameter ranges are built-in per family
      for (const auto& d : default_categories())
        if (d.name == spec.name) spec.params = d.params;
      cfg.categories.push_back(spec);
      prior_off.push_back(off);
    } else if (word == "samples") {
      f >> n_samples;
    } else if (word == "sample") {
      SampleMeta m;
      std::string sp;
      f >> sp >> m.index >> m.category >> m.seed >> m.n_model >> m.image_off >> m.mask_off >>
          m.nocs_off >> m.model_off >> m.K.fx >> m.K.fy >> m.K.cx >> m.K.cy;
      for (int rr = 0; rr < 3; ++rr)
        for (int cc = 0; cc < 3; ++cc) f >> m.pose.R(rr, cc);
      for (int cc = 0; cc < 3; ++cc) f >> m.pose.t[cc];
      f >> m.pose.s;
      for (int cc = 0; cc < 3; ++cc) f >> m.extents[cc];
      m.split = split_from_name(sp);
      (m.split == Split::Train ? r.train_ : r.test_).push_back(m);
    } else {
      throw IoError("dataset manifest: unknown field '" + word + "'");
    }
  }
  if (n_samples >= 0 &&
      n_samples != static_cast<long>(r.train_.size() + r.test_.size()))
    throw IoError("dataset manifest: sample count mismatch");

  {
    std::ifstream p(dir + "/payload.bin", std::ios::binary | std::ios::ate);
    if (!p) throw IoError("cannot open " + dir + "/payload.bin");
    const std::streamsize bytes = p.tellg();
    p.seekg(0);
    r.payload_.resize(static_cast<size_t>(bytes));
    p.read(r.payload_.data(), bytes);
  }

  r.priors_.resize(cfg.categories.size());
  for (size_t c = 0; c < cfg.categories.size(); ++c)
    r.priors_[c] = read_points_f32(r.payload_, prior_off[c], cfg.n_prior);
  return r;
}

int DatasetReader::count(Split split) const {
  return static_cast<int>(split == Split::Train ? train_.size() : test_.size());
}

const SampleMeta& DatasetReader::meta(Split split, int index) const {
  const auto& v = split == Split::Train ? train_ : test_;
  if (index < 0 || index >= static_cast<int>(v.size()))
    throw UsageError("dataset: sample index " + std::to_string(index) + " out of range for " +
                     split_name(split) + " split of " + std::to_string(v.size()));
  return v[index];
}

SceneSample DatasetReader::load(Split split, int index) const {
  const SampleMeta& m = meta(split, index);
  SceneSample s;
  s.category = m.category;
  s.width = s.height = cfg_.image_size;
  s.sample_seed = m.seed;
  s.K = m.K;
  s.pose = m.pose;
  s.extents = m.extents;
  const size_t hw = static_cast<size_t>(cfg_.image_size) * cfg_.image_size;
  s.image = read_f32(payload_, m.image_off, hw * 3);
  s.mask.resize(hw);
  if (m.mask_off + hw > payload_.size()) throw IoError("dataset payload: mask out of range");
  std::memcpy(s.mask.data(), payload_.data() + m.mask_off, hw);
  s.nocs_map = read_f32(payload_, m.nocs_off, hw * 3);
  s.model_points = read_points_f32(payload_, m.model_off, static_cast<size_t>(m.n_model));
  s.prior = priors_.at(m.category);
  return s;
}

}  // namespace rgbpose::synth
