#include "rgbpose/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rgbpose::run {

void AdamState::init(const net::ParamStore& params) {
  m.clear();
  v.clear();
  t = 0;
  for (const auto& e : params.entries()) {
    if (e.frozen) continue;
    m.emplace_back(static_cast<size_t>(e.tensor.size()), 0.0);
    v.emplace_back(static_cast<size_t>(e.tensor.size()), 0.0);
  }
}

void AdamState::step(net::ParamStore& params) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  size_t k = 0;
  for (auto& e : params.entries()) {
    if (e.frozen) continue;
    auto& mk = m[k];
    auto& vk = v[k];
    double* x = e.tensor.data();
    if (e.tensor.has_grad()) {
      const double* g = e.tensor.grad();
      for (long i = 0; i < e.tensor.size(); ++i) {
        mk[i] = beta1 * mk[i] + (1.0 - beta1) * g[i];
        vk[i] = beta2 * vk[i] + (1.0 - beta2) * g[i] * g[i];
        x[i] -= lr * (mk[i] / bc1) / (std::sqrt(vk[i] / bc2) + eps);
      }
    } else {
      // unused parameter this step: moments still decay
      for (long i = 0; i < e.tensor.size(); ++i) {
        mk[i] = beta1 * mk[i];
        vk[i] = beta2 * vk[i];
        x[i] -= lr * (mk[i] / bc1) / (std::sqrt(vk[i] / bc2) + eps);
      }
    }
    ++k;
  }
}

void save_checkpoint(const std::string& path, const net::Model& model,
                     const TrainState& state) {
  std::vector<double> payload;
  std::ostringstream head;
  head << "rgbpose_checkpoint 1\n";
  head << "epoch " << state.epoch << "\n";
  head << "step " << state.step << "\n";
  head << "rng " << state.rng_state[0] << " " << state.rng_state[1] << " "
       << state.rng_state[2] << " " << state.rng_state[3] << "\n";
  head << "adam_t " << state.adam.t << "\n";
  head << "config_begin\n" << serialize(model.cfg) << "config_end\n";

  head << "params " << model.params.entries().size() << "\n";
  for (const auto& e : model.params.entries()) {
    head << "param " << e.name << " " << e.tensor.rows() << " " << e.tensor.cols() << " "
         << (e.frozen ? 1 : 0) << " " << payload.size() * sizeof(double) << "\n";
    payload.insert(payload.end(), e.tensor.data(), e.tensor.data() + e.tensor.size());
  }
  size_t k = 0;
  for (const auto& e : model.params.entries()) {
    if (e.frozen) continue;
    head << "adam " << e.name << " " << payload.size() * sizeof(double);
    payload.insert(payload.end(), state.adam.m[k].begin(), state.adam.m[k].end());
    head << " " << payload.size() * sizeof(double) << "\n";
    payload.insert(payload.end(), state.adam.v[k].begin(), state.adam.v[k].end());
    ++k;
  }
  head << "payload_bytes " << payload.size() * sizeof(double) << "\n";
  head << "payload\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  const std::string h = head.str();
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");

  std::string line;
  if (!std::getline(f, line) || line != "rgbpose_checkpoint 1")
    throw IoError("not a checkpoint file: " + path);

  TrainState state;
  std::string config_text;
  struct ParamRec {
    std::string name;
    long rows = 0, cols = 0;
    int frozen = 0;
    uint64_t off = 0;
  };
  std::vector<ParamRec> precs;
  struct AdamRec {
    std::string name;
    uint64_t m_off = 0, v_off = 0;
  };
  std::vector<AdamRec> arecs;
  uint64_t payload_bytes = 0;

  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word == "epoch") is >> state.epoch;
    else if (word == "step") is >> state.step;
    else if (word == "rng")
      is >> state.rng_state[0] >> state.rng_state[1] >> state.rng_state[2] >> state.rng_state[3];
    else if (word == "adam_t") is >> state.adam.t;
    else if (word == "config_begin") {
      while (std::getline(f, line) && line != "config_end") config_text += line + "\n";
    } else if (word == "params") {
      // count checked implicitly
    } else if (word == "param") {
      ParamRec r;
      is >> r.name >> r.rows >> r.cols >> r.frozen >> r.off;
      precs.push_back(r);
    } else if (word == "adam") {
      AdamRec r;
      is >> r.name >> r.m_off >> r.v_off;
      arecs.push_back(r);
    } else if (word == "payload_bytes") {
      is >> payload_bytes;
    } else if (word == "payload") {
      break;
    } else if (!word.empty()) {
      throw IoError("checkpoint: unknown header field '" + word + "'");
    }
  }

  std::vector<double> payload(payload_bytes / sizeof(double));
  f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<uint64_t>(f.gcount()) != payload_bytes)
    throw IoError("checkpoint: truncated payload");

  LoadedCheckpoint out{net::Model::build(deserialize_config(config_text)), state};

  auto fetch = [&](uint64_t off, long count) -> const double* {
    if (off % sizeof(double) != 0 || off / sizeof(double) + count > payload.size())
      throw IoError("checkpoint: payload offset out of range");
    return payload.data() + off / sizeof(double);
  };

  for (const auto& r : precs) {
    diff::Tensor t = out.model.params.find(r.name);
    if (t.rows() != r.rows || t.cols() != r.cols)
      throw ConfigError("checkpoint: parameter '" + r.name + "' shape mismatch");
    std::memcpy(t.data(), fetch(r.off, t.size()),
                static_cast<size_t>(t.size()) * sizeof(double));
  }

  out.state.adam.lr = out.model.cfg.learning_rate;
  out.state.adam.init(out.model.params);
  out.state.adam.t = state.adam.t;
  size_t k = 0;
  for (const auto& e : out.model.params.entries()) {
    if (e.frozen) continue;
    if (k >= arecs.size()) throw IoError("checkpoint: missing optimizer moments");
    if (arecs[k].name != e.name)
      throw IoError("checkpoint: optimizer moment order mismatch at '" + e.name + "'");
    const long count = e.tensor.size();
    std::memcpy(out.state.adam.m[k].data(), fetch(arecs[k].m_off, count),
                static_cast<size_t>(count) * sizeof(double));
    std::memcpy(out.state.adam.v[k].data(), fetch(arecs[k].v_off, count),
                static_cast<size_t>(count) * sizeof(double));
    ++k;
  }
  return out;
}

}  // namespace rgbpose::run
