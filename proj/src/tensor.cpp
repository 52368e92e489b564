#include "rgbpose/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rgbpose/kernels.hpp"

namespace rgbpose::diff {

namespace {

thread_local Tape* g_active_tape = nullptr;
bool g_debug_checks = false;

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
}

void check_finite(const Tensor& t, const char* op) {
  if (!g_debug_checks) return;
  const double* p = t.data();
  for (long i = 0; i < t.size(); ++i)
    if (!std::isfinite(p[i]))
      throw UsageError(std::string("non-finite value produced by op '") + op + "'");
}

// Marks the output, runs the debug scan, and records the closure when a tape
// is active and gradients are needed.
void finish(const char* op, Tensor& out, bool needs_grad, std::function<void()> fn) {
  out.set_requires_grad(needs_grad);
  check_finite(out, op);
  if (needs_grad && Tape::active()) Tape::active()->record(op, out, std::move(fn));
}

void accumulate(Tensor& dst, const double* g, long count) {
  dst.ensure_grad();
  double* d = dst.grad();
  for (long i = 0; i < count; ++i) d[i] += g[i];
}

}  // namespace

Tensor::Tensor(long rows, long cols, bool requires_grad) {
  if (rows <= 0 || cols <= 0)
    throw ShapeError("Tensor: extents must be positive, got [" +
                     std::to_string(rows) + "x" + std::to_string(cols) + "]");
  impl_ = std::make_shared<Impl>();
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->data.assign(static_cast<size_t>(rows * cols), 0.0);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(long rows, long cols, bool requires_grad) {
  return Tensor(rows, cols, requires_grad);
}

Tensor Tensor::from(std::vector<double> data, long rows, long cols, bool requires_grad) {
  Tensor t(rows, cols, requires_grad);
  if (static_cast<long>(data.size()) != rows * cols)
    throw ShapeError("Tensor::from: data length " + std::to_string(data.size()) +
                     " does not match shape [" + std::to_string(rows) + "x" +
                     std::to_string(cols) + "]");
  t.impl_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Tensor t(1, 1, requires_grad);
  t.data()[0] = v;
  return t;
}

double Tensor::value() const {
  if (size() != 1) throw UsageError("Tensor::value: tensor is not scalar, shape " + shape_str(*this));
  return data()[0];
}

void Tensor::ensure_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::drop_grad() {
  if (impl_) impl_->grad.clear();
}

std::vector<double> Tensor::grad_copy() const {
  if (!has_grad()) return std::vector<double>(static_cast<size_t>(size()), 0.0);
  return impl_->grad;
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope() : prev_(g_active_tape) { g_active_tape = &tape_; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks() { return g_debug_checks; }

// ---- ops -------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner extents disagree " + shape_str(a) + " x " + shape_str(b));
  const long m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out(m, n);
  kern::gemm(false, false, m, n, k, a.data(), b.data(), out.data(), false);
  const bool ng = a.requires_grad() || b.requires_grad();
  finish("matmul", out, ng, [a, b, out]() mutable {
    const double* g = out.grad();
    const long m = a.rows(), k = a.cols(), n = b.cols();
    if (a.requires_grad()) {
      a.ensure_grad();
      kern::gemm(false, true, m, k, n, g, b.data(), a.grad(), true);
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      kern::gemm(true, false, k, n, m, a.data(), g, b.grad(), true);
    }
  });
  return out;
}

Tensor add(Tensor a, Tensor b) {
  require_same_shape(a, b, "add");
  Tensor out(a.rows(), a.cols());
  const long count = a.size();
  for (long i = 0; i < count; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  finish("add", out, a.requires_grad() || b.requires_grad(), [a, b, out]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) accumulate(a, g, a.size());
    if (b.requires_grad()) accumulate(b, g, b.size());
  });
  return out;
}

Tensor sub(Tensor a, Tensor b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  finish("sub", out, a.requires_grad() || b.requires_grad(), [a, b, out]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) accumulate(a, g, a.size());
    if (b.requires_grad()) {
      b.ensure_grad();
      double* d = b.grad();
      for (long i = 0; i < b.size(); ++i) d[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(Tensor a, Tensor b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  finish("mul", out, a.requires_grad() || b.requires_grad(), [a, b, out]() mutable {
    const double* g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      double* d = a.grad();
      for (long i = 0; i < a.size(); ++i) d[i] += g[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      double* d = b.grad();
      for (long i = 0; i < b.size(); ++i) d[i] += g[i] * a.data()[i];
    }
  });
  return out;
}

Tensor add_rowvec(Tensor x, Tensor b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    throw ShapeError("add_rowvec: bias " + shape_str(b) + " does not broadcast over " + shape_str(x));
  Tensor out(x.rows(), x.cols());
  const long n = x.rows(), d = x.cols();
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < d; ++j) out.at(i, j) = x.at(i, j) + b.data()[j];
  finish("add_rowvec", out, x.requires_grad() || b.requires_grad(), [x, b, out]() mutable {
    const double* g = out.grad();
    const long n = x.rows(), d = x.cols();
    if (x.requires_grad()) accumulate(x, g, x.size());
    if (b.requires_grad()) {
      b.ensure_grad();
      double* db = b.grad();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < d; ++j) db[j] += g[i * d + j];
    }
  });
  return out;
}

Tensor scale(Tensor a, double c) {
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = c * a.data()[i];
  finish("scale", out, a.requires_grad(), [a, out, c]() mutable {
    const double* g = out.grad();
    a.ensure_grad();
    double* d = a.grad();
    for (long i = 0; i < a.size(); ++i) d[i] += c * g[i];
  });
  return out;
}

Tensor add_scalar(Tensor a, double c) {
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + c;
  finish("add_scalar", out, a.requires_grad(), [a, out]() mutable {
    accumulate(a, out.grad(), a.size());
  });
  return out;
}

Tensor leaky_relu(Tensor a, double slope) {
  Tensor out(a.rows(), a.cols());
  kern::leaky_relu(a.data(), out.data(), a.size(), slope);
  finish("leaky_relu", out, a.requires_grad(), [a, out, slope]() mutable {
    const double* g = out.grad();
    a.ensure_grad();
    double* d = a.grad();
    for (long i = 0; i < a.size(); ++i)
      d[i] += g[i] * (a.data()[i] > 0.0 ? 1.0 : slope);
  });
  return out;
}

Tensor clamp(Tensor a, double lo, double hi) {
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = std::clamp(a.data()[i], lo, hi);
  finish("clamp", out, a.requires_grad(), [a, out, lo, hi]() mutable {
    const double* g = out.grad();
    a.ensure_grad();
    double* d = a.grad();
    for (long i = 0; i < a.size(); ++i) {
      const double v = a.data()[i];
      if (v > lo && v < hi) d[i] += g[i];
    }
  });
  return out;
}

Tensor abs_elem(Tensor a) {
  Tensor out(a.rows(), a.cols());
  for (long i = 0; i < a.size(); ++i) out.data()[i] = std::fabs(a.data()[i]);
  finish("abs", out, a.requires_grad(), [a, out]() mutable {
    const double* g = out.grad();
    a.ensure_grad();
    double* d = a.grad();
    for (long i = 0; i < a.size(); ++i) {
      const double v = a.data()[i];
      d[i] += g[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
    }
  });
  return out;
}

Tensor softmax_rows(Tensor x) {
  Tensor out(x.rows(), x.cols());
  kern::softmax_rows(x.data(), out.data(), x.rows(), x.cols());
  finish("softmax_rows", out, x.requires_grad(), [x, out]() mutable {
    const double* g = out.grad();
    const double* y = out.data();
    const long m = x.rows(), n = x.cols();
    x.ensure_grad();
    double* d = x.grad();
    for (long i = 0; i < m; ++i) {
      const double* gr = g + i * n;
      const double* yr = y + i * n;
      double dot = 0.0;
      for (long j = 0; j < n; ++j) dot += gr[j] * yr[j];
      double* dr = d + i * n;
      for (long j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
  return out;
}

Tensor avgpool_rows(Tensor x) {
  const long n = x.rows(), dcols = x.cols();
  Tensor out(1, dcols);
  for (long j = 0; j < dcols; ++j) {
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += x.at(i, j);
    out.data()[j] = s / static_cast<double>(n);
  }
  finish("avgpool_rows", out, x.requires_grad(), [x, out]() mutable {
    const double* g = out.grad();
    const long n = x.rows(), dcols = x.cols();
    const double inv = 1.0 / static_cast<double>(n);
    x.ensure_grad();
    double* d = x.grad();
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < dcols; ++j) d[i * dcols + j] += g[j] * inv;
  });
  return out;
}

Tensor maxpool_rows(Tensor x) {
  const long n = x.rows(), dcols = x.cols();
  Tensor out(1, dcols);
  std::vector<long> arg(static_cast<size_t>(dcols), 0);
  for (long j = 0; j < dcols; ++j) {
    double best = x.at(0, j);
    long bi = 0;
    for (long i = 1; i < n; ++i)
      if (x.at(i, j) > best) {
        best = x.at(i, j);
        bi = i;
      }
    out.data()[j] = best;
    arg[j] = bi;
  }
  finish("maxpool_rows", out, x.requires_grad(), [x, out, arg]() mutable {
    const double* g = out.grad();
    const long dcols = x.cols();
    x.ensure_grad();
    double* d = x.grad();
    for (long j = 0; j < dcols; ++j) d[arg[j] * dcols + j] += g[j];
  });
  return out;
}

Tensor broadcast_rows(Tensor x, long n) {
  if (x.rows() != 1) throw ShapeError("broadcast_rows: expected [1xd], got " + shape_str(x));
  const long dcols = x.cols();
  Tensor out(n, dcols);
  for (long i = 0; i < n; ++i)
    std::memcpy(out.data() + i * dcols, x.data(), sizeof(double) * dcols);
  finish("broadcast_rows", out, x.requires_grad(), [x, out]() mutable {
    const double* g = out.grad();
    const long n = out.rows(), dcols = x.cols();
    x.ensure_grad();
    double* d = x.grad();
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < dcols; ++j) d[j] += g[i * dcols + j];
  });
  return out;
}

Tensor concat_cols(Tensor a, Tensor b) {
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts differ " + shape_str(a) + " vs " + shape_str(b));
  const long n = a.rows(), da = a.cols(), db = b.cols();
  Tensor out(n, da + db);
  for (long i = 0; i < n; ++i) {
    std::memcpy(out.data() + i * (da + db), a.data() + i * da, sizeof(double) * da);
    std::memcpy(out.data() + i * (da + db) + da, b.data() + i * db, sizeof(double) * db);
  }
  finish("concat_cols", out, a.requires_grad() || b.requires_grad(), [a, b, out]() mutable {
    const double* g = out.grad();
    const long n = a.rows(), da = a.cols(), db = b.cols();
    if (a.requires_grad()) {
      a.ensure_grad();
      double* d = a.grad();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < da; ++j) d[i * da + j] += g[i * (da + db) + j];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      double* d = b.grad();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < db; ++j) d[i * db + j] += g[i * (da + db) + da + j];
    }
  });
  return out;
}

Tensor take_rows(Tensor x, const std::vector<long>& idx) {
  if (idx.empty()) throw ShapeError("take_rows: empty index set");
  const long dcols = x.cols();
  Tensor out(static_cast<long>(idx.size()), dcols);
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= x.rows())
      throw ShapeError("take_rows: index " + std::to_string(idx[r]) +
                       " out of range for " + shape_str(x));
    std::memcpy(out.data() + r * dcols, x.data() + idx[r] * dcols, sizeof(double) * dcols);
  }
  finish("take_rows", out, x.requires_grad(), [x, out, idx]() mutable {
    const double* g = out.grad();
    const long dcols = x.cols();
    x.ensure_grad();
    double* d = x.grad();
    for (size_t r = 0; r < idx.size(); ++r)
      for (long j = 0; j < dcols; ++j) d[idx[r] * dcols + j] += g[r * dcols + j];
  });
  return out;
}

Tensor sum_all(Tensor x) {
  double s = 0.0;
  for (long i = 0; i < x.size(); ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s);
  finish("sum_all", out, x.requires_grad(), [x, out]() mutable {
    const double g = out.grad()[0];
    x.ensure_grad();
    double* d = x.grad();
    for (long i = 0; i < x.size(); ++i) d[i] += g;
  });
  return out;
}

Tensor mean_all(Tensor x) {
  double s = 0.0;
  for (long i = 0; i < x.size(); ++i) s += x.data()[i];
  Tensor out = Tensor::scalar(s / static_cast<double>(x.size()));
  finish("mean_all", out, x.requires_grad(), [x, out]() mutable {
    const double g = out.grad()[0] / static_cast<double>(x.size());
    x.ensure_grad();
    double* d = x.grad();
    for (long i = 0; i < x.size(); ++i) d[i] += g;
  });
  return out;
}

Tensor mse(Tensor a, Tensor b) {
  require_same_shape(a, b, "mse");
  const long count = a.size();
  double s = 0.0;
  for (long i = 0; i < count; ++i) {
    const double e = a.data()[i] - b.data()[i];
    s += e * e;
  }
  Tensor out = Tensor::scalar(s / static_cast<double>(count));
  finish("mse", out, a.requires_grad() || b.requires_grad(), [a, b, out]() mutable {
    const double g = out.grad()[0];
    const long count = a.size();
    const double c = 2.0 * g / static_cast<double>(count);
    if (a.requires_grad()) {
      a.ensure_grad();
      double* d = a.grad();
      for (long i = 0; i < count; ++i) d[i] += c * (a.data()[i] - b.data()[i]);
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      double* d = b.grad();
      for (long i = 0; i < count; ++i) d[i] -= c * (a.data()[i] - b.data()[i]);
    }
  });
  return out;
}

Tensor smooth_l1(Tensor a, Tensor b, double beta) {
  require_same_shape(a, b, "smooth_l1");
  if (beta <= 0.0) throw ConfigError("smooth_l1: beta must be positive, got " + std::to_string(beta));
  const long count = a.size();
  double s = 0.0;
  for (long i = 0; i < count; ++i) {
    const double e = a.data()[i] - b.data()[i];
    const double ae = std::fabs(e);
    s += ae < beta ? 0.5 * e * e / beta : ae - 0.5 * beta;
  }
  Tensor out = Tensor::scalar(s / static_cast<double>(count));
  finish("smooth_l1", out, a.requires_grad() || b.requires_grad(), [a, b, out, beta]() mutable {
    const double g = out.grad()[0];
    const long count = a.size();
    const double inv = g / static_cast<double>(count);
    for (long i = 0; i < count; ++i) {
      const double e = a.data()[i] - b.data()[i];
      const double de = std::fabs(e) < beta ? e / beta : (e > 0.0 ? 1.0 : -1.0);
      if (a.requires_grad()) {
        a.ensure_grad();
        a.grad()[i] += inv * de;
      }
      if (b.requires_grad()) {
        b.ensure_grad();
        b.grad()[i] -= inv * de;
      }
    }
  });
  return out;
}

Tensor row_entropy_from_logits(Tensor logits) {
  const long m = logits.rows(), n = logits.cols();
  // H_i = lse_i - <z>_p; mean over rows. Working from logits avoids log(0).
  std::vector<double> p(static_cast<size_t>(m * n));
  kern::softmax_rows(logits.data(), p.data(), m, n);
  double total = 0.0;
  std::vector<double> zbar(static_cast<size_t>(m));
  for (long i = 0; i < m; ++i) {
    const double* zr = logits.data() + i * n;
    const double* pr = p.data() + i * n;
    double mx = zr[0];
    for (long j = 1; j < n; ++j) mx = std::max(mx, zr[j]);
    double se = 0.0, zb = 0.0;
    for (long j = 0; j < n; ++j) {
      se += std::exp(zr[j] - mx);
      zb += pr[j] * zr[j];
    }
    zbar[i] = zb;
    total += (mx + std::log(se)) - zb;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(m));
  finish("row_entropy", out, logits.requires_grad(), [logits, out, p, zbar]() mutable {
    const double g = out.grad()[0] / static_cast<double>(logits.rows());
    const long m = logits.rows(), n = logits.cols();
    logits.ensure_grad();
    double* d = logits.grad();
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < n; ++j) {
        const double pij = p[i * n + j];
        d[i * n + j] += g * (-pij * (logits.data()[i * n + j] - zbar[i]));
      }
  });
  return out;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw UsageError("backward: loss must be scalar");
  Tape* tape = Tape::active();
  if (!tape) throw UsageError("backward: no active tape");
  Tensor l = loss;
  l.ensure_grad();
  l.grad()[0] = 1.0;
  const auto& steps = tape->steps();
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    Tensor out = it->out;
    if (!out.has_grad()) continue;  // never used by anything downstream
    it->backward();
  }
}

// ---- MLP --------------------------------------------------------------

Tensor linear(const Tensor& x, const LinearLayer& l) {
  return add_rowvec(matmul(x, l.W), l.b);
}

Tensor mlp_forward(const Tensor& x, const Mlp& mlp) {
  Tensor h = x;
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    h = linear(h, mlp.layers[i]);
    if (i + 1 < mlp.layers.size()) h = leaky_relu(h, mlp.slope);
  }
  return h;
}

void validate_mlp(const Mlp& mlp, long d_in, long d_out, const std::string& name) {
  if (mlp.layers.empty()) throw ConfigError("mlp '" + name + "': no layers");
  long cur = d_in;
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    const auto& l = mlp.layers[i];
    if (l.W.rows() != cur)
      throw ConfigError("mlp '" + name + "': layer " + std::to_string(i) +
                        " expects input width " + std::to_string(l.W.rows()) +
                        " but receives " + std::to_string(cur));
    if (l.b.rows() != 1 || l.b.cols() != l.W.cols())
      throw ConfigError("mlp '" + name + "': layer " + std::to_string(i) + " bias shape mismatch");
    cur = l.W.cols();
  }
  if (cur != d_out)
    throw ConfigError("mlp '" + name + "': output width " + std::to_string(cur) +
                      " does not match required " + std::to_string(d_out));
}

}  // namespace rgbpose::diff
