#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rgbpose/errors.hpp"

namespace rgbpose::diff {

/// Dense row-major 2-D tensor of 64-bit floats with an optional gradient
/// buffer. Copies share storage; ops always allocate fresh outputs, so the
/// values themselves are never mutated once produced (the optimizer updates
/// parameter tensors in place between steps, outside any tape).
class Tensor {
 public:
  Tensor() = default;
  Tensor(long rows, long cols, bool requires_grad = false);

  static Tensor zeros(long rows, long cols, bool requires_grad = false);
  static Tensor from(std::vector<double> data, long rows, long cols,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }
  long rows() const { return impl_ ? impl_->rows : 0; }
  long cols() const { return impl_ ? impl_->cols : 0; }
  long size() const { return rows() * cols(); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  double& at(long r, long c) { return impl_->data[r * impl_->cols + c]; }
  double at(long r, long c) const { return impl_->data[r * impl_->cols + c]; }

  /// Value of a [1x1] tensor.
  double value() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  /// Allocates a zero gradient buffer if absent.
  void ensure_grad();
  double* grad() { return impl_->grad.data(); }
  const double* grad() const { return impl_->grad.data(); }
  void zero_grad();
  void drop_grad();
  std::vector<double> grad_copy() const;

  /// Stable identity of the underlying storage node.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    long rows = 0, cols = 0;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until needed
  };
  std::shared_ptr<Impl> impl_;
};

/// Record of one training step's forward ops, replayed in reverse by
/// backward(). Single-threaded by contract; inference installs no tape.
class Tape {
 public:
  struct Step {
    const char* op;
    Tensor out;
    std::function<void()> backward;
  };

  void record(const char* op, const Tensor& out, std::function<void()> fn) {
    steps_.push_back(Step{op, out, std::move(fn)});
  }
  const std::vector<Step>& steps() const { return steps_; }
  std::size_t size() const { return steps_.size(); }

  /// The thread's active tape, or nullptr when not recording.
  static Tape* active();

 private:
  std::vector<Step> steps_;
  friend class TapeScope;
};

/// RAII: installs a fresh tape as the calling thread's active tape.
class TapeScope {
 public:
  TapeScope();
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* prev_;
};

/// When enabled, every forward op scans its output for NaN/Inf and throws.
void set_debug_checks(bool on);
bool debug_checks();

// ---- ops -------------------------------------------------------------

Tensor matmul(Tensor a, Tensor b);
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
/// x [n x d] + row vector b [1 x d], broadcast over rows.
Tensor add_rowvec(Tensor x, Tensor b);
Tensor scale(Tensor a, double c);
Tensor add_scalar(Tensor a, double c);
Tensor leaky_relu(Tensor a, double slope);
Tensor clamp(Tensor a, double lo, double hi);
Tensor abs_elem(Tensor a);
Tensor softmax_rows(Tensor x);
Tensor avgpool_rows(Tensor x);   // [1 x d]
Tensor maxpool_rows(Tensor x);   // [1 x d], grad routed to first argmax
Tensor broadcast_rows(Tensor x, long n);
Tensor concat_cols(Tensor a, Tensor b);
Tensor take_rows(Tensor x, const std::vector<long>& idx);
Tensor sum_all(Tensor x);
Tensor mean_all(Tensor x);
Tensor mse(Tensor a, Tensor b);
Tensor smooth_l1(Tensor a, Tensor b, double beta);
/// Mean over rows of the softmax-distribution entropy, computed from logits.
Tensor row_entropy_from_logits(Tensor logits);

/// Seeds the scalar loss with gradient 1 and replays the active tape in
/// reverse, accumulating into every requires_grad tensor reachable from it.
void backward(const Tensor& loss);

// ---- MLP --------------------------------------------------------------

struct LinearLayer {
  Tensor W;  // [d_in x d_out]
  Tensor b;  // [1 x d_out]
};

/// Affine chain with a leaky-rectifier between layers; last layer linear.
struct Mlp {
  std::vector<LinearLayer> layers;
  double slope = 0.01;
};

Tensor linear(const Tensor& x, const LinearLayer& l);
Tensor mlp_forward(const Tensor& x, const Mlp& mlp);
/// Throws ConfigError if successive layer shapes do not chain.
void validate_mlp(const Mlp& mlp, long d_in, long d_out, const std::string& name);

}  // namespace rgbpose::diff
