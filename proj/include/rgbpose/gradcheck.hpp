#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rgbpose/tensor.hpp"

namespace rgbpose::diff {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
  long checked = 0;
};

/// Central finite-difference check of reverse-mode gradients.
///
/// loss_fn must rebuild the scalar loss from the current parameter values on
/// every call (it is invoked once under a tape for the analytic gradients and
/// twice per parameter element for the finite differences). Error metric per
/// element: |fd - g| / max(1, |fd|, |g|).
GradCheckReport check_gradients(const std::string& name,
                                const std::function<Tensor()>& loss_fn,
                                const std::vector<Tensor>& params,
                                double step = 1e-5, double tol = 1e-4);

}  // namespace rgbpose::diff
