#include "rgbpose/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rgbpose::diff {

GradCheckReport check_gradients(const std::string& name,
                                const std::function<Tensor()>& loss_fn,
                                const std::vector<Tensor>& params,
                                double step, double tol) {
  GradCheckReport report;
  report.name = name;

  std::vector<std::vector<double>> analytic;
  {
    TapeScope scope;
    Tensor loss = loss_fn();
    backward(loss);
    for (const auto& p : params) analytic.push_back(p.grad_copy());
  }

  double worst = 0.0;
  long checked = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    double* x = p.data();
    for (long i = 0; i < p.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + step;
      const double fp = loss_fn().value();
      x[i] = saved - step;
      const double fm = loss_fn().value();
      x[i] = saved;
      const double fd = (fp - fm) / (2.0 * step);
      const double g = analytic[pi][i];
      const double rel = std::fabs(fd - g) / std::max({1.0, std::fabs(fd), std::fabs(g)});
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  report.max_rel_err = worst;
  report.pass = worst <= tol;
  report.checked = checked;
  return report;
}

}  // namespace rgbpose::diff
