#include "owqf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace owqf {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> params, double h) {
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  const Tensor loss = f();
  if (!std::isfinite(loss.item()))
    throw NumericError("grad_check: non-finite value");
  loss.backward();

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = eval_scalar(f);
      values[i] = saved - h;
      const double down = eval_scalar(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(analytic[i]))
        throw NumericError("grad_check: non-finite gradient");
      const double err =
          std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      if (err > result.max_relative_error)
        result = {err, pi, i, analytic[i], numeric};
    }
  }
  return result;
}

}  // namespace owqf
