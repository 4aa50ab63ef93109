#pragma once

#include <functional>
#include <vector>

#include "owqf/tensor.hpp"

namespace owqf {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences with step `h`. The error per coordinate is
// |analytic - numeric| / max(1, |analytic|). Parameters are perturbed in
// place and restored. Throws NumericError on non-finite evaluations.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           std::vector<Tensor> params, double h = 1e-5);

}  // namespace owqf
