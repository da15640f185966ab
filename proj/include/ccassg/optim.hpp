#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ccassg/linalg.hpp"

namespace ccassg {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // coupled: added to the gradient as wd * w
};

/// Moment accumulators mirror the parameter list given on the first step.
struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::vector<DenseMatrix> first_moment;
  std::vector<DenseMatrix> second_moment;

  explicit AdamState(AdamOptions opts = {}) : options(opts) {}
};

/// One bias-corrected Adam update, in place. Throws ShapeError when the
/// parameter list changes shape between steps and NumericalError naming the
/// parameter index when a gradient is not finite.
void adam_step(AdamState& state, std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads);

}  // namespace ccassg
