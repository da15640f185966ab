#include "ccassg/optim.hpp"

#include <cmath>
#include <string>

#include "ccassg/error.hpp"

namespace ccassg {

void adam_step(AdamState& state, std::span<DenseMatrix* const> params, std::span<const DenseMatrix* const> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->rows() != grads[p]->rows() || params[p]->cols() != grads[p]->cols())
      throw ShapeError("adam_step: gradient " + std::to_string(p) + " does not match its parameter");
    if (!grads[p]->all_finite()) throw NumericalError("adam_step: non-finite gradient for parameter " + std::to_string(p));
  }
  if (state.step == 0) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const DenseMatrix* w : params) {
      state.first_moment.emplace_back(w->rows(), w->cols());
      state.second_moment.emplace_back(w->rows(), w->cols());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter list changed between steps");
  }

  const auto& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(o.beta1, t);
  const double bias2 = 1.0 - std::pow(o.beta2, t);
  const double step_size = o.lr / bias1;
  const double sqrt_bias2 = std::sqrt(bias2);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p]->values();
    const auto g = grads[p]->values();
    auto m = state.first_moment[p].values();
    auto v = state.second_moment[p].values();
    if (m.size() != w.size()) throw ShapeError("adam_step: parameter " + std::to_string(p) + " changed shape");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + o.weight_decay * w[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      const double denom = std::sqrt(v[i]) / sqrt_bias2 + o.eps;
      w[i] -= step_size * m[i] / denom;
    }
  }
}

}  // namespace ccassg
