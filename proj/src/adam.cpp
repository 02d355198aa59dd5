#include "antcode/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace antcode {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " params but " +
                                std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty() && state.v.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor::zeros_like(*p));
      state.v.push_back(Tensor::zeros_like(*p));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state tracks a different parameter count");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(*grads[k], params[k]->shape(), "adam_step grad");
    require_shape(state.m[k], params[k]->shape(), "adam_step first moment");
    require_shape(state.v[k], params[k]->shape(), "adam_step second moment");
  }

  state.t += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k]->data();
    const double* g = grads[k]->data();
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    const std::size_t n = params[k]->size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace antcode
