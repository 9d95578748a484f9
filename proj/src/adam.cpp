#include "dmtc/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc {

AdamState::AdamState(const ParamStore& params, AdamConfig c) : cfg(c) {
  m.reserve(params.count());
  v.reserve(params.count());
  for (const Tensor& t : params.values) {
    m.push_back(Tensor::zeros(t.rows, t.cols));
    v.push_back(Tensor::zeros(t.rows, t.cols));
  }
}

void adam_step(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads,
               double lr_override) {
  if (grads.size() != params.count())
    throw std::invalid_argument("adam_step: gradient count mismatch");
  for (size_t p = 0; p < grads.size(); ++p) {
    if (!grads[p].same_shape(params.values[p]))
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + params.names[p]);
    if (!all_finite(grads[p])) throw NumericError("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double lr = lr_override >= 0.0 ? lr_override : state.cfg.lr;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t p = 0; p < grads.size(); ++p) {
    Tensor& w = params.values[p];
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    const Tensor& g = grads[p];
    for (size_t i = 0; i < w.size(); ++i) {
      m.v[i] = b1 * m.v[i] + (1.0 - b1) * g.v[i];
      v.v[i] = b2 * v.v[i] + (1.0 - b2) * g.v[i] * g.v[i];
      double mhat = m.v[i] / c1;
      double vhat = v.v[i] / c2;
      w.v[i] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
    }
  }
}

}  // namespace dmtc
