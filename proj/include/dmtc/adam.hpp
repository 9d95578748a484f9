#pragma once

#include <string>
#include <vector>

#include "dmtc/tensor.hpp"

namespace dmtc {

// Named collection of trainable tensors, shared between graph construction
// and the optimizer.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  int add(std::string name, Tensor t) {
    names.push_back(std::move(name));
    values.push_back(std::move(t));
    return static_cast<int>(values.size()) - 1;
  }
  size_t count() const { return values.size(); }
  size_t scalar_count() const {
    size_t n = 0;
    for (const Tensor& t : values) n += t.size();
    return n;
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long step = 0;
  AdamConfig cfg;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  explicit AdamState(const ParamStore& params, AdamConfig c = {});
};

// One bias-corrected Adam update. lr_override < 0 means use state.cfg.lr.
void adam_step(AdamState& state, ParamStore& params, const std::vector<Tensor>& grads,
               double lr_override = -1.0);

}  // namespace dmtc
