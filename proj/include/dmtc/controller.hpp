#pragma once

#include <vector>

#include "dmtc/adam.hpp"
#include "dmtc/graph.hpp"
#include "dmtc/rng.hpp"
#include "dmtc/searchspace.hpp"

namespace dmtc {

// Task weight vector on the simplex plus the cost knob c.
struct Preference {
  std::vector<double> r;
  double c = 0.0;

  void validate() const;
  static Preference uniform(int tasks, double c = 0.0);
  static Preference one_hot(int tasks, int k, double c = 0.0);
};

constexpr int kEmbedDim = 32;
constexpr int kHiddenDim = 100;

// p = sum_i r_i e_i + c e_c over learnable embedding rows.
Tensor embed_preference(const Tensor& task_embed, const Tensor& cost_embed,
                        const Preference& pref);

// Preference-conditioned MLP predicting L x N x N branching logits.
// Trunk: two hidden layers of width 100; one linear head per layer.
struct EdgeHypernet {
  int tasks = 0, layers = 0;
  ParamStore params;
  // Param indices into the store (canonical order).
  int e_task = -1, e_cost = -1;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
  std::vector<int> head_w, head_b;

  // diag_bias seeds head biases toward identity routing so that the
  // untrained controller decodes to the fully branched anchor.
  static EdgeHypernet init(int tasks, int layers, Rng rng, double diag_bias = 1.0);

  BranchingLogits forward(const Preference& pref) const;
  // Per-layer NxN logit variables. When param_vars is non-null the store's
  // tensors become differentiable leaves, appended in store order.
  std::vector<Graph::Var> forward_graph(Graph& g, const Preference& pref,
                                        std::vector<Graph::Var>* param_vars) const;
};

// Preference-conditioned MLP predicting per-node normalization deltas.
// Trunk: three hidden layers of width 100; one linear head per node emitting
// (dgamma, dbeta); head weights start at exactly zero.
struct WeightHypernet {
  AnchorConfig anchor_cfg;
  ParamStore params;
  int e_task = -1, e_cost = -1;
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;
  // head index per (node layer, stream)
  std::vector<std::vector<int>> head_w, head_b;

  static WeightHypernet init(const AnchorConfig& cfg, Rng rng);

  NormDeltas forward(const Preference& pref) const;
  ModulationVars forward_graph(Graph& g, const Preference& pref,
                               std::vector<Graph::Var>* param_vars) const;
};

struct Predicted {
  TreeArchitecture tree;
  NormDeltas mods;
  ResourceReport resource;
};

// Deterministic inference path: maximum-likelihood tree from the edge
// hypernet plus normalization deltas from the weight hypernet.
Predicted predict(const EdgeHypernet& edge, const WeightHypernet& weight,
                  const AnchorNet& anchor, const Preference& pref);

}  // namespace dmtc
