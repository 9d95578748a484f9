#pragma once

#include <vector>

#include "dmtc/controller.hpp"
#include "dmtc/graph.hpp"
#include "dmtc/rng.hpp"
#include "dmtc/searchspace.hpp"

namespace dmtc {

// Preference-threshold split: task i is active iff r_i >= tau.
struct TaskDichotomy {
  std::vector<int> active;
  std::vector<int> inactive;
  double tau = 0.0;
};

TaskDichotomy dichotomize(const Preference& pref, double tau);

struct LossWeights {
  std::vector<double> w;  // per-task positive scale factors
  double lambda_active = 1.0;
  double lambda_inactive = 0.1;
};

// Scalarized task loss sum_i r_i w_i L_i.
double task_loss(const Preference& pref, const std::vector<double>& w,
                 const std::vector<double>& losses);

// Relaxed categorical samples from logits at temperature zeta.
BranchSample gumbel_softmax(const BranchingLogits& alpha, double zeta, Rng& rng);
// Graph variant with externally drawn noise (one tensor per layer), so the
// sample stays differentiable in alpha for fixed noise.
std::vector<Graph::Var> gumbel_softmax_graph(Graph& g, const std::vector<Graph::Var>& alpha,
                                             const std::vector<Tensor>& noise, double zeta);
std::vector<Tensor> draw_gumbel_noise(Rng& rng, int layers, int tasks);

// Usage-probability DP on the tape; returns per node layer (0..L) a 1xN var.
std::vector<Graph::Var> compute_p_use_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                                            int tasks);

// Pairwise sharing pressure between likely-used nodes of active tasks,
// ordered pairs, layer weight (L-l)/L. p_use is the (L+1) x N DP output.
double active_loss(const BranchSample& nu, const TaskDichotomy& dich, const Tensor& affinity,
                   const Tensor& p_use);
Graph::Var active_loss_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                             const TaskDichotomy& dich, const Tensor& affinity,
                             const std::vector<Graph::Var>& p_use, int tasks);

// Each inactive task mimics its nearest active branching row.
double inactive_loss(const BranchSample& nu, const TaskDichotomy& dich);
Graph::Var inactive_loss_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                               const TaskDichotomy& dich, int tasks);

// Omega = c * lambda_A * L_active + lambda_I * L_inactive.
double regularizer(const Preference& pref, const TaskDichotomy& dich, const BranchSample& nu,
                   const Tensor& affinity, const LossWeights& weights);

// RSA task affinity over probe activations of the frozen anchor. Retains
// the per-layer similarity/dissimilarity intermediates for audit.
struct TaskAffinity {
  Tensor A;                       // N x N in [0,1], unit diagonal
  int sample_count = 0;           // K
  std::vector<Tensor> S;          // per layer: N x (K*K) flattened similarity
  std::vector<Tensor> D;          // per layer: N x N Frobenius distances
  std::vector<Tensor> D_hat;      // per layer: row min-max normalized
};

TaskAffinity rsa_affinity(const AnchorNet& anchor, const Tensor& probes);

// Mean squared error helpers shared by training and evaluation.
double mse(const Tensor& pred, const Tensor& target);
Graph::Var mse_graph(Graph& g, Graph::Var pred, const Tensor& target);

}  // namespace dmtc
