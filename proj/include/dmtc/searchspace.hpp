#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmtc/graph.hpp"
#include "dmtc/rng.hpp"
#include "dmtc/tensor.hpp"

namespace dmtc {

// N-stream anchor network: node layers 0..L (L branching decisions sit
// between consecutive node layers), all streams share widths so any child
// can consume any parent's output. Heads are statically bound to their own
// stream's top node.
struct AnchorConfig {
  int tasks = 3;        // N
  int branch_layers = 4;  // L
  int input_dim = 16;
  int width = 32;
  int head_dim = 4;

  int node_layers() const { return branch_layers + 1; }
  int layer_in_dim(int l) const { return l == 0 ? input_dim : width; }
};

struct NormParams {
  Tensor gamma, beta;  // learned affine, 1xC
  Tensor mu, sigma;    // frozen running statistics, 1xC; sigma > 0
};

struct Block {
  Tensor W, b;  // affine in_dim x C, 1xC
  NormParams norm;
};

struct AnchorNet {
  AnchorConfig cfg;
  // blocks[l][i]: node (l,i), l in [0, L], i in [0, N)
  std::vector<std::vector<Block>> blocks;
  std::vector<Tensor> head_W, head_b;  // per task, width x head_dim

  static AnchorNet init(const AnchorConfig& cfg, Rng rng);
};

// L x N x N branching logits; (l, j, i) scores parent (l, i) for child (l+1, j).
struct BranchingLogits {
  int layers = 0, tasks = 0;
  std::vector<Tensor> rows;  // per layer an NxN matrix, row j = child j's scores

  BranchingLogits() = default;
  BranchingLogits(int L, int N) : layers(L), tasks(N), rows(L, Tensor(N, N)) {}
  double& at(int l, int j, int i) { return rows[l].at(j, i); }
  double at(int l, int j, int i) const { return rows[l].at(j, i); }
};

// Relaxed one-hot parent selections; same layout as BranchingLogits, each
// row nonnegative and summing to 1.
struct BranchSample {
  int layers = 0, tasks = 0;
  std::vector<Tensor> rows;

  BranchSample() = default;
  BranchSample(int L, int N) : layers(L), tasks(N), rows(L, Tensor(N, N)) {}
  static BranchSample identity(int L, int N);
  static BranchSample one_hot(const struct TreeArchitecture& tree);
  void validate() const;
};

struct TreeArchitecture {
  int layers = 0, tasks = 0;
  // parent[l][j] = parent stream of child (l+1, j)
  std::vector<std::vector<int>> parent;
  // active[l][i], l in [0, L]
  std::vector<std::vector<bool>> active;
  // (layer l, parent stream i, child stream j) with i != j
  std::vector<std::array<int, 3>> cross_task_edges;

  std::string signature() const;  // parent indices joined by dashes
};

struct ResourceReport {
  long long param_count = 0;
  long long flop_count = 0;
  double ratio_to_anchor = 1.0;
};

// Per-node normalization deltas, shape-matched to the anchor's channels.
struct NormDeltas {
  // [layer][stream] -> 1xC tensors
  std::vector<std::vector<Tensor>> dgamma, dbeta;

  static NormDeltas zeros(const AnchorConfig& cfg);
};

// argmax per child row, ties toward the lowest parent index; unreachable
// nodes are pruned from the active set.
TreeArchitecture decode_architecture(const BranchingLogits& alpha);
TreeArchitecture tree_from_parents(const std::vector<std::vector<int>>& parent, int tasks);

// Top-down usage-probability DP; returns (L+1) x N, row L all ones.
Tensor compute_p_use(const BranchSample& nu);

ResourceReport resource_usage(const AnchorNet& anchor, const TreeArchitecture& tree);

// Hard forward over the active node set only. evaluated_nodes, when given,
// receives the number of blocks actually applied.
std::vector<Tensor> forward_hard(const AnchorNet& anchor, const TreeArchitecture& tree,
                                 const Tensor& x, const NormDeltas* mods = nullptr,
                                 int* evaluated_nodes = nullptr);

// Soft forward: child input is the nu-weighted convex combination of all
// parent outputs. Plain-value convenience wrapper over the graph builder.
std::vector<Tensor> forward_soft(const AnchorNet& anchor, const BranchSample& nu,
                                 const Tensor& x, const NormDeltas* mods = nullptr);

// Graph-building variants used by the trainers. Anchor weights enter as
// constants; nuRows are per-layer NxN variables (row j = child j), and mods,
// when present, supplies per-node delta variables.
struct ModulationVars {
  std::vector<std::vector<Graph::Var>> dgamma, dbeta;
};

std::vector<Graph::Var> forward_soft_graph(Graph& g, const AnchorNet& anchor,
                                           const std::vector<Graph::Var>& nuRows,
                                           Graph::Var x, const ModulationVars* mods = nullptr);

// Single-stream forward on frozen statistics; captures per-layer post-
// activation node outputs when taps is non-null (used by the affinity probe).
Tensor forward_stream(const AnchorNet& anchor, int stream, const Tensor& x,
                      std::vector<Tensor>* taps = nullptr);

}  // namespace dmtc
