#include "dmtc/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc {

void Preference::validate() const {
  if (r.empty()) throw std::invalid_argument("preference: empty task vector");
  double sum = 0.0;
  for (double x : r) {
    if (x < 0.0) throw std::invalid_argument("preference: negative task weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("preference: task weights must sum to 1");
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("preference: c outside [0,1]");
}

Preference Preference::uniform(int tasks, double c) {
  Preference p;
  p.r.assign(tasks, 1.0 / tasks);
  p.c = c;
  return p;
}

Preference Preference::one_hot(int tasks, int k, double c) {
  Preference p;
  p.r.assign(tasks, 0.0);
  p.r[k] = 1.0;
  p.c = c;
  return p;
}

Tensor embed_preference(const Tensor& task_embed, const Tensor& cost_embed,
                        const Preference& pref) {
  pref.validate();
  if (task_embed.rows != static_cast<int>(pref.r.size()))
    throw std::invalid_argument("embed: task embedding row count mismatch");
  Tensor p(1, task_embed.cols);
  for (int i = 0; i < task_embed.rows; ++i)
    for (int c = 0; c < task_embed.cols; ++c) p.at(0, c) += pref.r[i] * task_embed.at(i, c);
  for (int c = 0; c < task_embed.cols; ++c) p.at(0, c) += pref.c * cost_embed.at(0, c);
  return p;
}

namespace {

Tensor random_matrix(int r, int c, Rng& rng, double scale) {
  Tensor t(r, c);
  for (double& e : t.v) e = scale * rng.gaussian();
  return t;
}

// Registers every tensor of a store into the graph, as params (leaves with
// gradients) or constants.
std::vector<Graph::Var> register_store(Graph& g, const ParamStore& store, bool trainable) {
  std::vector<Graph::Var> vars;
  vars.reserve(store.count());
  for (const Tensor& t : store.values) vars.push_back(trainable ? g.param(t) : g.constant(t));
  return vars;
}

Graph::Var embed_graph(Graph& g, const std::vector<Graph::Var>& vars, int e_task, int e_cost,
                       const Preference& pref) {
  Tensor r_row = Tensor::row(pref.r);
  Graph::Var p = g.matmul(g.constant(r_row), vars[e_task]);
  return g.add(p, g.scale(vars[e_cost], pref.c));
}

Graph::Var linear_relu(Graph& g, Graph::Var x, Graph::Var w, Graph::Var b) {
  return g.relu(g.add_row(g.matmul(x, w), b));
}

}  // namespace

EdgeHypernet EdgeHypernet::init(int tasks, int layers, Rng rng, double diag_bias) {
  EdgeHypernet h;
  h.tasks = tasks;
  h.layers = layers;
  double s1 = std::sqrt(2.0 / kEmbedDim);
  double s2 = std::sqrt(2.0 / kHiddenDim);
  h.e_task = h.params.add("e_task", random_matrix(tasks, kEmbedDim, rng, 1.0 / std::sqrt(kEmbedDim)));
  h.e_cost = h.params.add("e_cost", random_matrix(1, kEmbedDim, rng, 1.0 / std::sqrt(kEmbedDim)));
  h.w1 = h.params.add("w1", random_matrix(kEmbedDim, kHiddenDim, rng, s1));
  h.b1 = h.params.add("b1", Tensor(1, kHiddenDim));
  h.w2 = h.params.add("w2", random_matrix(kHiddenDim, kHiddenDim, rng, s2));
  h.b2 = h.params.add("b2", Tensor(1, kHiddenDim));
  for (int l = 0; l < layers; ++l) {
    h.head_w.push_back(h.params.add("head_w" + std::to_string(l),
                                    random_matrix(kHiddenDim, tasks * tasks, rng, 0.01)));
    Tensor b(1, tasks * tasks);
    for (int j = 0; j < tasks; ++j) b.at(0, j * tasks + j) = diag_bias;
    h.head_b.push_back(h.params.add("head_b" + std::to_string(l), std::move(b)));
  }
  return h;
}

std::vector<Graph::Var> EdgeHypernet::forward_graph(Graph& g, const Preference& pref,
                                                    std::vector<Graph::Var>* param_vars) const {
  pref.validate();
  if (static_cast<int>(pref.r.size()) != tasks)
    throw std::invalid_argument("edge_forward: preference size mismatch");
  std::vector<Graph::Var> vars = register_store(g, params, param_vars != nullptr);
  if (param_vars) *param_vars = vars;
  Graph::Var p = embed_graph(g, vars, e_task, e_cost, pref);
  Graph::Var hdn = linear_relu(g, p, vars[w1], vars[b1]);
  hdn = linear_relu(g, hdn, vars[w2], vars[b2]);
  std::vector<Graph::Var> alpha;
  alpha.reserve(layers);
  for (int l = 0; l < layers; ++l) {
    Graph::Var flat = g.add_row(g.matmul(hdn, vars[head_w[l]]), vars[head_b[l]]);
    alpha.push_back(g.reshape(flat, tasks, tasks));
  }
  return alpha;
}

BranchingLogits EdgeHypernet::forward(const Preference& pref) const {
  Graph g;
  std::vector<Graph::Var> alpha = forward_graph(g, pref, nullptr);
  BranchingLogits out(layers, tasks);
  for (int l = 0; l < layers; ++l) out.rows[l] = g.value(alpha[l]);
  return out;
}

WeightHypernet WeightHypernet::init(const AnchorConfig& cfg, Rng rng) {
  WeightHypernet h;
  h.anchor_cfg = cfg;
  double s1 = std::sqrt(2.0 / kEmbedDim);
  double s2 = std::sqrt(2.0 / kHiddenDim);
  h.e_task = h.params.add("e_task",
                          random_matrix(cfg.tasks, kEmbedDim, rng, 1.0 / std::sqrt(kEmbedDim)));
  h.e_cost = h.params.add("e_cost", random_matrix(1, kEmbedDim, rng, 1.0 / std::sqrt(kEmbedDim)));
  h.w1 = h.params.add("w1", random_matrix(kEmbedDim, kHiddenDim, rng, s1));
  h.b1 = h.params.add("b1", Tensor(1, kHiddenDim));
  h.w2 = h.params.add("w2", random_matrix(kHiddenDim, kHiddenDim, rng, s2));
  h.b2 = h.params.add("b2", Tensor(1, kHiddenDim));
  h.w3 = h.params.add("w3", random_matrix(kHiddenDim, kHiddenDim, rng, s2));
  h.b3 = h.params.add("b3", Tensor(1, kHiddenDim));
  h.head_w.resize(cfg.node_layers());
  h.head_b.resize(cfg.node_layers());
  for (int l = 0; l < cfg.node_layers(); ++l)
    for (int i = 0; i < cfg.tasks; ++i) {
      std::string tag = std::to_string(l) + "_" + std::to_string(i);
      // Zero-initialized heads: stage-2 training starts from the
      // unmodulated anchor.
      h.head_w[l].push_back(h.params.add("head_w" + tag, Tensor(kHiddenDim, 2 * cfg.width)));
      h.head_b[l].push_back(h.params.add("head_b" + tag, Tensor(1, 2 * cfg.width)));
    }
  return h;
}

ModulationVars WeightHypernet::forward_graph(Graph& g, const Preference& pref,
                                             std::vector<Graph::Var>* param_vars) const {
  pref.validate();
  std::vector<Graph::Var> vars = register_store(g, params, param_vars != nullptr);
  if (param_vars) *param_vars = vars;
  Graph::Var p = embed_graph(g, vars, e_task, e_cost, pref);
  Graph::Var hdn = linear_relu(g, p, vars[w1], vars[b1]);
  hdn = linear_relu(g, hdn, vars[w2], vars[b2]);
  hdn = linear_relu(g, hdn, vars[w3], vars[b3]);
  const int C = anchor_cfg.width;
  ModulationVars mv;
  mv.dgamma.resize(anchor_cfg.node_layers());
  mv.dbeta.resize(anchor_cfg.node_layers());
  for (int l = 0; l < anchor_cfg.node_layers(); ++l)
    for (int i = 0; i < anchor_cfg.tasks; ++i) {
      Graph::Var flat = g.add_row(g.matmul(hdn, vars[head_w[l][i]]), vars[head_b[l][i]]);
      mv.dgamma[l].push_back(g.slice(flat, 0, 1, 0, C));
      mv.dbeta[l].push_back(g.slice(flat, 0, 1, C, C));
    }
  return mv;
}

NormDeltas WeightHypernet::forward(const Preference& pref) const {
  Graph g;
  ModulationVars mv = forward_graph(g, pref, nullptr);
  NormDeltas d = NormDeltas::zeros(anchor_cfg);
  for (int l = 0; l < anchor_cfg.node_layers(); ++l)
    for (int i = 0; i < anchor_cfg.tasks; ++i) {
      d.dgamma[l][i] = g.value(mv.dgamma[l][i]);
      d.dbeta[l][i] = g.value(mv.dbeta[l][i]);
    }
  return d;
}

Predicted predict(const EdgeHypernet& edge, const WeightHypernet& weight,
                  const AnchorNet& anchor, const Preference& pref) {
  Predicted out;
  out.tree = decode_architecture(edge.forward(pref));
  out.mods = weight.forward(pref);
  out.resource = resource_usage(anchor, out.tree);
  return out;
}

}  // namespace dmtc
