#include "dmtc/searchspace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace dmtc {

namespace {

// Plain block application. Mirrors the graph builder op-for-op so that hard
// and soft forwards agree bit-for-bit at one-hot routing.
Tensor matmul_plain(const Tensor& A, const Tensor& B) {
  Tensor out(A.rows, B.cols);
  for (int r = 0; r < A.rows; ++r)
    for (int k = 0; k < A.cols; ++k) {
      double arc = A.at(r, k);
      if (arc == 0.0) continue;
      for (int c = 0; c < B.cols; ++c) out.at(r, c) += arc * B.at(k, c);
    }
  return out;
}

Tensor apply_block_plain(const Block& blk, const Tensor& x, const Tensor* dgamma,
                         const Tensor* dbeta) {
  Tensor z = matmul_plain(x, blk.W);
  for (int r = 0; r < z.rows; ++r)
    for (int c = 0; c < z.cols; ++c) z.at(r, c) += blk.b.at(0, c);
  for (int r = 0; r < z.rows; ++r)
    for (int c = 0; c < z.cols; ++c) {
      double xhat = (z.at(r, c) + (-blk.norm.mu.at(0, c))) * (1.0 / blk.norm.sigma.at(0, c));
      double gamma = dgamma ? blk.norm.gamma.at(0, c) + dgamma->at(0, c) : blk.norm.gamma.at(0, c);
      double beta = dbeta ? blk.norm.beta.at(0, c) + dbeta->at(0, c) : blk.norm.beta.at(0, c);
      double y = xhat * gamma + beta;
      z.at(r, c) = y > 0.0 ? y : 0.0;
    }
  return z;
}

Tensor apply_head_plain(const AnchorNet& a, int task, const Tensor& y) {
  Tensor out = matmul_plain(y, a.head_W[task]);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += a.head_b[task].at(0, c);
  return out;
}

Graph::Var apply_block_graph(Graph& g, const Block& blk, Graph::Var x,
                             std::optional<Graph::Var> dgamma, std::optional<Graph::Var> dbeta) {
  Tensor neg_mu = blk.norm.mu;
  for (double& e : neg_mu.v) e = -e;
  Tensor inv_sigma = blk.norm.sigma;
  for (double& e : inv_sigma.v) e = 1.0 / e;

  Graph::Var z = g.add_row(g.matmul(x, g.constant(blk.W)), g.constant(blk.b));
  Graph::Var xhat = g.mul_row(g.add_row(z, g.constant(neg_mu)), g.constant(inv_sigma));
  Graph::Var gamma = g.constant(blk.norm.gamma);
  Graph::Var beta = g.constant(blk.norm.beta);
  if (dgamma) gamma = g.add(gamma, *dgamma);
  if (dbeta) beta = g.add(beta, *dbeta);
  return g.relu(g.add_row(g.mul_row(xhat, gamma), beta));
}

}  // namespace

AnchorNet AnchorNet::init(const AnchorConfig& cfg, Rng rng) {
  AnchorNet a;
  a.cfg = cfg;
  a.blocks.resize(cfg.node_layers());
  // Every stream starts from identical weights (one substream per layer),
  // so permuting the task order permutes the trained streams exactly.
  for (int l = 0; l < cfg.node_layers(); ++l) {
    a.blocks[l].resize(cfg.tasks);
    for (int i = 0; i < cfg.tasks; ++i) {
      Block& blk = a.blocks[l][i];
      int in = cfg.layer_in_dim(l);
      Rng layer_rng = rng.split("layer").split(static_cast<uint64_t>(l));
      blk.W = Tensor(in, cfg.width);
      double s = std::sqrt(2.0 / in);
      for (double& e : blk.W.v) e = s * layer_rng.gaussian();
      blk.b = Tensor(1, cfg.width);
      blk.norm.gamma = Tensor(1, cfg.width);
      for (double& e : blk.norm.gamma.v) e = 1.0;
      blk.norm.beta = Tensor(1, cfg.width);
      blk.norm.mu = Tensor(1, cfg.width);
      blk.norm.sigma = Tensor(1, cfg.width);
      for (double& e : blk.norm.sigma.v) e = 1.0;
    }
  }
  a.head_W.resize(cfg.tasks);
  a.head_b.resize(cfg.tasks);
  for (int i = 0; i < cfg.tasks; ++i) {
    Rng head_rng = rng.split("head");
    a.head_W[i] = Tensor(cfg.width, cfg.head_dim);
    double s = std::sqrt(1.0 / cfg.width);
    for (double& e : a.head_W[i].v) e = s * head_rng.gaussian();
    a.head_b[i] = Tensor(1, cfg.head_dim);
  }
  return a;
}

BranchSample BranchSample::identity(int L, int N) {
  BranchSample s(L, N);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < N; ++j) s.rows[l].at(j, j) = 1.0;
  return s;
}

BranchSample BranchSample::one_hot(const TreeArchitecture& tree) {
  BranchSample s(tree.layers, tree.tasks);
  for (int l = 0; l < tree.layers; ++l)
    for (int j = 0; j < tree.tasks; ++j) s.rows[l].at(j, tree.parent[l][j]) = 1.0;
  return s;
}

void BranchSample::validate() const {
  for (const Tensor& m : rows)
    for (int j = 0; j < m.rows; ++j) {
      double sum = 0.0;
      for (int i = 0; i < m.cols; ++i) {
        if (m.at(j, i) < 0.0) throw std::invalid_argument("BranchSample: negative entry");
        sum += m.at(j, i);
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("BranchSample: row does not sum to 1");
    }
}

std::string TreeArchitecture::signature() const {
  std::string s;
  for (int l = 0; l < layers; ++l)
    for (int j = 0; j < tasks; ++j) {
      if (!s.empty()) s += '-';
      s += std::to_string(parent[l][j]);
    }
  return s;
}

TreeArchitecture tree_from_parents(const std::vector<std::vector<int>>& parent, int tasks) {
  TreeArchitecture t;
  t.layers = static_cast<int>(parent.size());
  t.tasks = tasks;
  t.parent = parent;
  t.active.assign(t.layers + 1, std::vector<bool>(tasks, false));
  for (int i = 0; i < tasks; ++i) t.active[t.layers][i] = true;  // heads
  for (int l = t.layers - 1; l >= 0; --l)
    for (int j = 0; j < tasks; ++j)
      if (t.active[l + 1][j]) {
        int p = parent[l][j];
        if (p < 0 || p >= tasks) throw std::invalid_argument("tree: parent index out of range");
        t.active[l][p] = true;
      }
  for (int l = 0; l < t.layers; ++l)
    for (int j = 0; j < tasks; ++j)
      if (t.active[l + 1][j] && parent[l][j] != j)
        t.cross_task_edges.push_back({l, parent[l][j], j});
  return t;
}

TreeArchitecture decode_architecture(const BranchingLogits& alpha) {
  std::vector<std::vector<int>> parent(alpha.layers, std::vector<int>(alpha.tasks, 0));
  for (int l = 0; l < alpha.layers; ++l)
    for (int j = 0; j < alpha.tasks; ++j) {
      int best = 0;
      for (int i = 1; i < alpha.tasks; ++i)
        if (alpha.at(l, j, i) > alpha.at(l, j, best)) best = i;  // ties keep lowest index
      parent[l][j] = best;
    }
  return tree_from_parents(parent, alpha.tasks);
}

Tensor compute_p_use(const BranchSample& nu) {
  nu.validate();
  const int L = nu.layers, N = nu.tasks;
  if (N > 16) throw std::invalid_argument("compute_p_use: exact DP limited to 16 tasks");
  Tensor p(L + 1, N);
  for (int i = 0; i < N; ++i) p.at(L, i) = 1.0;

  // Exact top-down DP on the distribution of the used-node subset per layer.
  // q[S] = probability the used set at the current node layer is exactly S.
  // Each used child picks a parent independently; the next layer's used set
  // is the union of the picks, extracted by inclusion-exclusion over the
  // per-child partial row sums.
  const int full = (1 << N) - 1;
  std::vector<double> q(full + 1, 0.0);
  q[full] = 1.0;
  for (int l = L - 1; l >= 0; --l) {
    const Tensor& rows = nu.rows[l];
    std::vector<std::vector<double>> ps(N, std::vector<double>(full + 1, 0.0));
    for (int k = 0; k < N; ++k)
      for (int R = 1; R <= full; ++R) {
        int low = R & -R;
        ps[k][R] = ps[k][R ^ low] + rows.at(k, std::countr_zero(static_cast<unsigned>(low)));
      }
    std::vector<double> qn(full + 1, 0.0);
    for (int S = 1; S <= full; ++S) {
      if (q[S] == 0.0) continue;
      for (int T = 1; T <= full; ++T) {
        double exact = 0.0;
        for (int R = T; R > 0; R = (R - 1) & T) {
          double prod = 1.0;
          for (int k = 0; k < N; ++k)
            if (S >> k & 1) prod *= ps[k][R];
          exact += (std::popcount(static_cast<unsigned>(T ^ R)) % 2 ? -1.0 : 1.0) * prod;
        }
        qn[T] += q[S] * exact;
      }
    }
    q = std::move(qn);
    for (int i = 0; i < N; ++i) {
      double m = 0.0;
      for (int T = 1; T <= full; ++T)
        if (T >> i & 1) m += q[T];
      p.at(l, i) = std::clamp(m, 0.0, 1.0);
    }
  }
  return p;
}

ResourceReport resource_usage(const AnchorNet& anchor, const TreeArchitecture& tree) {
  const AnchorConfig& cfg = anchor.cfg;
  if (tree.layers != cfg.branch_layers || tree.tasks != cfg.tasks)
    throw std::invalid_argument("resource_usage: tree does not match anchor");
  auto block_params = [&](int l) -> long long {
    long long in = cfg.layer_in_dim(l);
    return in * cfg.width + cfg.width + 2LL * cfg.width;  // W, b, gamma, beta
  };
  auto block_flops = [&](int l) -> long long {
    long long in = cfg.layer_in_dim(l);
    return 2LL * in * cfg.width + 5LL * cfg.width;  // affine + norm + relu
  };
  long long head_params = static_cast<long long>(cfg.width) * cfg.head_dim + cfg.head_dim;
  long long head_flops = 2LL * cfg.width * cfg.head_dim;

  long long p = 0, f = 0, p_full = 0, f_full = 0;
  for (int l = 0; l < cfg.node_layers(); ++l)
    for (int i = 0; i < cfg.tasks; ++i) {
      p_full += block_params(l);
      f_full += block_flops(l);
      if (tree.active[l][i]) {
        p += block_params(l);
        f += block_flops(l);
      }
    }
  p += head_params * cfg.tasks;
  f += head_flops * cfg.tasks;
  p_full += head_params * cfg.tasks;
  f_full += head_flops * cfg.tasks;

  ResourceReport r;
  r.param_count = p;
  r.flop_count = f;
  r.ratio_to_anchor = static_cast<double>(p) / static_cast<double>(p_full);
  return r;
}

NormDeltas NormDeltas::zeros(const AnchorConfig& cfg) {
  NormDeltas d;
  d.dgamma.assign(cfg.node_layers(), std::vector<Tensor>(cfg.tasks, Tensor(1, cfg.width)));
  d.dbeta = d.dgamma;
  return d;
}

std::vector<Tensor> forward_hard(const AnchorNet& anchor, const TreeArchitecture& tree,
                                 const Tensor& x, const NormDeltas* mods,
                                 int* evaluated_nodes) {
  const AnchorConfig& cfg = anchor.cfg;
  if (x.cols != cfg.input_dim) throw std::invalid_argument("forward_hard: input width mismatch");
  int evaluated = 0;
  std::vector<std::vector<Tensor>> y(cfg.node_layers(), std::vector<Tensor>(cfg.tasks));
  for (int l = 0; l < cfg.node_layers(); ++l)
    for (int i = 0; i < cfg.tasks; ++i) {
      if (!tree.active[l][i]) continue;
      const Tensor& in = l == 0 ? x : y[l - 1][tree.parent[l - 1][i]];
      const Tensor* dg = mods ? &mods->dgamma[l][i] : nullptr;
      const Tensor* db = mods ? &mods->dbeta[l][i] : nullptr;
      y[l][i] = apply_block_plain(anchor.blocks[l][i], in, dg, db);
      ++evaluated;
    }
  if (evaluated_nodes) *evaluated_nodes = evaluated;
  std::vector<Tensor> out(cfg.tasks);
  for (int i = 0; i < cfg.tasks; ++i) out[i] = apply_head_plain(anchor, i, y[cfg.branch_layers][i]);
  return out;
}

std::vector<Graph::Var> forward_soft_graph(Graph& g, const AnchorNet& anchor,
                                           const std::vector<Graph::Var>& nuRows,
                                           Graph::Var x, const ModulationVars* mods) {
  const AnchorConfig& cfg = anchor.cfg;
  if (static_cast<int>(nuRows.size()) != cfg.branch_layers)
    throw std::invalid_argument("forward_soft: nu layer count mismatch");
  auto delta = [&](int l, int i) {
    std::pair<std::optional<Graph::Var>, std::optional<Graph::Var>> d;
    if (mods) {
      d.first = mods->dgamma[l][i];
      d.second = mods->dbeta[l][i];
    }
    return d;
  };
  std::vector<Graph::Var> y(cfg.tasks);
  for (int i = 0; i < cfg.tasks; ++i) {
    auto [dg, db] = delta(0, i);
    y[i] = apply_block_graph(g, anchor.blocks[0][i], x, dg, db);
  }
  for (int l = 1; l < cfg.node_layers(); ++l) {
    std::vector<Graph::Var> next(cfg.tasks);
    for (int j = 0; j < cfg.tasks; ++j) {
      Graph::Var coeffs = g.slice(nuRows[l - 1], j, 1, 0, cfg.tasks);
      Graph::Var in = g.combine(coeffs, y);
      auto [dg, db] = delta(l, j);
      next[j] = apply_block_graph(g, anchor.blocks[l][j], in, dg, db);
    }
    y = std::move(next);
  }
  std::vector<Graph::Var> out(cfg.tasks);
  for (int i = 0; i < cfg.tasks; ++i)
    out[i] = g.add_row(g.matmul(y[i], g.constant(anchor.head_W[i])),
                       g.constant(anchor.head_b[i]));
  return out;
}

std::vector<Tensor> forward_soft(const AnchorNet& anchor, const BranchSample& nu,
                                 const Tensor& x, const NormDeltas* mods) {
  nu.validate();
  if (x.cols != anchor.cfg.input_dim)
    throw std::invalid_argument("forward_soft: input width mismatch");
  Graph g;
  std::vector<Graph::Var> nuRows;
  nuRows.reserve(nu.rows.size());
  for (const Tensor& m : nu.rows) nuRows.push_back(g.constant(m));
  ModulationVars mv;
  if (mods) {
    mv.dgamma.resize(mods->dgamma.size());
    mv.dbeta.resize(mods->dbeta.size());
    for (size_t l = 0; l < mods->dgamma.size(); ++l)
      for (size_t i = 0; i < mods->dgamma[l].size(); ++i) {
        mv.dgamma[l].push_back(g.constant(mods->dgamma[l][i]));
        mv.dbeta[l].push_back(g.constant(mods->dbeta[l][i]));
      }
  }
  std::vector<Graph::Var> outs =
      forward_soft_graph(g, anchor, nuRows, g.constant(x), mods ? &mv : nullptr);
  std::vector<Tensor> result;
  result.reserve(outs.size());
  for (Graph::Var v : outs) result.push_back(g.value(v));
  return result;
}

Tensor forward_stream(const AnchorNet& anchor, int stream, const Tensor& x,
                      std::vector<Tensor>* taps) {
  Tensor y = x;
  for (int l = 0; l < anchor.cfg.node_layers(); ++l) {
    y = apply_block_plain(anchor.blocks[l][stream], y, nullptr, nullptr);
    if (taps) taps->push_back(y);
  }
  return apply_head_plain(anchor, stream, y);
}

}  // namespace dmtc
