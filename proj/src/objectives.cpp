#include "dmtc/objectives.hpp"

#include <cmath>
#include <iostream>
#include <bit>
#include <limits>
#include <stdexcept>

namespace dmtc {

TaskDichotomy dichotomize(const Preference& pref, double tau) {
  pref.validate();
  if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("dichotomize: tau outside (0,1)");
  TaskDichotomy d;
  d.tau = tau;
  for (size_t i = 0; i < pref.r.size(); ++i)
    (pref.r[i] >= tau ? d.active : d.inactive).push_back(static_cast<int>(i));
  return d;
}

double task_loss(const Preference& pref, const std::vector<double>& w,
                 const std::vector<double>& losses) {
  pref.validate();
  if (w.size() != pref.r.size() || losses.size() != pref.r.size())
    throw std::invalid_argument("task_loss: size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < losses.size(); ++i) {
    if (w[i] <= 0.0) throw std::invalid_argument("task_loss: nonpositive weight");
    if (!(losses[i] >= 0.0) || !std::isfinite(losses[i]))
      throw std::invalid_argument("task_loss: losses must be finite and nonnegative");
    total += pref.r[i] * w[i] * losses[i];
  }
  return total;
}

std::vector<Tensor> draw_gumbel_noise(Rng& rng, int layers, int tasks) {
  std::vector<Tensor> noise;
  noise.reserve(layers);
  for (int l = 0; l < layers; ++l) noise.push_back(sample_gumbel(rng, tasks, tasks));
  return noise;
}

BranchSample gumbel_softmax(const BranchingLogits& alpha, double zeta, Rng& rng) {
  if (zeta <= 0.0) throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  BranchSample s(alpha.layers, alpha.tasks);
  for (int l = 0; l < alpha.layers; ++l) {
    for (int j = 0; j < alpha.tasks; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> z(alpha.tasks);
      for (int i = 0; i < alpha.tasks; ++i) {
        z[i] = (alpha.at(l, j, i) + rng.gumbel()) / zeta;
        mx = std::max(mx, z[i]);
      }
      double sum = 0.0;
      for (int i = 0; i < alpha.tasks; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
      }
      for (int i = 0; i < alpha.tasks; ++i) s.rows[l].at(j, i) = z[i] / sum;
    }
  }
  return s;
}

std::vector<Graph::Var> gumbel_softmax_graph(Graph& g, const std::vector<Graph::Var>& alpha,
                                             const std::vector<Tensor>& noise, double zeta) {
  if (zeta <= 0.0) throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  if (noise.size() != alpha.size())
    throw std::invalid_argument("gumbel_softmax: noise layer count mismatch");
  std::vector<Graph::Var> nu;
  nu.reserve(alpha.size());
  for (size_t l = 0; l < alpha.size(); ++l) {
    Graph::Var perturbed = g.add(alpha[l], g.constant(noise[l]));
    nu.push_back(g.softmax_rows(g.scale(perturbed, 1.0 / zeta)));
  }
  return nu;
}

std::vector<Graph::Var> compute_p_use_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                                            int tasks) {
  // Differentiable twin of compute_p_use: exact subset-distribution DP with
  // inclusion-exclusion, so gradients flow through the true usage marginals.
  const int N = tasks;
  if (N > 10) throw std::invalid_argument("compute_p_use_graph: exact DP limited to 10 tasks");
  const int L = static_cast<int>(nuRows.size());
  const int full = (1 << N) - 1;
  std::vector<Graph::Var> p(L + 1);
  Tensor ones(1, N);
  for (double& e : ones.v) e = 1.0;
  p[L] = g.constant(ones);

  std::vector<Graph::Var> q(full + 1);
  q[full] = g.constant_scalar(1.0);
  std::vector<Tensor> masks(full + 1, Tensor(1, N));
  for (int R = 1; R <= full; ++R)
    for (int i = 0; i < N; ++i) masks[R].at(0, i) = (R >> i & 1) ? 1.0 : 0.0;

  for (int l = L - 1; l >= 0; --l) {
    std::vector<std::vector<Graph::Var>> ps(N, std::vector<Graph::Var>(full + 1));
    for (int k = 0; k < N; ++k) {
      Graph::Var row = g.slice(nuRows[l], k, 1, 0, N);
      for (int R = 1; R <= full; ++R) ps[k][R] = g.sum(g.mul(row, g.constant(masks[R])));
    }
    std::vector<Graph::Var> qn(full + 1);
    for (int S = 1; S <= full; ++S) {
      if (!q[S].valid()) continue;
      for (int T = 1; T <= full; ++T) {
        Graph::Var exact{};
        for (int R = T; R > 0; R = (R - 1) & T) {
          Graph::Var prod{};
          for (int k = 0; k < N; ++k)
            if (S >> k & 1) prod = prod.valid() ? g.mul(prod, ps[k][R]) : ps[k][R];
          if (std::popcount(static_cast<unsigned>(T ^ R)) % 2) prod = g.scale(prod, -1.0);
          exact = exact.valid() ? g.add(exact, prod) : prod;
        }
        Graph::Var contrib = g.mul(q[S], exact);
        qn[T] = qn[T].valid() ? g.add(qn[T], contrib) : contrib;
      }
    }
    q = std::move(qn);
    Graph::Var marg{};
    for (int T = 1; T <= full; ++T) {
      Graph::Var term = g.matmul(q[T], g.constant(masks[T]));
      marg = marg.valid() ? g.add(marg, term) : term;
    }
    p[l] = marg;
  }
  return p;
}

double active_loss(const BranchSample& nu, const TaskDichotomy& dich, const Tensor& affinity,
                   const Tensor& p_use) {
  const int L = nu.layers;
  if (dich.active.size() <= 1) return 0.0;
  double total = 0.0;
  for (int l = 1; l <= L; ++l) {
    double layer_w = static_cast<double>(L - l) / L;
    if (layer_w == 0.0) continue;
    const Tensor& rows = nu.rows[l - 1];
    for (int i : dich.active)
      for (int j : dich.active) {
        if (i == j) continue;
        double d2 = 0.0;
        for (int k = 0; k < nu.tasks; ++k) {
          double d = rows.at(i, k) - rows.at(j, k);
          d2 += d * d;
        }
        total += layer_w * affinity.at(i, j) * p_use.at(l, i) * p_use.at(l, j) * d2;
      }
  }
  return total;
}

Graph::Var active_loss_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                             const TaskDichotomy& dich, const Tensor& affinity,
                             const std::vector<Graph::Var>& p_use, int tasks) {
  const int L = static_cast<int>(nuRows.size());
  Graph::Var total = g.constant_scalar(0.0);
  if (dich.active.size() <= 1) return total;
  for (int l = 1; l <= L; ++l) {
    double layer_w = static_cast<double>(L - l) / L;
    if (layer_w == 0.0) continue;
    for (int i : dich.active)
      for (int j : dich.active) {
        if (i == j) continue;
        Graph::Var ri = g.slice(nuRows[l - 1], i, 1, 0, tasks);
        Graph::Var rj = g.slice(nuRows[l - 1], j, 1, 0, tasks);
        Graph::Var d2 = g.sqdist(ri, rj);
        Graph::Var pi = g.slice(p_use[l], 0, 1, i, 1);
        Graph::Var pj = g.slice(p_use[l], 0, 1, j, 1);
        Graph::Var term = g.mul(g.mul(pi, pj), d2);
        total = g.add(total, g.scale(term, layer_w * affinity.at(i, j)));
      }
  }
  return total;
}

double inactive_loss(const BranchSample& nu, const TaskDichotomy& dich) {
  if (dich.inactive.empty()) return 0.0;
  if (dich.active.empty()) {
    std::cerr << "warning: no active task (tau above max preference); inactive loss set to 0\n";
    return 0.0;
  }
  double total = 0.0;
  for (int l = 0; l < nu.layers; ++l) {
    const Tensor& rows = nu.rows[l];
    for (int j : dich.inactive) {
      double best = std::numeric_limits<double>::infinity();
      for (int i : dich.active) {
        double d2 = 0.0;
        for (int k = 0; k < nu.tasks; ++k) {
          double d = rows.at(i, k) - rows.at(j, k);
          d2 += d * d;
        }
        best = std::min(best, d2);
      }
      total += best;
    }
  }
  return total;
}

Graph::Var inactive_loss_graph(Graph& g, const std::vector<Graph::Var>& nuRows,
                               const TaskDichotomy& dich, int tasks) {
  Graph::Var total = g.constant_scalar(0.0);
  if (dich.inactive.empty()) return total;
  if (dich.active.empty()) {
    std::cerr << "warning: no active task (tau above max preference); inactive loss set to 0\n";
    return total;
  }
  for (const Graph::Var& layer : nuRows) {
    for (int j : dich.inactive) {
      Graph::Var rj = g.slice(layer, j, 1, 0, tasks);
      Graph::Var best{};
      double best_val = std::numeric_limits<double>::infinity();
      for (int i : dich.active) {
        Graph::Var ri = g.slice(layer, i, 1, 0, tasks);
        Graph::Var d2 = g.sqdist(ri, rj);
        if (g.scalar(d2) < best_val) {
          best_val = g.scalar(d2);
          best = d2;
        }
      }
      total = g.add(total, best);
    }
  }
  return total;
}

double regularizer(const Preference& pref, const TaskDichotomy& dich, const BranchSample& nu,
                   const Tensor& affinity, const LossWeights& weights) {
  if (weights.lambda_active < 0.0 || weights.lambda_inactive < 0.0)
    throw std::invalid_argument("regularizer: lambdas must be nonnegative");
  Tensor p_use = compute_p_use(nu);
  return pref.c * weights.lambda_active * active_loss(nu, dich, affinity, p_use) +
         weights.lambda_inactive * inactive_loss(nu, dich);
}

TaskAffinity rsa_affinity(const AnchorNet& anchor, const Tensor& probes) {
  const int K = probes.rows;
  const int N = anchor.cfg.tasks;
  if (K < 2) throw std::invalid_argument("rsa_affinity: need at least 2 probe samples");
  TaskAffinity out;
  out.sample_count = K;

  // Per-stream per-layer probe features.
  std::vector<std::vector<Tensor>> taps(N);
  for (int i = 0; i < N; ++i) forward_stream(anchor, i, probes, &taps[i]);
  const int layers = static_cast<int>(taps[0].size());

  out.A = Tensor(N, N);
  bool warned = false;
  for (int l = 0; l < layers; ++l) {
    Tensor S(N, K * K);
    for (int i = 0; i < N; ++i) {
      const Tensor& f = taps[i][l];  // K x width
      std::vector<double> norms(K);
      for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int c = 0; c < f.cols; ++c) s += f.at(k, c) * f.at(k, c);
        norms[k] = std::sqrt(s);
      }
      for (int k = 0; k < K; ++k)
        for (int k2 = 0; k2 < K; ++k2) {
          if (norms[k] == 0.0 || norms[k2] == 0.0) {
            if (!warned) {
              std::cerr << "warning: zero-norm feature vector in RSA; cosine set to 0\n";
              warned = true;
            }
            S.at(i, k * K + k2) = 0.0;
            continue;
          }
          double dot = 0.0;
          for (int c = 0; c < f.cols; ++c) dot += f.at(k, c) * f.at(k2, c);
          S.at(i, k * K + k2) = dot / (norms[k] * norms[k2]);
        }
    }
    Tensor D(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        double s = 0.0;
        for (int e = 0; e < K * K; ++e) {
          double d = S.at(i, e) - S.at(j, e);
          s += d * d;
        }
        D.at(i, j) = std::sqrt(s);
      }
    Tensor Dhat(N, N);
    for (int i = 0; i < N; ++i) {
      double lo = D.at(i, 0), hi = D.at(i, 0);
      for (int j = 1; j < N; ++j) {
        lo = std::min(lo, D.at(i, j));
        hi = std::max(hi, D.at(i, j));
      }
      for (int j = 0; j < N; ++j)
        Dhat.at(i, j) = hi > lo ? (D.at(i, j) - lo) / (hi - lo) : 0.0;
    }
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) out.A.at(i, j) += (1.0 - Dhat.at(i, j)) / layers;
    out.S.push_back(std::move(S));
    out.D.push_back(std::move(D));
    out.D_hat.push_back(std::move(Dhat));
  }
  return out;
}

double mse(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred.v[i] - target.v[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

Graph::Var mse_graph(Graph& g, Graph::Var pred, const Tensor& target) {
  Graph::Var d = g.sqdist(pred, g.constant(target));
  return g.scale(d, 1.0 / static_cast<double>(target.size()));
}

}  // namespace dmtc
