#include "dmtc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dmtc {

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), src.cols);
  for (size_t r = 0; r < idx.size(); ++r)
    for (int c = 0; c < src.cols; ++c) out.at(static_cast<int>(r), c) = src.at(idx[r], c);
  return out;
}

std::vector<int> draw_batch(Rng& rng, int pool, int batch) {
  std::vector<int> idx(batch);
  for (int& i : idx) i = rng.uniform_int(pool);
  return idx;
}

std::vector<Tensor> collect_grads(const Graph& g, const std::vector<Graph::Var>& vars) {
  std::vector<Tensor> grads;
  grads.reserve(vars.size());
  for (Graph::Var v : vars) grads.push_back(g.grad(v));
  return grads;
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (anchor_steps <= 0 || edge_steps <= 0 || weight_steps <= 0 || batch <= 0)
    throw std::invalid_argument("train config: steps and batch must be positive");
  if (eta <= 0.0) throw std::invalid_argument("train config: eta must be positive");
  if (zeta_interval < 1) throw std::invalid_argument("train config: zeta interval must be >= 1");
  if (zeta_init <= 0.0 || zeta_decay <= 0.0 || zeta_decay > 1.0)
    throw std::invalid_argument("train config: invalid temperature schedule");
  if (lambda_active < 0.0 || lambda_inactive < 0.0)
    throw std::invalid_argument("train config: lambdas must be nonnegative");
  for (double w : task_weights)
    if (w <= 0.0) throw std::invalid_argument("train config: task weights must be positive");
}

double temperature(long step, const TrainConfig& cfg) {
  if (step < 0) throw std::invalid_argument("temperature: negative step");
  return cfg.zeta_init * std::pow(cfg.zeta_decay, static_cast<double>(step / cfg.zeta_interval));
}

double learning_rate(long step, long total_steps, const TrainConfig& cfg) {
  int passed = 0;
  for (double f : cfg.milestones_frac)
    if (static_cast<double>(step) >= f * static_cast<double>(total_steps)) ++passed;
  return cfg.lr * std::pow(cfg.lr_decay, passed);
}

Preference sample_preference(Rng& rng, const std::vector<double>& eta) {
  Preference p;
  p.r = rng.dirichlet(eta);
  p.c = rng.uniform();
  return p;
}

AnchorNet train_anchor(const TrainConfig& cfg, const AnchorConfig& anchor_cfg,
                       const TaskDataset& data, Rng rng) {
  cfg.validate();
  // All streams share init and batch schedules; they differ only through
  // their targets, so permuting tasks permutes the trained streams.
  AnchorNet proto = AnchorNet::init(anchor_cfg, rng.split("anchor_init"));
  AnchorNet anchor = proto;
  const int L1 = anchor_cfg.node_layers();
  const double ema = 0.1;
  const double eps = 1e-5;

  for (int stream = 0; stream < anchor_cfg.tasks; ++stream) {
    ParamStore params;
    std::vector<int> w_idx(L1), b_idx(L1), g_idx(L1), be_idx(L1);
    for (int l = 0; l < L1; ++l) {
      Block& blk = anchor.blocks[l][stream];
      std::string tag = std::to_string(l);
      w_idx[l] = params.add("W" + tag, blk.W);
      b_idx[l] = params.add("b" + tag, blk.b);
      g_idx[l] = params.add("gamma" + tag, blk.norm.gamma);
      be_idx[l] = params.add("beta" + tag, blk.norm.beta);
    }
    int hw = params.add("head_W", anchor.head_W[stream]);
    int hb = params.add("head_b", anchor.head_b[stream]);

    std::vector<Tensor> run_mu(L1, Tensor(1, anchor_cfg.width));
    std::vector<Tensor> run_var(L1, Tensor(1, anchor_cfg.width));
    for (Tensor& t : run_var)
      for (double& e : t.v) e = 1.0;

    AdamState adam(params, AdamConfig{cfg.lr});
    Rng batch_rng = rng.split("anchor_batch");

    for (int step = 0; step < cfg.anchor_steps; ++step) {
      std::vector<int> idx = draw_batch(batch_rng, data.train_x.rows, cfg.batch);
      Tensor xb = gather_rows(data.train_x, idx);
      Tensor yb = gather_rows(data.train_y[stream], idx);

      Graph g;
      std::vector<Graph::Var> leaves;
      leaves.reserve(params.count());
      for (const Tensor& t : params.values) leaves.push_back(g.param(t));

      Graph::Var h = g.constant(xb);
      for (int l = 0; l < L1; ++l) {
        Graph::Var z = g.add_row(g.matmul(h, leaves[w_idx[l]]), leaves[b_idx[l]]);
        // Batch statistics enter as constants; gradients flow through z only.
        const Tensor& zv = g.value(z);
        Tensor mu(1, zv.cols), var(1, zv.cols);
        for (int c = 0; c < zv.cols; ++c) {
          double m = 0.0;
          for (int r = 0; r < zv.rows; ++r) m += zv.at(r, c);
          m /= zv.rows;
          double s = 0.0;
          for (int r = 0; r < zv.rows; ++r) {
            double d = zv.at(r, c) - m;
            s += d * d;
          }
          mu.at(0, c) = m;
          var.at(0, c) = s / zv.rows;
        }
        for (int c = 0; c < zv.cols; ++c) {
          run_mu[l].at(0, c) = (1.0 - ema) * run_mu[l].at(0, c) + ema * mu.at(0, c);
          run_var[l].at(0, c) = (1.0 - ema) * run_var[l].at(0, c) + ema * var.at(0, c);
        }
        Tensor neg_mu = mu, inv_sd = var;
        for (double& e : neg_mu.v) e = -e;
        for (double& e : inv_sd.v) e = 1.0 / std::sqrt(e + eps);
        Graph::Var xhat = g.mul_row(g.add_row(z, g.constant(neg_mu)), g.constant(inv_sd));
        h = g.relu(g.add_row(g.mul_row(xhat, leaves[g_idx[l]]), leaves[be_idx[l]]));
      }
      Graph::Var pred = g.add_row(g.matmul(h, leaves[hw]), leaves[hb]);
      Graph::Var loss = mse_graph(g, pred, yb);
      double lv = g.forward_backward(loss);
      if (!std::isfinite(lv)) throw NumericError("train_anchor: non-finite loss");
      adam_step(adam, params, collect_grads(g, leaves));
    }

    for (int l = 0; l < L1; ++l) {
      Block& blk = anchor.blocks[l][stream];
      blk.W = params.values[w_idx[l]];
      blk.b = params.values[b_idx[l]];
      blk.norm.gamma = params.values[g_idx[l]];
      blk.norm.beta = params.values[be_idx[l]];
      blk.norm.mu = run_mu[l];
      blk.norm.sigma = run_var[l];
      for (double& e : blk.norm.sigma.v) e = std::sqrt(e + eps);
    }
    anchor.head_W[stream] = params.values[hw];
    anchor.head_b[stream] = params.values[hb];
  }
  return anchor;
}

EdgeHypernet train_edge(const TrainConfig& cfg, const AnchorNet& anchor, const Tensor& affinity,
                        const TaskDataset& data, Rng rng, TrainReport* report) {
  cfg.validate();
  const int N = anchor.cfg.tasks;
  const int L = anchor.cfg.branch_layers;
  const double tau = cfg.tau_for(N);
  const std::vector<double> w = cfg.weights_for(N);
  const std::vector<double> eta(N, cfg.eta);
  double t0 = now_seconds();

  EdgeHypernet edge = EdgeHypernet::init(N, L, rng.split("edge_init"));
  AdamState adam(edge.params, AdamConfig{cfg.lr});
  Rng pref_rng = rng.split("edge_pref");
  Rng gumbel_rng = rng.split("edge_gumbel");
  Rng batch_rng = rng.split("edge_batch");

  for (int step = 0; step < cfg.edge_steps; ++step) {
    Preference pref = sample_preference(pref_rng, eta);
    TaskDichotomy dich = dichotomize(pref, tau);
    double zeta = temperature(step, cfg);
    std::vector<Tensor> noise = draw_gumbel_noise(gumbel_rng, L, N);
    std::vector<int> idx = draw_batch(batch_rng, data.train_x.rows, cfg.batch);
    Tensor xb = gather_rows(data.train_x, idx);

    Graph g;
    std::vector<Graph::Var> leaves;
    std::vector<Graph::Var> alpha = edge.forward_graph(g, pref, &leaves);
    std::vector<Graph::Var> nu = gumbel_softmax_graph(g, alpha, noise, zeta);
    std::vector<Graph::Var> p_use = compute_p_use_graph(g, nu, N);
    std::vector<Graph::Var> outs = forward_soft_graph(g, anchor, nu, g.constant(xb));

    Graph::Var lt = g.constant_scalar(0.0);
    for (int i = 0; i < N; ++i) {
      Tensor yb = gather_rows(data.train_y[i], idx);
      lt = g.add(lt, g.scale(mse_graph(g, outs[i], yb), pref.r[i] * w[i]));
    }
    Graph::Var la = active_loss_graph(g, nu, dich, affinity, p_use, N);
    Graph::Var li = inactive_loss_graph(g, nu, dich, N);
    Graph::Var omega =
        g.add(g.scale(la, pref.c * cfg.lambda_active), g.scale(li, cfg.lambda_inactive));
    Graph::Var total = g.add(lt, omega);

    double lv = g.forward_backward(total);
    if (!std::isfinite(lv)) throw NumericError("train_edge: non-finite loss");
    adam_step(adam, edge.params, collect_grads(g, leaves),
              learning_rate(step, cfg.edge_steps, cfg));

    if (report) {
      StepRecord rec;
      rec.step = step;
      rec.task_loss = g.scalar(lt);
      rec.active = g.scalar(la);
      rec.inactive = g.scalar(li);
      rec.omega = g.scalar(omega);
      rec.zeta = zeta;
      rec.c = pref.c;
      rec.r = pref.r;
      report->rows.push_back(std::move(rec));
    }
  }
  if (report) report->wall_seconds = now_seconds() - t0;
  return edge;
}

WeightHypernet train_weight(const TrainConfig& cfg, const AnchorNet& anchor,
                            const EdgeHypernet& edge, const TaskDataset& data, Rng rng,
                            TrainReport* report) {
  cfg.validate();
  const int N = anchor.cfg.tasks;
  const int L = anchor.cfg.branch_layers;
  const std::vector<double> w = cfg.weights_for(N);
  const std::vector<double> eta(N, cfg.eta);
  double t0 = now_seconds();

  WeightHypernet weight = WeightHypernet::init(anchor.cfg, rng.split("weight_init"));
  AdamState adam(weight.params, AdamConfig{cfg.lr});
  Rng pref_rng = rng.split("weight_pref");
  Rng gumbel_rng = rng.split("weight_gumbel");
  Rng batch_rng = rng.split("weight_batch");

  for (int step = 0; step < cfg.weight_steps; ++step) {
    Preference pref = sample_preference(pref_rng, eta);
    // Temperature schedule continued from the end of stage 1.
    double zeta = temperature(static_cast<long>(cfg.edge_steps) + step, cfg);
    BranchingLogits alpha = edge.forward(pref);
    BranchSample nu = gumbel_softmax(alpha, zeta, gumbel_rng);
    std::vector<int> idx = draw_batch(batch_rng, data.train_x.rows, cfg.batch);
    Tensor xb = gather_rows(data.train_x, idx);

    Graph g;
    std::vector<Graph::Var> leaves;
    ModulationVars mods = weight.forward_graph(g, pref, &leaves);
    std::vector<Graph::Var> nuRows;
    nuRows.reserve(L);
    for (const Tensor& m : nu.rows) nuRows.push_back(g.constant(m));
    std::vector<Graph::Var> outs = forward_soft_graph(g, anchor, nuRows, g.constant(xb), &mods);

    Graph::Var lt = g.constant_scalar(0.0);
    for (int i = 0; i < N; ++i) {
      Tensor yb = gather_rows(data.train_y[i], idx);
      lt = g.add(lt, g.scale(mse_graph(g, outs[i], yb), pref.r[i] * w[i]));
    }
    double lv = g.forward_backward(lt);
    if (!std::isfinite(lv)) throw NumericError("train_weight: non-finite loss");
    adam_step(adam, weight.params, collect_grads(g, leaves),
              learning_rate(step, cfg.weight_steps, cfg));

    if (report) {
      StepRecord rec;
      rec.step = step;
      rec.task_loss = lv;
      rec.zeta = zeta;
      rec.c = pref.c;
      rec.r = pref.r;
      report->rows.push_back(std::move(rec));
    }
  }
  if (report) report->wall_seconds = now_seconds() - t0;
  return weight;
}

TrainedBundle train_all(const TrainConfig& cfg, const AnchorConfig& anchor_cfg,
                        const TaskDataset& data, TrainReport* edge_report,
                        TrainReport* weight_report) {
  Rng root(cfg.seed);
  TrainedBundle b;
  b.anchor = train_anchor(cfg, anchor_cfg, data, root.split("anchor"));
  Rng probe_rng = root.split("affinity_probes");
  int K = std::min(cfg.affinity_probes, data.train_x.rows);
  std::vector<int> idx = draw_batch(probe_rng, data.train_x.rows, K);
  b.affinity = rsa_affinity(b.anchor, gather_rows(data.train_x, idx));
  b.edge = train_edge(cfg, b.anchor, b.affinity.A, data, root.split("edge"), edge_report);
  b.weight = train_weight(cfg, b.anchor, b.edge, data, root.split("weight"), weight_report);
  return b;
}

}  // namespace dmtc
