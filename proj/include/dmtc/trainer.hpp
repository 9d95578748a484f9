#pragma once

#include <cstdint>
#include <vector>

#include "dmtc/benchsynth.hpp"
#include "dmtc/controller.hpp"
#include "dmtc/objectives.hpp"
#include "dmtc/searchspace.hpp"

namespace dmtc {

struct TrainConfig {
  int anchor_steps = 6000;
  int edge_steps = 30000;
  int weight_steps = 4000;
  int batch = 16;
  double lr = 1e-3;
  double lr_decay = 0.3;
  std::vector<double> milestones_frac = {14.0 / 30.0, 28.0 / 30.0};
  double eta = 0.2;           // symmetric Dirichlet concentration
  double tau = -1.0;          // < 0 means default 0.6 / N
  double lambda_active = 1.0;
  double lambda_inactive = 0.1;
  std::vector<double> task_weights;  // empty means all ones
  double zeta_init = 5.0;
  double zeta_decay = 0.97;
  int zeta_interval = 300;
  int affinity_probes = 64;
  uint64_t seed = 17;

  void validate() const;
  double tau_for(int tasks) const { return tau > 0.0 ? tau : 0.6 / tasks; }
  std::vector<double> weights_for(int tasks) const {
    return task_weights.empty() ? std::vector<double>(tasks, 1.0) : task_weights;
  }
};

struct StepRecord {
  int step = 0;
  double task_loss = 0, active = 0, inactive = 0, omega = 0, zeta = 0, c = 0;
  std::vector<double> r;
};

struct TrainReport {
  std::vector<StepRecord> rows;
  double wall_seconds = 0.0;
};

// zeta = zeta_init * zeta_decay^floor(step / zeta_interval)
double temperature(long step, const TrainConfig& cfg);
// Step-decayed learning rate; milestones at the configured fractions of
// total_steps.
double learning_rate(long step, long total_steps, const TrainConfig& cfg);

// r ~ Dirichlet(eta), c ~ Unif(0,1), independent.
Preference sample_preference(Rng& rng, const std::vector<double>& eta);

// Stage 0: each stream plus its head trained independently on its own task;
// batch-normalization running statistics are captured then frozen.
AnchorNet train_anchor(const TrainConfig& cfg, const AnchorConfig& anchor_cfg,
                       const TaskDataset& data, Rng rng);

// Stage 1: edge hypernet against L_task + Omega; anchor and affinity frozen.
EdgeHypernet train_edge(const TrainConfig& cfg, const AnchorNet& anchor, const Tensor& affinity,
                        const TaskDataset& data, Rng rng, TrainReport* report = nullptr);

// Stage 2: weight hypernet against L_task only; anchor and edge frozen.
WeightHypernet train_weight(const TrainConfig& cfg, const AnchorNet& anchor,
                            const EdgeHypernet& edge, const TaskDataset& data, Rng rng,
                            TrainReport* report = nullptr);

struct TrainedBundle {
  AnchorNet anchor;
  TaskAffinity affinity;
  EdgeHypernet edge;
  WeightHypernet weight;
};

// Full pipeline: anchor -> affinity -> edge -> weight, all randomness drawn
// from named substreams of cfg.seed.
TrainedBundle train_all(const TrainConfig& cfg, const AnchorConfig& anchor_cfg,
                        const TaskDataset& data, TrainReport* edge_report = nullptr,
                        TrainReport* weight_report = nullptr);

}  // namespace dmtc
