#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dmtc/benchsynth.hpp"
#include "dmtc/trainer.hpp"

namespace dmtc {

// Loss vectors to be minimized plus the dominating reference corner.
struct LossFront {
  std::vector<std::vector<double>> points;
  std::vector<double> reference;

  void validate() const;
};

// Exact dominated volume for up to 4 objectives, coordinate-sweep over the
// last axis with recursive projection. Points not strictly inside the
// reference box contribute nothing.
double hypervolume(const LossFront& front);

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Monte-Carlo oracle: fraction of uniform reference-box samples dominated
// by some front point, scaled by the box volume.
McEstimate hypervolume_mc(const LossFront& front, long samples, Rng& rng);

// mu = 1 - KL(normalized preference-weighted losses || uniform), natural log.
double uniformity(const Preference& pref, const std::vector<double>& losses);

// Every parent assignment (L rows of N parent indices); count is N^(N*L),
// capped at 10^6.
std::vector<std::vector<std::vector<int>>> enumerate_trees(int tasks, int layers);

// Brute-force usage marginals: sum over all assignments of the product of
// per-child row probabilities times the usage indicator.
Tensor p_use_oracle(const BranchSample& nu);

// Central differences per coordinate.
std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& fn,
                                const std::vector<double>& point, double h);

struct SweepRow {
  Preference pref;
  double resource_ratio = 0.0;
  std::vector<double> losses;
  std::string tree_signature;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double hv = 0.0;
  double mean_uniformity = 0.0;
  double mean_ratio = 0.0;
};

struct SweepSpec {
  std::vector<Preference> grid;
  std::vector<double> hv_reference;
  bool use_adaptation = true;
};

// Dirichlet(0.2) draws at a fixed seed plus the simplex corners and the
// uniform point, all at cost preference c.
std::vector<Preference> default_grid(int tasks, int draws, double c, uint64_t seed);

// Per grid preference: predicted tree, resource ratio and test losses, plus
// front-level aggregates.
SweepResult preference_sweep(const TrainedBundle& bundle, const TaskDataset& data,
                             const SweepSpec& spec);

}  // namespace dmtc
