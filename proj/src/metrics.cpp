#include "dmtc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmtc {

void LossFront::validate() const {
  if (reference.empty()) throw std::invalid_argument("front: empty reference");
  for (double x : reference)
    if (!std::isfinite(x)) throw std::invalid_argument("front: non-finite reference");
  for (const auto& p : points) {
    if (p.size() != reference.size())
      throw std::invalid_argument("front: point dimension mismatch");
    for (double x : p)
      if (!std::isfinite(x)) throw std::invalid_argument("front: non-finite point");
  }
}

namespace {

bool inside_box(const std::vector<double>& p, const std::vector<double>& ref) {
  for (size_t d = 0; d < ref.size(); ++d)
    if (p[d] >= ref[d]) return false;
  return true;
}

// Dominated volume of the clipped point set within [., ref], recursing on
// the last coordinate.
double hv_rec(std::vector<std::vector<double>> pts, const std::vector<double>& ref) {
  if (pts.empty()) return 0.0;
  const size_t dim = ref.size();
  if (dim == 1) {
    double best = ref[0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  std::vector<double> cuts;
  for (const auto& p : pts) cuts.push_back(p[dim - 1]);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  cuts.push_back(ref[dim - 1]);

  std::vector<double> sub_ref(ref.begin(), ref.end() - 1);
  double vol = 0.0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    double width = cuts[k + 1] - cuts[k];
    if (width <= 0.0) continue;
    std::vector<std::vector<double>> slab;
    for (const auto& p : pts)
      if (p[dim - 1] <= cuts[k]) slab.emplace_back(p.begin(), p.end() - 1);
    vol += width * hv_rec(std::move(slab), sub_ref);
  }
  return vol;
}

}  // namespace

double hypervolume(const LossFront& front) {
  front.validate();
  if (front.reference.size() > 4)
    throw std::invalid_argument("hypervolume: exact routine limited to 4 objectives; "
                                "use hypervolume_mc");
  std::vector<std::vector<double>> pts;
  for (const auto& p : front.points)
    if (inside_box(p, front.reference)) pts.push_back(p);
  return hv_rec(std::move(pts), front.reference);
}

McEstimate hypervolume_mc(const LossFront& front, long samples, Rng& rng) {
  front.validate();
  if (samples < 10000) throw std::invalid_argument("hypervolume_mc: need at least 10^4 samples");
  std::vector<std::vector<double>> pts;
  for (const auto& p : front.points)
    if (inside_box(p, front.reference)) pts.push_back(p);
  McEstimate est;
  if (pts.empty()) return est;

  // The sampling box spans the clipped points' lower corner to the reference.
  std::vector<double> lo = pts[0];
  for (const auto& p : pts)
    for (size_t d = 0; d < lo.size(); ++d) lo[d] = std::min(lo[d], p[d]);
  double box = 1.0;
  for (size_t d = 0; d < lo.size(); ++d) box *= front.reference[d] - lo[d];
  if (box <= 0.0) return est;

  long hits = 0;
  std::vector<double> x(lo.size());
  for (long s = 0; s < samples; ++s) {
    for (size_t d = 0; d < lo.size(); ++d) x[d] = rng.uniform(lo[d], front.reference[d]);
    for (const auto& p : pts) {
      bool dom = true;
      for (size_t d = 0; d < lo.size(); ++d)
        if (p[d] > x[d]) {
          dom = false;
          break;
        }
      if (dom) {
        ++hits;
        break;
      }
    }
  }
  double frac = static_cast<double>(hits) / samples;
  est.value = frac * box;
  est.stderr_ = box * std::sqrt(frac * (1.0 - frac) / samples);
  return est;
}

double uniformity(const Preference& pref, const std::vector<double>& losses) {
  pref.validate();
  if (losses.size() != pref.r.size()) throw std::invalid_argument("uniformity: size mismatch");
  const size_t n = losses.size();
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) total += pref.r[i] * losses[i];
  if (total <= 0.0) throw std::invalid_argument("uniformity: weighted losses sum to zero");
  double kl = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double lhat = std::max(pref.r[i] * losses[i] / total, 1e-12);
    kl += lhat * std::log(lhat * static_cast<double>(n));
  }
  return 1.0 - kl;
}

std::vector<std::vector<std::vector<int>>> enumerate_trees(int tasks, int layers) {
  if (tasks < 1 || layers < 0) throw std::invalid_argument("enumerate_trees: invalid extents");
  const int slots = tasks * layers;
  double count = std::pow(static_cast<double>(tasks), slots);
  if (count > 1e6)
    throw std::invalid_argument("enumerate_trees: " + std::to_string(count) +
                                " assignments exceed the 10^6 cap");
  std::vector<std::vector<std::vector<int>>> all;
  std::vector<int> digits(slots, 0);
  const long total = static_cast<long>(count);
  for (long n = 0; n < total; ++n) {
    std::vector<std::vector<int>> parent(layers, std::vector<int>(tasks));
    for (int s = 0; s < slots; ++s) parent[s / tasks][s % tasks] = digits[s];
    all.push_back(std::move(parent));
    for (int s = slots - 1; s >= 0; --s) {
      if (++digits[s] < tasks) break;
      digits[s] = 0;
    }
  }
  return all;
}

Tensor p_use_oracle(const BranchSample& nu) {
  nu.validate();
  const int N = nu.tasks, L = nu.layers;
  auto assignments = enumerate_trees(N, L);
  Tensor marg(L + 1, N);
  for (const auto& parent : assignments) {
    double prob = 1.0;
    for (int l = 0; l < L; ++l)
      for (int j = 0; j < N; ++j) prob *= nu.rows[l].at(j, parent[l][j]);
    TreeArchitecture tree = tree_from_parents(parent, N);
    for (int l = 0; l <= L; ++l)
      for (int i = 0; i < N; ++i)
        if (tree.active[l][i]) marg.at(l, i) += prob;
  }
  return marg;
}

std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& fn,
                                const std::vector<double>& point, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff: h must be positive");
  std::vector<double> grad(point.size());
  std::vector<double> x = point;
  for (size_t i = 0; i < point.size(); ++i) {
    x[i] = point[i] + h;
    double up = fn(x);
    x[i] = point[i] - h;
    double down = fn(x);
    x[i] = point[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff: non-finite evaluation");
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<Preference> default_grid(int tasks, int draws, double c, uint64_t seed) {
  std::vector<Preference> grid;
  Rng rng = Rng(seed).split("eval_grid");
  std::vector<double> eta(tasks, 0.2);
  for (int i = 0; i < draws; ++i) {
    Preference p;
    p.r = rng.dirichlet(eta);
    p.c = c;
    grid.push_back(std::move(p));
  }
  for (int k = 0; k < tasks; ++k) grid.push_back(Preference::one_hot(tasks, k, c));
  grid.push_back(Preference::uniform(tasks, c));
  return grid;
}

SweepResult preference_sweep(const TrainedBundle& bundle, const TaskDataset& data,
                             const SweepSpec& spec) {
  SweepResult result;
  const int N = bundle.anchor.cfg.tasks;
  LossFront front;
  front.reference = spec.hv_reference;
  for (const Preference& pref : spec.grid) {
    SweepRow row;
    row.pref = pref;
    TreeArchitecture tree = decode_architecture(bundle.edge.forward(pref));
    row.tree_signature = tree.signature();
    row.resource_ratio = resource_usage(bundle.anchor, tree).ratio_to_anchor;
    NormDeltas mods = spec.use_adaptation ? bundle.weight.forward(pref)
                                          : NormDeltas::zeros(bundle.anchor.cfg);
    std::vector<Tensor> outs = forward_hard(bundle.anchor, tree, data.test_x, &mods);
    row.losses.resize(N);
    for (int i = 0; i < N; ++i) row.losses[i] = mse(outs[i], data.test_y[i]);
    front.points.push_back(row.losses);
    result.mean_ratio += row.resource_ratio;
    result.mean_uniformity += uniformity(pref, row.losses);
    result.rows.push_back(std::move(row));
  }
  if (!result.rows.empty()) {
    result.mean_ratio /= static_cast<double>(result.rows.size());
    result.mean_uniformity /= static_cast<double>(result.rows.size());
  }
  if (!front.reference.empty()) result.hv = hypervolume(front);
  return result;
}

}  // namespace dmtc
