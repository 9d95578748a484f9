#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "dmtc/metrics.hpp"
#include "dmtc/searchspace.hpp"

using namespace dmtc;

namespace {

AnchorConfig small_cfg(int tasks, int layers) {
  AnchorConfig cfg;
  cfg.tasks = tasks;
  cfg.branch_layers = layers;
  cfg.input_dim = 5;
  cfg.width = 6;
  cfg.head_dim = 2;
  return cfg;
}

Tensor random_input(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Tensor x(rows, cols);
  for (double& e : x.v) e = rng.gaussian();
  return x;
}

BranchSample random_sample(int L, int N, Rng& rng) {
  BranchSample nu(L, N);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < N; ++j) {
      double sum = 0.0;
      for (int i = 0; i < N; ++i) {
        double u = rng.uniform();
        nu.rows[l].at(j, i) = u;
        sum += u;
      }
      for (int i = 0; i < N; ++i) nu.rows[l].at(j, i) /= sum;
    }
  return nu;
}

}  // namespace

TEST_CASE("compute_p_use: top row is all ones") {
  Rng rng(1);
  BranchSample nu = random_sample(3, 3, rng);
  Tensor p = compute_p_use(nu);
  for (int i = 0; i < 3; ++i) CHECK(p.at(3, i) == 1.0);
}

TEST_CASE("compute_p_use: identity routing uses every node") {
  BranchSample nu = BranchSample::identity(2, 3);
  Tensor p = compute_p_use(nu);
  for (int l = 0; l <= 2; ++l)
    for (int i = 0; i < 3; ++i) CHECK(p.at(l, i) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compute_p_use: N=2 L=1 half-half rows give marginal 0.75") {
  BranchSample nu(1, 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) nu.rows[0].at(j, i) = 0.5;
  Tensor p = compute_p_use(nu);
  CHECK(p.at(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(p.at(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("compute_p_use: matches the brute-force oracle on random draws") {
  Rng rng(17);
  for (int N = 2; N <= 3; ++N)
    for (int L = 1; L <= 2; ++L)
      for (int rep = 0; rep < 20; ++rep) {
        BranchSample nu = random_sample(L, N, rng);
        Tensor dp = compute_p_use(nu);
        Tensor oracle = p_use_oracle(nu);
        for (size_t k = 0; k < dp.size(); ++k)
          CHECK(std::abs(dp.v[k] - oracle.v[k]) <= 1e-10);
      }
}

TEST_CASE("decode_architecture: diagonal-dominant logits give the fully branched tree") {
  BranchingLogits alpha(3, 3);
  for (int l = 0; l < 3; ++l)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) alpha.at(l, j, i) = (i == j) ? 2.0 : -1.0;
  TreeArchitecture tree = decode_architecture(alpha);
  for (int l = 0; l < 3; ++l)
    for (int j = 0; j < 3; ++j) CHECK(tree.parent[l][j] == j);
  for (int l = 0; l <= 3; ++l)
    for (int i = 0; i < 3; ++i) CHECK(tree.active[l][i]);
  CHECK(tree.cross_task_edges.empty());
}

TEST_CASE("decode_architecture: all children preferring parent 0 forms a single trunk") {
  BranchingLogits alpha(2, 3);
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) alpha.at(l, j, i) = (i == 0) ? 1.0 : 0.0;
  TreeArchitecture tree = decode_architecture(alpha);
  for (int l = 0; l < 2; ++l) {
    int active = 0;
    for (int i = 0; i < 3; ++i) active += tree.active[l][i] ? 1 : 0;
    CHECK(active == 1);
    CHECK(tree.active[l][0]);
  }
  for (int i = 0; i < 3; ++i) CHECK(tree.active[2][i]);
}

TEST_CASE("decode_architecture: exact ties resolve to the lowest parent index") {
  BranchingLogits alpha(1, 2);
  alpha.at(0, 0, 0) = 1.0;
  alpha.at(0, 0, 1) = 1.0;
  alpha.at(0, 1, 0) = 0.0;
  alpha.at(0, 1, 1) = 0.0;
  TreeArchitecture tree = decode_architecture(alpha);
  CHECK(tree.parent[0][0] == 0);
  CHECK(tree.parent[0][1] == 0);
}

TEST_CASE("forward_soft: identity routing is bit-equal to independent stream forwards") {
  AnchorConfig cfg = small_cfg(3, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(21));
  Tensor x = random_input(4, cfg.input_dim, 8);
  std::vector<Tensor> soft = forward_soft(anchor, BranchSample::identity(2, 3), x);
  for (int i = 0; i < 3; ++i) {
    Tensor single = forward_stream(anchor, i, x);
    REQUIRE(soft[i].same_shape(single));
    CHECK(soft[i].v == single.v);
  }
}

TEST_CASE("forward_soft at one-hot nu equals forward_hard on the induced tree bitwise") {
  AnchorConfig cfg = small_cfg(3, 3);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(5));
  Tensor x = random_input(4, cfg.input_dim, 13);
  std::vector<std::vector<int>> parent = {{1, 1, 2}, {0, 0, 0}, {2, 1, 2}};
  TreeArchitecture tree = tree_from_parents(parent, 3);
  std::vector<Tensor> hard = forward_hard(anchor, tree, x);
  std::vector<Tensor> soft = forward_soft(anchor, BranchSample::one_hot(tree), x);
  for (int i = 0; i < 3; ++i) CHECK(hard[i].v == soft[i].v);
}

TEST_CASE("forward_hard: evaluates exactly the active node set") {
  AnchorConfig cfg = small_cfg(3, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(2));
  Tensor x = random_input(2, cfg.input_dim, 3);
  std::vector<std::vector<int>> parent = {{0, 0, 0}, {0, 0, 0}};
  TreeArchitecture tree = tree_from_parents(parent, 3);
  int active = 0;
  for (const auto& layer : tree.active)
    for (bool b : layer) active += b ? 1 : 0;
  int evaluated = -1;
  (void)forward_hard(anchor, tree, x, nullptr, &evaluated);
  CHECK(evaluated == active);
}

TEST_CASE("resource_usage: fully branched tree has ratio exactly 1") {
  AnchorConfig cfg = small_cfg(3, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(4));
  std::vector<std::vector<int>> parent = {{0, 1, 2}, {0, 1, 2}};
  ResourceReport rep = resource_usage(anchor, tree_from_parents(parent, 3));
  CHECK(rep.ratio_to_anchor == 1.0);
}

TEST_CASE("resource_usage: full trunk is strictly cheaper than the full anchor") {
  AnchorConfig cfg = small_cfg(3, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(4));
  std::vector<std::vector<int>> parent = {{0, 0, 0}, {0, 0, 0}};
  ResourceReport rep = resource_usage(anchor, tree_from_parents(parent, 3));
  CHECK(rep.ratio_to_anchor < 1.0);
  CHECK(rep.ratio_to_anchor > 0.0);
}

TEST_CASE("resource_usage: strictly monotone under active-set inclusion (all N=2 L=2 trees)") {
  AnchorConfig cfg = small_cfg(2, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(6));
  auto trees = enumerate_trees(2, 2);
  std::vector<TreeArchitecture> archs;
  std::vector<long long> costs;
  for (const auto& parent : trees) {
    TreeArchitecture t = tree_from_parents(parent, 2);
    costs.push_back(resource_usage(anchor, t).param_count);
    archs.push_back(std::move(t));
  }
  for (size_t a = 0; a < archs.size(); ++a)
    for (size_t b = 0; b < archs.size(); ++b) {
      bool subset = true, proper = false;
      for (int l = 0; l <= 2 && subset; ++l)
        for (int i = 0; i < 2; ++i) {
          if (archs[a].active[l][i] && !archs[b].active[l][i]) subset = false;
          if (!archs[a].active[l][i] && archs[b].active[l][i]) proper = true;
        }
      if (subset && proper) CHECK(costs[a] < costs[b]);
    }
}

TEST_CASE("forward_soft: graph gradient matches a directional finite difference in nu") {
  AnchorConfig cfg = small_cfg(2, 2);
  AnchorNet anchor = AnchorNet::init(cfg, Rng(30));
  // break the freshly-initialized symmetry between streams so that routing
  // changes actually move the outputs
  Rng jitter(33);
  for (auto& layer : anchor.blocks)
    for (Block& blk : layer)
      for (double& e : blk.W.v) e += 0.2 * jitter.gaussian();
  Tensor x = random_input(3, cfg.input_dim, 31);
  Rng rng(32);
  BranchSample nu = random_sample(2, 2, rng);

  auto loss_of = [&](const BranchSample& s) {
    std::vector<Tensor> outs = forward_soft(anchor, s, x);
    double total = 0.0;
    for (const Tensor& o : outs)
      for (double e : o.v) total += e * e;
    return total;
  };

  Graph g;
  std::vector<Graph::Var> nuVars;
  for (const Tensor& t : nu.rows) nuVars.push_back(g.param(t));
  std::vector<Graph::Var> outs = forward_soft_graph(g, anchor, nuVars, g.constant(x));
  Graph::Var total = g.constant_scalar(0.0);
  for (Graph::Var o : outs) total = g.add(total, g.sum(g.square(o)));
  g.forward_backward(total);

  // Perturb within the simplex: +h on one entry, -h on another in the same row.
  const double h = 1e-6;
  for (int l = 0; l < 2; ++l)
    for (int j = 0; j < 2; ++j) {
      BranchSample up = nu, down = nu;
      up.rows[l].at(j, 0) += h;
      up.rows[l].at(j, 1) -= h;
      down.rows[l].at(j, 0) -= h;
      down.rows[l].at(j, 1) += h;
      double fd = (loss_of(up) - loss_of(down)) / (2.0 * h);
      const Tensor& grad = g.grad(nuVars[l]);
      double directional = grad.at(j, 0) - grad.at(j, 1);
      double denom = std::max({std::abs(fd), std::abs(directional), 1e-9});
      CHECK(std::abs(fd - directional) / denom <= 1e-6);
    }
}

TEST_CASE("cross-task edge list is empty iff the tree is the disjoint union of streams") {
  std::vector<std::vector<int>> branched = {{0, 1, 2}, {0, 1, 2}};
  CHECK(tree_from_parents(branched, 3).cross_task_edges.empty());
  std::vector<std::vector<int>> merged = {{0, 0, 2}, {0, 1, 2}};
  CHECK(!tree_from_parents(merged, 3).cross_task_edges.empty());
}

TEST_CASE("tree signature joins parent indices with dashes") {
  std::vector<std::vector<int>> parent = {{0, 1}, {1, 1}};
  TreeArchitecture tree = tree_from_parents(parent, 2);
  std::string sig = tree.signature();
  CHECK(sig.find('-') != std::string::npos);
  std::set<char> chars(sig.begin(), sig.end());
  CHECK(chars.count('0') == 1);
  CHECK(chars.count('1') == 1);
}

TEST_CASE("branch sample validation rejects rows off the simplex") {
  BranchSample nu(1, 2);
  nu.rows[0].at(0, 0) = 0.7;
  nu.rows[0].at(0, 1) = 0.7;
  nu.rows[0].at(1, 0) = 0.5;
  nu.rows[0].at(1, 1) = 0.5;
  CHECK_THROWS_AS(nu.validate(), std::invalid_argument);
}
