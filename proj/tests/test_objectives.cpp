#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dmtc/objectives.hpp"

using namespace dmtc;

namespace {

BranchSample uniform_rows(int L, int N) {
  BranchSample nu(L, N);
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) nu.rows[l].at(j, i) = 1.0 / N;
  return nu;
}

Tensor ones(int r, int c) {
  Tensor t(r, c);
  for (double& e : t.v) e = 1.0;
  return t;
}

}  // namespace

TEST_CASE("task_loss: one-hot preference selects a single weighted loss") {
  Preference p = Preference::one_hot(3, 2);
  CHECK(task_loss(p, {1.0, 2.0, 5.0}, {0.4, 0.9, 0.3}) ==
        doctest::Approx(5.0 * 0.3).epsilon(1e-15));
}

TEST_CASE("task_loss: uniform preference with unit weights is the mean loss") {
  Preference p = Preference::uniform(4);
  CHECK(task_loss(p, {1, 1, 1, 1}, {1.0, 2.0, 3.0, 4.0}) ==
        doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("task_loss: hand case r=(0.5,0.3,0.2), w=(1,2,5), L=(1,1,1) is 2.1") {
  Preference p;
  p.r = {0.5, 0.3, 0.2};
  CHECK(task_loss(p, {1.0, 2.0, 5.0}, {1.0, 1.0, 1.0}) == doctest::Approx(2.1).epsilon(1e-15));
}

TEST_CASE("task_loss: negative losses rejected") {
  Preference p = Preference::uniform(2);
  CHECK_THROWS_AS(task_loss(p, {1.0, 1.0}, {-0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("dichotomize: threshold splits active and inactive") {
  Preference p;
  p.r = {0.9, 0.05, 0.05};
  TaskDichotomy d = dichotomize(p, 0.2);
  CHECK(d.active == std::vector<int>{0});
  CHECK(d.inactive == std::vector<int>{1, 2});
}

TEST_CASE("dichotomize: uniform preference at the default tau is all-active") {
  Preference p = Preference::uniform(3);
  TaskDichotomy d = dichotomize(p, 0.6 / 3);
  CHECK(d.active.size() == 3);
  CHECK(d.inactive.empty());
}

TEST_CASE("dichotomize: boundary r_i = tau goes to the active side") {
  Preference p;
  p.r = {0.25, 0.75};
  TaskDichotomy d = dichotomize(p, 0.25);
  CHECK(d.active == std::vector<int>{0, 1});
}

TEST_CASE("gumbel_softmax: rows sum to 1 and temperature must be positive") {
  BranchingLogits alpha(2, 3);
  Rng rng(1);
  for (Tensor& t : alpha.rows)
    for (double& e : t.v) e = rng.gaussian();
  Rng draw(2);
  BranchSample nu = gumbel_softmax(alpha, 1.3, draw);
  for (const Tensor& t : nu.rows)
    for (int j = 0; j < 3; ++j) {
      double s = t.at(j, 0) + t.at(j, 1) + t.at(j, 2);
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  CHECK_THROWS_AS(gumbel_softmax(alpha, 0.0, draw), std::invalid_argument);
}

TEST_CASE("gumbel_softmax: uniform logits give mean 1/N per slot") {
  BranchingLogits alpha(1, 3);
  Rng rng(5);
  Tensor mean(3, 3);
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    BranchSample nu = gumbel_softmax(alpha, 1.0, rng);
    for (size_t k = 0; k < mean.size(); ++k) mean.v[k] += nu.rows[0].v[k] / n;
  }
  for (double e : mean.v) CHECK(std::abs(e - 1.0 / 3.0) <= 0.01);
}

TEST_CASE("gumbel_softmax: argmax frequencies follow softmax of the logits") {
  BranchingLogits alpha(1, 3);
  alpha.at(0, 0, 0) = 1.0;
  alpha.at(0, 0, 1) = 0.0;
  alpha.at(0, 0, 2) = -1.0;
  double z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  std::vector<double> want = {std::exp(1.0) / z, 1.0 / z, std::exp(-1.0) / z};
  Rng rng(6);
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    BranchSample nu = gumbel_softmax(alpha, 0.5, rng);
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (nu.rows[0].at(0, i) > nu.rows[0].at(0, best)) best = i;
    ++counts[best];
  }
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(static_cast<double>(counts[i]) / n - want[i]) <= 0.01);
}

TEST_CASE("gumbel_softmax: gradient in the logits matches finite differences at fixed noise") {
  const int N = 3;
  Rng rng(9);
  Tensor logits(N, N);
  for (double& e : logits.v) e = rng.gaussian();
  std::vector<Tensor> noise = draw_gumbel_noise(rng, 1, N);
  const double zeta = 0.8;

  auto loss_plain = [&](const Tensor& a) {
    double total = 0.0;
    for (int j = 0; j < N; ++j) {
      double mx = -1e300;
      std::vector<double> z(N);
      for (int i = 0; i < N; ++i) {
        z[i] = (a.at(j, i) + noise[0].at(j, i)) / zeta;
        mx = std::max(mx, z[i]);
      }
      double sum = 0.0;
      for (int i = 0; i < N; ++i) {
        z[i] = std::exp(z[i] - mx);
        sum += z[i];
      }
      for (int i = 0; i < N; ++i) {
        double v = z[i] / sum;
        total += v * v * (1.0 + i + j);
      }
    }
    return total;
  };

  Graph g;
  Graph::Var a = g.param(logits);
  std::vector<Graph::Var> nu = gumbel_softmax_graph(g, {a}, noise, zeta);
  Tensor coeff(N, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) coeff.at(j, i) = 1.0 + i + j;
  Graph::Var total = g.sum(g.mul(g.square(nu[0]), g.constant(coeff)));
  g.forward_backward(total);

  const double h = 1e-6;
  for (size_t k = 0; k < logits.size(); ++k) {
    Tensor up = logits, down = logits;
    up.v[k] += h;
    down.v[k] -= h;
    double fd = (loss_plain(up) - loss_plain(down)) / (2.0 * h);
    double got = g.grad(a).v[k];
    double denom = std::max({std::abs(fd), std::abs(got), 1e-9});
    CHECK(std::abs(fd - got) / denom <= 1e-6);
  }
}

TEST_CASE("active_loss: identical active rows give zero") {
  BranchSample nu = uniform_rows(2, 3);
  TaskDichotomy d;
  d.active = {0, 1, 2};
  Tensor p = compute_p_use(nu);
  CHECK(active_loss(nu, d, ones(3, 3), p) == 0.0);
}

TEST_CASE("active_loss: a single active task gives zero") {
  Rng rng(3);
  BranchSample nu(2, 3);
  for (Tensor& t : nu.rows)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int i = 0; i < 3; ++i) s += (t.at(j, i) = rng.uniform());
      for (int i = 0; i < 3; ++i) t.at(j, i) /= s;
    }
  TaskDichotomy d;
  d.active = {1};
  d.inactive = {0, 2};
  CHECK(active_loss(nu, d, ones(3, 3), compute_p_use(nu)) == 0.0);
}

TEST_CASE("active_loss: hand case equals 2.0") {
  // L=2, two active tasks, opposing one-hot rows at the first branching
  // layer, equal rows at the second; all usage probabilities forced to 1.
  BranchSample nu(2, 2);
  nu.rows[0].at(0, 0) = 1.0;
  nu.rows[0].at(0, 1) = 0.0;
  nu.rows[0].at(1, 0) = 0.0;
  nu.rows[0].at(1, 1) = 1.0;
  nu.rows[1].at(0, 0) = 0.5;
  nu.rows[1].at(0, 1) = 0.5;
  nu.rows[1].at(1, 0) = 0.5;
  nu.rows[1].at(1, 1) = 0.5;
  TaskDichotomy d;
  d.active = {0, 1};
  CHECK(active_loss(nu, d, ones(2, 2), ones(3, 2)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("active_loss: the top branching layer contributes nothing") {
  // Only the last (weight-zero) layer differs between the active rows.
  BranchSample nu(1, 2);
  nu.rows[0].at(0, 0) = 1.0;
  nu.rows[0].at(0, 1) = 0.0;
  nu.rows[0].at(1, 0) = 0.0;
  nu.rows[0].at(1, 1) = 1.0;
  TaskDichotomy d;
  d.active = {0, 1};
  CHECK(active_loss(nu, d, ones(2, 2), compute_p_use(nu)) == 0.0);
}

TEST_CASE("active_loss: invariant to the inactive tasks' rows") {
  Rng rng(4);
  BranchSample nu(2, 3);
  for (Tensor& t : nu.rows)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int i = 0; i < 3; ++i) s += (t.at(j, i) = rng.uniform());
      for (int i = 0; i < 3; ++i) t.at(j, i) /= s;
    }
  TaskDichotomy d;
  d.active = {0, 1};
  d.inactive = {2};
  Tensor p = compute_p_use(nu);
  double before = active_loss(nu, d, ones(3, 3), p);
  for (Tensor& t : nu.rows) {
    t.at(2, 0) = 1.0;
    t.at(2, 1) = 0.0;
    t.at(2, 2) = 0.0;
  }
  CHECK(active_loss(nu, d, ones(3, 3), p) == before);
}

TEST_CASE("inactive_loss: inactive rows equal to active rows give zero") {
  BranchSample nu = uniform_rows(2, 3);
  TaskDichotomy d;
  d.active = {0};
  d.inactive = {1, 2};
  CHECK(inactive_loss(nu, d) == 0.0);
}

TEST_CASE("inactive_loss: empty inactive set gives zero") {
  BranchSample nu = uniform_rows(1, 2);
  TaskDichotomy d;
  d.active = {0, 1};
  CHECK(inactive_loss(nu, d) == 0.0);
}

TEST_CASE("inactive_loss: hand case equals 0.5") {
  BranchSample nu(1, 2);
  nu.rows[0].at(0, 0) = 1.0;  // active row (1,0)
  nu.rows[0].at(0, 1) = 0.0;
  nu.rows[0].at(1, 0) = 0.5;  // inactive row (0.5,0.5)
  nu.rows[0].at(1, 1) = 0.5;
  TaskDichotomy d;
  d.active = {0};
  d.inactive = {1};
  CHECK(inactive_loss(nu, d) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("inactive_loss: empty active set degrades to zero with a warning") {
  BranchSample nu = uniform_rows(1, 2);
  TaskDichotomy d;
  d.inactive = {0, 1};
  CHECK(inactive_loss(nu, d) == 0.0);
}

TEST_CASE("regularizer: c=0 leaves only the inactive term, and the form is affine in c") {
  Rng rng(8);
  BranchSample nu(2, 3);
  for (Tensor& t : nu.rows)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int i = 0; i < 3; ++i) s += (t.at(j, i) = rng.uniform());
      for (int i = 0; i < 3; ++i) t.at(j, i) /= s;
    }
  Preference p;
  p.r = {0.6, 0.3, 0.1};
  TaskDichotomy d = dichotomize(p, 0.2);
  LossWeights w;
  w.w = {1, 1, 1};

  p.c = 0.0;
  double at0 = regularizer(p, d, nu, ones(3, 3), w);
  CHECK(at0 == doctest::Approx(w.lambda_inactive * inactive_loss(nu, d)).epsilon(1e-15));

  Tensor pu = compute_p_use(nu);
  double act = active_loss(nu, d, ones(3, 3), pu);
  for (double c : {0.25, 0.5, 1.0}) {
    p.c = c;
    CHECK(regularizer(p, d, nu, ones(3, 3), w) - at0 ==
          doctest::Approx(c * w.lambda_active * act).epsilon(1e-12));
  }
}

TEST_CASE("graph losses agree with their plain counterparts") {
  Rng rng(12);
  const int L = 2, N = 3;
  BranchSample nu(L, N);
  for (Tensor& t : nu.rows)
    for (int j = 0; j < N; ++j) {
      double s = 0;
      for (int i = 0; i < N; ++i) s += (t.at(j, i) = rng.uniform());
      for (int i = 0; i < N; ++i) t.at(j, i) /= s;
    }
  TaskDichotomy d;
  d.active = {0, 2};
  d.inactive = {1};
  Tensor aff = ones(N, N);
  aff.at(0, 2) = 0.4;
  aff.at(2, 0) = 0.4;

  Graph g;
  std::vector<Graph::Var> nuVars;
  for (const Tensor& t : nu.rows) nuVars.push_back(g.constant(t));
  std::vector<Graph::Var> pu = compute_p_use_graph(g, nuVars, N);
  double act_g = g.scalar(active_loss_graph(g, nuVars, d, aff, pu, N));
  double ina_g = g.scalar(inactive_loss_graph(g, nuVars, d, N));

  Tensor pu_plain = compute_p_use(nu);
  CHECK(act_g == doctest::Approx(active_loss(nu, d, aff, pu_plain)).epsilon(1e-12));
  CHECK(ina_g == doctest::Approx(inactive_loss(nu, d)).epsilon(1e-12));
}

TEST_CASE("rsa_affinity: identical streams yield affinity 1 everywhere") {
  AnchorConfig cfg;
  cfg.tasks = 2;
  cfg.branch_layers = 2;
  cfg.input_dim = 4;
  cfg.width = 5;
  cfg.head_dim = 2;
  AnchorNet anchor = AnchorNet::init(cfg, Rng(20));
  for (auto& layer : anchor.blocks) layer[1] = layer[0];
  Rng rng(21);
  Tensor probes(6, cfg.input_dim);
  for (double& e : probes.v) e = rng.gaussian();
  TaskAffinity aff = rsa_affinity(anchor, probes);
  for (double e : aff.A.v) CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rsa_affinity: unit diagonal and symmetric raw distances") {
  AnchorConfig cfg;
  cfg.tasks = 3;
  cfg.branch_layers = 2;
  cfg.input_dim = 4;
  cfg.width = 5;
  cfg.head_dim = 2;
  AnchorNet anchor = AnchorNet::init(cfg, Rng(22));
  Rng rng(23);
  Tensor probes(8, cfg.input_dim);
  for (double& e : probes.v) e = rng.gaussian();
  TaskAffinity aff = rsa_affinity(anchor, probes);
  for (int i = 0; i < 3; ++i) CHECK(aff.A.at(i, i) == 1.0);
  for (const Tensor& D : aff.D)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(D.at(i, j) == doctest::Approx(D.at(j, i)).epsilon(1e-12));
  for (double e : aff.A.v) {
    CHECK(e >= 0.0);
    CHECK(e <= 1.0 + 1e-12);
  }
}

TEST_CASE("mse: matches the hand formula and the graph version") {
  Tensor a(2, 2), b(2, 2);
  a.v = {1, 2, 3, 4};
  b.v = {1, 1, 5, 4};
  CHECK(mse(a, b) == doctest::Approx((0 + 1 + 4 + 0) / 4.0).epsilon(1e-15));
  Graph g;
  CHECK(g.scalar(mse_graph(g, g.constant(a), b)) == doctest::Approx(1.25).epsilon(1e-15));
}
