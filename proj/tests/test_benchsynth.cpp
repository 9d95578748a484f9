#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmtc/benchsynth.hpp"

using namespace dmtc;

namespace {

TaskSuiteSpec tiny_spec() {
  TaskSuiteSpec s;
  s.tasks = 3;
  s.input_dim = 6;
  s.target_dim = 3;
  s.train_samples = 64;
  s.val_samples = 16;
  s.test_samples = 16;
  s.cluster = {0, 0, 1};
  s.teacher_hidden = 8;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_CASE("generate: same seed reproduces the dataset exactly") {
  TaskSuiteSpec s = tiny_spec();
  TaskDataset a = generate(s);
  TaskDataset b = generate(s);
  CHECK(a.train_x.v == b.train_x.v);
  CHECK(a.test_x.v == b.test_x.v);
  for (int t = 0; t < s.tasks; ++t) {
    CHECK(a.train_y[t].v == b.train_y[t].v);
    CHECK(a.val_y[t].v == b.val_y[t].v);
    CHECK(a.test_y[t].v == b.test_y[t].v);
  }
}

TEST_CASE("generate: same-cluster tasks with zero noise and no rotation share targets") {
  TaskSuiteSpec s = tiny_spec();
  s.noise = 0.0;
  s.rotate_outputs = false;
  TaskDataset d = generate(s);
  CHECK(d.train_y[0].v == d.train_y[1].v);
  // the second cluster's task differs
  CHECK(d.train_y[0].v != d.train_y[2].v);
}

TEST_CASE("generate: rotations keep per-sample target norms for a shared teacher") {
  TaskSuiteSpec s = tiny_spec();
  s.noise = 0.0;
  TaskDataset d = generate(s);
  for (int r = 0; r < d.train_y[0].rows; ++r) {
    double n0 = 0.0, n1 = 0.0;
    for (int c = 0; c < d.train_y[0].cols; ++c) {
      n0 += d.train_y[0].at(r, c) * d.train_y[0].at(r, c);
      n1 += d.train_y[1].at(r, c) * d.train_y[1].at(r, c);
    }
    CHECK(std::sqrt(n0) == doctest::Approx(std::sqrt(n1)).epsilon(1e-9));
  }
}

TEST_CASE("generate: train/val/test inputs are disjoint") {
  TaskSuiteSpec s = tiny_spec();
  TaskDataset d = generate(s);
  CHECK(d.train_x.rows == s.train_samples);
  CHECK(d.val_x.rows == s.val_samples);
  CHECK(d.test_x.rows == s.test_samples);
  // independent split streams: no shared rows between splits
  auto row_equal = [&](const Tensor& a, int ra, const Tensor& b, int rb) {
    for (int c = 0; c < a.cols; ++c)
      if (a.at(ra, c) != b.at(rb, c)) return false;
    return true;
  };
  for (int i = 0; i < d.val_x.rows; ++i)
    for (int j = 0; j < d.test_x.rows; ++j) CHECK(!row_equal(d.val_x, i, d.test_x, j));
}

TEST_CASE("generate: different seeds give different data") {
  TaskSuiteSpec a = tiny_spec();
  TaskSuiteSpec b = tiny_spec();
  b.seed = 6;
  CHECK(generate(a).train_x.v != generate(b).train_x.v);
}

TEST_CASE("spec validation names bad extents") {
  TaskSuiteSpec s = tiny_spec();
  s.cluster = {0, 0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = tiny_spec();
  s.tasks = 1;
  s.cluster = {0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = tiny_spec();
  s.noise = -0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
