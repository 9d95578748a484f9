#include "dmtc/benchsynth.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtc {

namespace {

struct Teacher {
  Tensor W1, b1, W2;  // input -> hidden (tanh) -> target
};

// All clusters read the same first-layer features; clusters differ only in
// the linear readout. This grades relatedness: same-cluster tasks share the
// whole teacher, different clusters still share its representation.
Teacher make_teacher(int input_dim, int hidden, int target_dim, Rng shared_rng, Rng rng) {
  Teacher t;
  t.W1 = Tensor(input_dim, hidden);
  double s1 = std::sqrt(1.0 / input_dim);
  for (double& e : t.W1.v) e = s1 * shared_rng.gaussian();
  t.b1 = Tensor(1, hidden);
  for (double& e : t.b1.v) e = 0.1 * shared_rng.gaussian();
  // The readout scale puts per-task mean squared errors on the same order as
  // the branching regularizer, so the cost preference c trades off against a
  // task-loss penalty of comparable size.
  t.W2 = Tensor(hidden, target_dim);
  double s2 = 5.0 * std::sqrt(1.0 / hidden);
  for (double& e : t.W2.v) e = s2 * rng.gaussian();
  return t;
}

Tensor teacher_apply(const Teacher& t, const Tensor& x) {
  Tensor h(x.rows, t.W1.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < t.W1.cols; ++c) {
      double s = t.b1.at(0, c);
      for (int k = 0; k < x.cols; ++k) s += x.at(r, k) * t.W1.at(k, c);
      h.at(r, c) = std::tanh(s);
    }
  Tensor y(x.rows, t.W2.cols);
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < t.W2.cols; ++c) {
      double s = 0.0;
      for (int k = 0; k < h.cols; ++k) s += h.at(r, k) * t.W2.at(k, c);
      y.at(r, c) = s;
    }
  return y;
}

// Random orthonormal matrix via Gram-Schmidt on a Gaussian draw.
Tensor random_rotation(int n, Rng rng) {
  Tensor q(n, n);
  for (double& e : q.v) e = rng.gaussian();
  for (int c = 0; c < n; ++c) {
    for (int prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (int r = 0; r < n; ++r) dot += q.at(r, c) * q.at(r, prev);
      for (int r = 0; r < n; ++r) q.at(r, c) -= dot * q.at(r, prev);
    }
    double norm = 0.0;
    for (int r = 0; r < n; ++r) norm += q.at(r, c) * q.at(r, c);
    norm = std::sqrt(norm);
    for (int r = 0; r < n; ++r) q.at(r, c) /= norm;
  }
  return q;
}

Tensor gaussian_matrix(int r, int c, Rng& rng) {
  Tensor t(r, c);
  for (double& e : t.v) e = rng.gaussian();
  return t;
}

}  // namespace

void TaskSuiteSpec::validate() const {
  if (tasks < 2) throw std::invalid_argument("suite: need at least 2 tasks");
  if (static_cast<int>(cluster.size()) != tasks)
    throw std::invalid_argument("suite: cluster assignment size mismatch");
  if (input_dim <= 0 || target_dim <= 0 || train_samples <= 0 || val_samples <= 0 ||
      test_samples <= 0 || teacher_hidden <= 0)
    throw std::invalid_argument("suite: extents must be positive");
  if (noise < 0.0) throw std::invalid_argument("suite: negative noise level");
}

TaskDataset generate(const TaskSuiteSpec& spec) {
  spec.validate();
  Rng root(spec.seed);

  int clusters = 0;
  for (int c : spec.cluster) clusters = std::max(clusters, c + 1);
  std::vector<Teacher> teachers;
  teachers.reserve(clusters);
  for (int c = 0; c < clusters; ++c)
    teachers.push_back(make_teacher(spec.input_dim, spec.teacher_hidden, spec.target_dim,
                                    root.split("teacher").split("shared"),
                                    root.split("teacher").split(static_cast<uint64_t>(c))));
  std::vector<Tensor> rotations(spec.tasks);
  for (int t = 0; t < spec.tasks; ++t)
    rotations[t] = spec.rotate_outputs
                       ? random_rotation(spec.target_dim,
                                         root.split("rotation").split(static_cast<uint64_t>(t)))
                       : Tensor();

  TaskDataset ds;
  auto make_split = [&](int n, const char* label) {
    Rng rng = root.split(label);
    Tensor x = gaussian_matrix(n, spec.input_dim, rng);
    std::vector<Tensor> ys(spec.tasks);
    for (int t = 0; t < spec.tasks; ++t) {
      Tensor base = teacher_apply(teachers[spec.cluster[t]], x);
      Tensor y = base;
      if (spec.rotate_outputs) {
        y = Tensor(base.rows, base.cols);
        for (int r = 0; r < base.rows; ++r)
          for (int c = 0; c < base.cols; ++c) {
            double s = 0.0;
            for (int k = 0; k < base.cols; ++k) s += base.at(r, k) * rotations[t].at(k, c);
            y.at(r, c) = s;
          }
      }
      if (spec.noise > 0.0) {
        Rng nrng = root.split(label).split("noise").split(static_cast<uint64_t>(t));
        for (double& e : y.v) e += spec.noise * nrng.gaussian();
      }
      ys[t] = std::move(y);
    }
    return std::pair<Tensor, std::vector<Tensor>>{std::move(x), std::move(ys)};
  };

  auto [tx, ty] = make_split(spec.train_samples, "split_train");
  ds.train_x = std::move(tx);
  ds.train_y = std::move(ty);
  auto [vx, vy] = make_split(spec.val_samples, "split_val");
  ds.val_x = std::move(vx);
  ds.val_y = std::move(vy);
  auto [sx, sy] = make_split(spec.test_samples, "split_test");
  ds.test_x = std::move(sx);
  ds.test_y = std::move(sy);
  return ds;
}

}  // namespace dmtc
