#pragma once

#include <cstdint>
#include <vector>

#include "dmtc/rng.hpp"
#include "dmtc/tensor.hpp"

namespace dmtc {

// Multi-task regression suite with controllable relatedness: tasks in the
// same cluster share a latent teacher and differ only by an output rotation
// and noise.
struct TaskSuiteSpec {
  int tasks = 3;
  int input_dim = 16;
  int target_dim = 4;
  int train_samples = 4096;
  int val_samples = 512;
  int test_samples = 512;
  std::vector<int> cluster = {0, 0, 1};  // per-task cluster id
  double noise = 0.05;
  int teacher_hidden = 32;
  bool rotate_outputs = true;
  uint64_t seed = 0;

  void validate() const;
};

struct TaskDataset {
  Tensor train_x, val_x, test_x;
  std::vector<Tensor> train_y, val_y, test_y;  // per task
};

TaskDataset generate(const TaskSuiteSpec& spec);

}  // namespace dmtc
