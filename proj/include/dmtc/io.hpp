#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dmtc/benchsynth.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/trainer.hpp"

namespace dmtc {

// Single JSON document driving the whole pipeline; echoed verbatim into
// every output directory.
struct RunConfig {
  TaskSuiteSpec suite;
  AnchorConfig anchor;
  TrainConfig train;
  int grid_draws = 20;
  std::vector<double> c_values = {0.0, 1.0};
  double hv_ref = 2.0;
  uint64_t seed = 17;
  std::string out_dir = "out";

  // Canonical serialized form; basis of the config hash.
  std::string canonical_json() const;
  uint64_t hash() const;
};

// Raised on malformed configuration; message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig parse_config_file(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);
void write_config_echo(const RunConfig& cfg, const std::filesystem::path& dir);

// Checkpoints: <name>.json metadata plus <name>.bin raw little-endian
// doubles. Loading validates the stored config hash.
void save_anchor(const AnchorNet& anchor, const RunConfig& cfg,
                 const std::filesystem::path& dir);
AnchorNet load_anchor(const std::filesystem::path& dir, uint64_t expect_hash);

void save_edge(const EdgeHypernet& edge, const RunConfig& cfg, const std::filesystem::path& dir);
EdgeHypernet load_edge(const std::filesystem::path& dir, uint64_t expect_hash);

void save_weight(const WeightHypernet& weight, const RunConfig& cfg,
                 const std::filesystem::path& dir);
WeightHypernet load_weight(const std::filesystem::path& dir, uint64_t expect_hash);

void save_affinity(const TaskAffinity& affinity, const RunConfig& cfg,
                   const std::filesystem::path& dir);
Tensor load_affinity(const std::filesystem::path& dir, uint64_t expect_hash);

TrainedBundle load_bundle(const std::filesystem::path& dir, const RunConfig& cfg);

// CSV / JSON reports.
void write_train_report(const TrainReport& report, int tasks, const std::filesystem::path& file);
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& file);
void write_sweep_summary(const SweepResult& result, const std::filesystem::path& file);
void write_affinity_csv(const Tensor& A, const std::filesystem::path& file);
void export_dataset(const TaskSuiteSpec& spec, const TaskDataset& data,
                    const std::filesystem::path& dir);

std::string format_double(double x);  // shortest round-trip formatting

}  // namespace dmtc
