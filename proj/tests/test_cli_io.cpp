#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "dmtc/io.hpp"

using namespace dmtc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dmtc_test_" + std::to_string(std::hash<void*>{}(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny_config() {
  return parse_config_text(R"({
    "suite": {"tasks": 2, "input_dim": 5, "target_dim": 2, "train_samples": 64,
              "val_samples": 16, "test_samples": 16, "cluster": [0, 1],
              "teacher_hidden": 6},
    "anchor": {"branch_layers": 2, "width": 6},
    "train": {"anchor_steps": 10, "edge_steps": 10, "weight_steps": 10, "batch": 4,
              "affinity_probes": 4},
    "seed": 3
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config: defaults fill unspecified fields and geometry is derived") {
  RunConfig cfg = tiny_config();
  CHECK(cfg.anchor.tasks == 2);
  CHECK(cfg.anchor.input_dim == 5);
  CHECK(cfg.anchor.head_dim == 2);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.suite.seed == 3);
  CHECK(cfg.train.seed == 3);
}

TEST_CASE("config: wrong field type names the field") {
  try {
    (void)parse_config_text(R"({"suite": {"tasks": "three", "cluster": [0,0,0]}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tasks") != std::string::npos);
  }
}

TEST_CASE("config: cluster/task mismatch names the field") {
  try {
    (void)parse_config_text(R"({"suite": {"tasks": 3, "cluster": [0, 1]}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cluster") != std::string::npos);
  }
}

TEST_CASE("config: invalid JSON rejected") {
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("config: hash is stable and sensitive to content") {
  RunConfig a = tiny_config();
  RunConfig b = tiny_config();
  CHECK(a.hash() == b.hash());
  b.seed = 4;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("checkpoints: anchor round-trip is bit exact") {
  TempDir dir;
  RunConfig cfg = tiny_config();
  AnchorNet anchor = AnchorNet::init(cfg.anchor, Rng(8));
  save_anchor(anchor, cfg, dir.path);
  AnchorNet loaded = load_anchor(dir.path, cfg.hash());
  CHECK(loaded.cfg.tasks == cfg.anchor.tasks);
  CHECK(loaded.cfg.branch_layers == cfg.anchor.branch_layers);
  CHECK(loaded.cfg.input_dim == cfg.anchor.input_dim);
  for (int l = 0; l < cfg.anchor.node_layers(); ++l)
    for (int i = 0; i < cfg.anchor.tasks; ++i) {
      CHECK(loaded.blocks[l][i].W.v == anchor.blocks[l][i].W.v);
      CHECK(loaded.blocks[l][i].norm.sigma.v == anchor.blocks[l][i].norm.sigma.v);
    }
  for (int i = 0; i < cfg.anchor.tasks; ++i) CHECK(loaded.head_W[i].v == anchor.head_W[i].v);
}

TEST_CASE("checkpoints: hypernets round-trip and forward identically") {
  TempDir dir;
  RunConfig cfg = tiny_config();
  EdgeHypernet edge = EdgeHypernet::init(cfg.anchor.tasks, cfg.anchor.branch_layers, Rng(9));
  WeightHypernet weight = WeightHypernet::init(cfg.anchor, Rng(10));
  save_edge(edge, cfg, dir.path);
  save_weight(weight, cfg, dir.path);
  EdgeHypernet eload = load_edge(dir.path, cfg.hash());
  WeightHypernet wload = load_weight(dir.path, cfg.hash());

  Preference pref;
  pref.r = {0.3, 0.7};
  pref.c = 0.4;
  BranchingLogits a1 = edge.forward(pref);
  BranchingLogits a2 = eload.forward(pref);
  for (int l = 0; l < a1.layers; ++l) CHECK(a1.rows[l].v == a2.rows[l].v);
  NormDeltas d1 = weight.forward(pref);
  NormDeltas d2 = wload.forward(pref);
  for (size_t l = 0; l < d1.dgamma.size(); ++l)
    for (size_t i = 0; i < d1.dgamma[l].size(); ++i) {
      CHECK(d1.dgamma[l][i].v == d2.dgamma[l][i].v);
      CHECK(d1.dbeta[l][i].v == d2.dbeta[l][i].v);
    }
}

TEST_CASE("checkpoints: config hash mismatch is rejected") {
  TempDir dir;
  RunConfig cfg = tiny_config();
  AnchorNet anchor = AnchorNet::init(cfg.anchor, Rng(8));
  save_anchor(anchor, cfg, dir.path);
  CHECK_THROWS_AS(load_anchor(dir.path, cfg.hash() + 1), ConfigError);
}

TEST_CASE("checkpoints: saving twice produces byte-identical files") {
  TempDir a, b;
  RunConfig cfg = tiny_config();
  AnchorNet anchor = AnchorNet::init(cfg.anchor, Rng(8));
  save_anchor(anchor, cfg, a.path);
  save_anchor(anchor, cfg, b.path);
  CHECK(slurp(a.path / "anchor.bin") == slurp(b.path / "anchor.bin"));
  CHECK(slurp(a.path / "anchor.json") == slurp(b.path / "anchor.json"));
}

TEST_CASE("format_double: shortest round-trip representation") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}

TEST_CASE("sweep CSV: header schema matches the contract") {
  TempDir dir;
  SweepResult result;
  SweepRow row;
  row.pref.r = {0.5, 0.5};
  row.pref.c = 0.0;
  row.resource_ratio = 1.0;
  row.losses = {0.1, 0.2};
  row.tree_signature = "0-1";
  result.rows.push_back(row);
  write_sweep_csv(result, dir.path / "sweep.csv");
  std::string text = slurp(dir.path / "sweep.csv");
  CHECK(text.rfind("pref_1,pref_2,c,resource_ratio,loss_1,loss_2,tree_signature\n", 0) == 0);
}

TEST_CASE("train report CSV: header schema matches the contract") {
  TempDir dir;
  TrainReport report;
  StepRecord rec;
  rec.step = 0;
  rec.r = {0.5, 0.5};
  report.rows.push_back(rec);
  write_train_report(report, 2, dir.path / "report.csv");
  std::string text = slurp(dir.path / "report.csv");
  CHECK(text.rfind("step,task_loss,active,inactive,omega,zeta,c,r_1,r_2\n", 0) == 0);
}

TEST_CASE("dataset export: writes meta and per-task target files") {
  TempDir dir;
  RunConfig cfg = tiny_config();
  TaskDataset data = generate(cfg.suite);
  export_dataset(cfg.suite, data, dir.path);
  CHECK(fs::exists(dir.path / "meta.json"));
  CHECK(fs::exists(dir.path / "inputs.csv"));
  CHECK(fs::exists(dir.path / "targets_task0.csv"));
  CHECK(fs::exists(dir.path / "targets_task1.csv"));
}

TEST_CASE("config echo: written file parses back to the same hash") {
  TempDir dir;
  RunConfig cfg = tiny_config();
  write_config_echo(cfg, dir.path);
  RunConfig back = parse_config_file(dir.path / "config.json");
  CHECK(back.hash() == cfg.hash());
}
