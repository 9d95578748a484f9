#include "dmtc/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace dmtc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kCheckpointVersion = 1;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

template <typename T>
T get_field(const json& j, const std::string& field, T fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + field + "' has the wrong type");
  }
}

json suite_json(const TaskSuiteSpec& s) {
  return json{{"tasks", s.tasks},
              {"input_dim", s.input_dim},
              {"target_dim", s.target_dim},
              {"train_samples", s.train_samples},
              {"val_samples", s.val_samples},
              {"test_samples", s.test_samples},
              {"cluster", s.cluster},
              {"noise", s.noise},
              {"teacher_hidden", s.teacher_hidden},
              {"rotate_outputs", s.rotate_outputs}};
}

json anchor_json(const AnchorConfig& a) {
  return json{{"tasks", a.tasks},
              {"branch_layers", a.branch_layers},
              {"input_dim", a.input_dim},
              {"width", a.width},
              {"head_dim", a.head_dim}};
}

json train_json(const TrainConfig& t) {
  return json{{"anchor_steps", t.anchor_steps},
              {"edge_steps", t.edge_steps},
              {"weight_steps", t.weight_steps},
              {"batch", t.batch},
              {"lr", t.lr},
              {"lr_decay", t.lr_decay},
              {"milestones_frac", t.milestones_frac},
              {"eta", t.eta},
              {"tau", t.tau},
              {"lambda_active", t.lambda_active},
              {"lambda_inactive", t.lambda_inactive},
              {"task_weights", t.task_weights},
              {"zeta_init", t.zeta_init},
              {"zeta_decay", t.zeta_decay},
              {"zeta_interval", t.zeta_interval},
              {"affinity_probes", t.affinity_probes}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Named tensor blob writer/reader.
struct BlobWriter {
  json meta = json::array();
  std::string blob;

  void add(const std::string& name, const Tensor& t) {
    meta.push_back(json{{"name", name},
                        {"rows", t.rows},
                        {"cols", t.cols},
                        {"offset", blob.size() / sizeof(double)}});
    size_t old = blob.size();
    blob.resize(old + t.size() * sizeof(double));
    std::memcpy(blob.data() + old, t.v.data(), t.size() * sizeof(double));
  }

  void save(const fs::path& dir, const std::string& component, const RunConfig& cfg) {
    json j{{"component", component},
           {"format_version", kCheckpointVersion},
           {"config_hash", cfg.hash()},
           {"seed", cfg.seed},
           {"tensors", meta}};
    write_text(dir / (component + ".json"), j.dump(2) + "\n");
    write_text(dir / (component + ".bin"), blob);
  }
};

struct BlobReader {
  json meta;
  std::string blob;
  std::map<std::string, std::pair<size_t, std::pair<int, int>>> index;

  BlobReader(const fs::path& dir, const std::string& component, uint64_t expect_hash) {
    json j = json::parse(read_text(dir / (component + ".json")));
    if (j.at("component").get<std::string>() != component)
      throw std::runtime_error("checkpoint component tag mismatch");
    if (j.at("config_hash").get<uint64_t>() != expect_hash)
      throw ConfigError("checkpoint config hash mismatch for " + component);
    meta = j.at("tensors");
    blob = read_text(dir / (component + ".bin"));
    for (const auto& t : meta)
      index[t.at("name").get<std::string>()] = {
          t.at("offset").get<size_t>(),
          {t.at("rows").get<int>(), t.at("cols").get<int>()}};
  }

  Tensor get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("checkpoint tensor missing: " + name);
    auto [offset, shape] = it->second;
    Tensor t(shape.first, shape.second);
    std::memcpy(t.v.data(), blob.data() + offset * sizeof(double), t.size() * sizeof(double));
    return t;
  }
};

}  // namespace

std::string RunConfig::canonical_json() const {
  json j{{"suite", suite_json(suite)},
         {"anchor", anchor_json(anchor)},
         {"train", train_json(train)},
         {"eval", json{{"grid_draws", grid_draws}, {"c_values", c_values}, {"hv_ref", hv_ref}}},
         {"seed", seed}};
  return j.dump();
}

uint64_t RunConfig::hash() const { return fnv1a(canonical_json()); }

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  const json suite = j.value("suite", json::object());
  cfg.suite.tasks = get_field(suite, "tasks", cfg.suite.tasks);
  cfg.suite.input_dim = get_field(suite, "input_dim", cfg.suite.input_dim);
  cfg.suite.target_dim = get_field(suite, "target_dim", cfg.suite.target_dim);
  cfg.suite.train_samples = get_field(suite, "train_samples", cfg.suite.train_samples);
  cfg.suite.val_samples = get_field(suite, "val_samples", cfg.suite.val_samples);
  cfg.suite.test_samples = get_field(suite, "test_samples", cfg.suite.test_samples);
  cfg.suite.cluster = get_field(suite, "cluster", cfg.suite.cluster);
  cfg.suite.noise = get_field(suite, "noise", cfg.suite.noise);
  cfg.suite.teacher_hidden = get_field(suite, "teacher_hidden", cfg.suite.teacher_hidden);
  cfg.suite.rotate_outputs = get_field(suite, "rotate_outputs", cfg.suite.rotate_outputs);
  if (static_cast<int>(cfg.suite.cluster.size()) != cfg.suite.tasks)
    throw ConfigError("config field 'suite.cluster' must list one cluster id per task");

  const json anchor = j.value("anchor", json::object());
  cfg.anchor.tasks = cfg.suite.tasks;
  cfg.anchor.input_dim = cfg.suite.input_dim;
  cfg.anchor.head_dim = cfg.suite.target_dim;
  cfg.anchor.branch_layers = get_field(anchor, "branch_layers", cfg.anchor.branch_layers);
  cfg.anchor.width = get_field(anchor, "width", cfg.anchor.width);
  if (cfg.anchor.branch_layers < 1) throw ConfigError("config field 'anchor.branch_layers' must be >= 1");
  if (cfg.anchor.width < 1) throw ConfigError("config field 'anchor.width' must be >= 1");

  const json train = j.value("train", json::object());
  cfg.train.anchor_steps = get_field(train, "anchor_steps", cfg.train.anchor_steps);
  cfg.train.edge_steps = get_field(train, "edge_steps", cfg.train.edge_steps);
  cfg.train.weight_steps = get_field(train, "weight_steps", cfg.train.weight_steps);
  cfg.train.batch = get_field(train, "batch", cfg.train.batch);
  cfg.train.lr = get_field(train, "lr", cfg.train.lr);
  cfg.train.lr_decay = get_field(train, "lr_decay", cfg.train.lr_decay);
  cfg.train.milestones_frac = get_field(train, "milestones_frac", cfg.train.milestones_frac);
  cfg.train.eta = get_field(train, "eta", cfg.train.eta);
  cfg.train.tau = get_field(train, "tau", cfg.train.tau);
  cfg.train.lambda_active = get_field(train, "lambda_active", cfg.train.lambda_active);
  cfg.train.lambda_inactive = get_field(train, "lambda_inactive", cfg.train.lambda_inactive);
  cfg.train.task_weights = get_field(train, "task_weights", cfg.train.task_weights);
  cfg.train.zeta_init = get_field(train, "zeta_init", cfg.train.zeta_init);
  cfg.train.zeta_decay = get_field(train, "zeta_decay", cfg.train.zeta_decay);
  cfg.train.zeta_interval = get_field(train, "zeta_interval", cfg.train.zeta_interval);
  cfg.train.affinity_probes = get_field(train, "affinity_probes", cfg.train.affinity_probes);

  const json eval = j.value("eval", json::object());
  cfg.grid_draws = get_field(eval, "grid_draws", cfg.grid_draws);
  cfg.c_values = get_field(eval, "c_values", cfg.c_values);
  cfg.hv_ref = get_field(eval, "hv_ref", cfg.hv_ref);

  cfg.seed = get_field(j, "seed", cfg.seed);
  cfg.out_dir = get_field(j, "out_dir", cfg.out_dir);
  cfg.suite.seed = cfg.seed;
  cfg.train.seed = cfg.seed;

  try {
    cfg.suite.validate();
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig parse_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_config_text(read_text(path));
}

void write_config_echo(const RunConfig& cfg, const fs::path& dir) {
  json j = json::parse(cfg.canonical_json());
  j["out_dir"] = cfg.out_dir;
  write_text(dir / "config.json", j.dump(2) + "\n");
}

void save_anchor(const AnchorNet& anchor, const RunConfig& cfg, const fs::path& dir) {
  BlobWriter w;
  for (int l = 0; l < anchor.cfg.node_layers(); ++l)
    for (int i = 0; i < anchor.cfg.tasks; ++i) {
      const Block& b = anchor.blocks[l][i];
      std::string tag = std::to_string(l) + "." + std::to_string(i) + ".";
      w.add(tag + "W", b.W);
      w.add(tag + "b", b.b);
      w.add(tag + "gamma", b.norm.gamma);
      w.add(tag + "beta", b.norm.beta);
      w.add(tag + "mu", b.norm.mu);
      w.add(tag + "sigma", b.norm.sigma);
    }
  for (int i = 0; i < anchor.cfg.tasks; ++i) {
    w.add("head." + std::to_string(i) + ".W", anchor.head_W[i]);
    w.add("head." + std::to_string(i) + ".b", anchor.head_b[i]);
  }
  w.save(dir, "anchor", cfg);
}

AnchorNet load_anchor(const fs::path& dir, uint64_t expect_hash) {
  BlobReader r(dir, "anchor", expect_hash);
  // Anchor geometry is recoverable from the stored tensor shapes.
  AnchorConfig cfg;
  cfg.tasks = 0;
  while (r.index.contains("head." + std::to_string(cfg.tasks) + ".W")) ++cfg.tasks;
  cfg.branch_layers = -1;
  while (r.index.contains(std::to_string(cfg.branch_layers + 1) + ".0.W")) ++cfg.branch_layers;
  Tensor w00 = r.get("0.0.W");
  cfg.input_dim = w00.rows;
  cfg.width = w00.cols;
  cfg.head_dim = r.get("head.0.W").cols;

  AnchorNet a;
  a.cfg = cfg;
  a.blocks.resize(cfg.node_layers());
  for (int l = 0; l < cfg.node_layers(); ++l) {
    a.blocks[l].resize(cfg.tasks);
    for (int i = 0; i < cfg.tasks; ++i) {
      std::string tag = std::to_string(l) + "." + std::to_string(i) + ".";
      Block& b = a.blocks[l][i];
      b.W = r.get(tag + "W");
      b.b = r.get(tag + "b");
      b.norm.gamma = r.get(tag + "gamma");
      b.norm.beta = r.get(tag + "beta");
      b.norm.mu = r.get(tag + "mu");
      b.norm.sigma = r.get(tag + "sigma");
    }
  }
  for (int i = 0; i < cfg.tasks; ++i) {
    a.head_W.push_back(r.get("head." + std::to_string(i) + ".W"));
    a.head_b.push_back(r.get("head." + std::to_string(i) + ".b"));
  }
  return a;
}

namespace {

void save_store(const ParamStore& store, const std::string& component, const RunConfig& cfg,
                const fs::path& dir) {
  BlobWriter w;
  for (size_t p = 0; p < store.count(); ++p) w.add(store.names[p], store.values[p]);
  w.save(dir, component, cfg);
}

void load_store(ParamStore& store, const std::string& component, const fs::path& dir,
                uint64_t expect_hash) {
  BlobReader r(dir, component, expect_hash);
  for (size_t p = 0; p < store.count(); ++p) {
    Tensor t = r.get(store.names[p]);
    if (!t.same_shape(store.values[p]))
      throw std::runtime_error("checkpoint tensor shape mismatch: " + store.names[p]);
    store.values[p] = std::move(t);
  }
}

}  // namespace

void save_edge(const EdgeHypernet& edge, const RunConfig& cfg, const fs::path& dir) {
  save_store(edge.params, "edge", cfg, dir);
}

EdgeHypernet load_edge(const fs::path& dir, uint64_t expect_hash) {
  // Geometry comes from the config; Rng here only shapes the store layout.
  BlobReader probe(dir, "edge", expect_hash);
  Tensor e_task = probe.get("e_task");
  int tasks = e_task.rows;
  int layers = 0;
  while (probe.index.contains("head_w" + std::to_string(layers))) ++layers;
  EdgeHypernet edge = EdgeHypernet::init(tasks, layers, Rng(0));
  load_store(edge.params, "edge", dir, expect_hash);
  return edge;
}

void save_weight(const WeightHypernet& weight, const RunConfig& cfg, const fs::path& dir) {
  save_store(weight.params, "weight", cfg, dir);
}

WeightHypernet load_weight(const fs::path& dir, uint64_t expect_hash) {
  BlobReader probe(dir, "weight", expect_hash);
  AnchorConfig cfg;
  cfg.tasks = probe.get("e_task").rows;
  cfg.width = probe.get("head_b0_0").cols / 2;
  cfg.branch_layers = -1;
  while (probe.index.contains("head_w" + std::to_string(cfg.branch_layers + 1) + "_0"))
    ++cfg.branch_layers;
  WeightHypernet weight = WeightHypernet::init(cfg, Rng(0));
  load_store(weight.params, "weight", dir, expect_hash);
  return weight;
}

void save_affinity(const TaskAffinity& affinity, const RunConfig& cfg, const fs::path& dir) {
  BlobWriter w;
  w.add("A", affinity.A);
  Tensor k = Tensor::scalar(static_cast<double>(affinity.sample_count));
  w.add("K", k);
  w.save(dir, "affinity", cfg);
}

Tensor load_affinity(const fs::path& dir, uint64_t expect_hash) {
  BlobReader r(dir, "affinity", expect_hash);
  return r.get("A");
}

TrainedBundle load_bundle(const fs::path& dir, const RunConfig& cfg) {
  TrainedBundle b;
  uint64_t h = cfg.hash();
  b.anchor = load_anchor(dir, h);
  b.affinity.A = load_affinity(dir, h);
  b.edge = load_edge(dir, h);
  b.weight = load_weight(dir, h);
  return b;
}

std::string format_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

void write_train_report(const TrainReport& report, int tasks, const fs::path& file) {
  std::string out = "step,task_loss,active,inactive,omega,zeta,c";
  for (int i = 1; i <= tasks; ++i) out += ",r_" + std::to_string(i);
  out += "\n";
  for (const StepRecord& rec : report.rows) {
    out += std::to_string(rec.step) + "," + format_double(rec.task_loss) + "," +
           format_double(rec.active) + "," + format_double(rec.inactive) + "," +
           format_double(rec.omega) + "," + format_double(rec.zeta) + "," +
           format_double(rec.c);
    for (double r : rec.r) out += "," + format_double(r);
    out += "\n";
  }
  write_text(file, out);
}

void write_sweep_csv(const SweepResult& result, const fs::path& file) {
  if (result.rows.empty()) throw std::invalid_argument("sweep: no rows to write");
  const int tasks = static_cast<int>(result.rows[0].pref.r.size());
  std::string out;
  for (int i = 1; i <= tasks; ++i) out += "pref_" + std::to_string(i) + ",";
  out += "c,resource_ratio";
  for (int i = 1; i <= tasks; ++i) out += ",loss_" + std::to_string(i);
  out += ",tree_signature\n";
  for (const SweepRow& row : result.rows) {
    for (double r : row.pref.r) out += format_double(r) + ",";
    out += format_double(row.pref.c) + "," + format_double(row.resource_ratio);
    for (double l : row.losses) out += "," + format_double(l);
    out += "," + row.tree_signature + "\n";
  }
  write_text(file, out);
}

void write_sweep_summary(const SweepResult& result, const fs::path& file) {
  json j{{"hv", result.hv},
         {"mean_uniformity", result.mean_uniformity},
         {"mean_ratio", result.mean_ratio}};
  write_text(file, j.dump(2) + "\n");
}

void write_affinity_csv(const Tensor& A, const fs::path& file) {
  std::string out;
  for (int i = 1; i <= A.cols; ++i) out += (i > 1 ? "," : "") + ("task_" + std::to_string(i));
  out += "\n";
  for (int r = 0; r < A.rows; ++r) {
    for (int c = 0; c < A.cols; ++c) out += (c > 0 ? "," : "") + format_double(A.at(r, c));
    out += "\n";
  }
  write_text(file, out);
}

void export_dataset(const TaskSuiteSpec& spec, const TaskDataset& data, const fs::path& dir) {
  json meta{{"suite", suite_json(spec)}, {"seed", spec.seed}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  auto write_matrix = [&](const Tensor& t, const fs::path& file) {
    std::string out;
    for (int r = 0; r < t.rows; ++r) {
      for (int c = 0; c < t.cols; ++c) out += (c > 0 ? "," : "") + format_double(t.at(r, c));
      out += "\n";
    }
    write_text(file, out);
  };
  write_matrix(data.train_x, dir / "inputs.csv");
  for (int k = 0; k < spec.tasks; ++k)
    write_matrix(data.train_y[k], dir / ("targets_task" + std::to_string(k) + ".csv"));
}

}  // namespace dmtc
