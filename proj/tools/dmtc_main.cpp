#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmtc/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dmtc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<double> parse_csv_floats(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t pos = 0;
    out.push_back(std::stod(item, &pos));
    if (pos != item.size()) throw ConfigError("cannot parse float list entry '" + item + "'");
  }
  if (out.empty()) throw ConfigError("empty float list");
  return out;
}

Preference make_preference(std::vector<double> r, double c) {
  if (c < 0.0 || c > 1.0) throw ConfigError("--c must lie in [0,1]");
  double sum = 0.0;
  for (double x : r) {
    if (x < 0.0) throw ConfigError("--r entries must be nonnegative");
    sum += x;
  }
  if (sum <= 0.0) throw ConfigError("--r must have positive mass");
  if (std::abs(sum - 1.0) > 1e-6) {
    std::cerr << "warning: preference sums to " << sum << "; normalizing\n";
    for (double& x : r) x /= sum;
  } else if (sum != 1.0) {
    for (double& x : r) x /= sum;
  }
  Preference p;
  p.r = std::move(r);
  p.c = c;
  return p;
}

RunConfig load_run_config(const std::string& config_path, const std::string& out_override,
                          uint64_t seed_override, bool has_seed) {
  RunConfig cfg = parse_config_file(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (has_seed) {
    cfg.seed = seed_override;
    cfg.suite.seed = seed_override;
    cfg.train.seed = seed_override;
  }
  return cfg;
}

int cmd_train(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_config_echo(cfg, cfg.out_dir);
  TaskDataset data = generate(cfg.suite);
  TrainReport edge_report, weight_report;
  TrainedBundle bundle = train_all(cfg.train, cfg.anchor, data, &edge_report, &weight_report);

  save_anchor(bundle.anchor, cfg, cfg.out_dir);
  save_affinity(bundle.affinity, cfg, cfg.out_dir);
  save_edge(bundle.edge, cfg, cfg.out_dir);
  save_weight(bundle.weight, cfg, cfg.out_dir);
  write_train_report(edge_report, cfg.suite.tasks, fs::path(cfg.out_dir) / "edge_report.csv");
  write_train_report(weight_report, cfg.suite.tasks,
                     fs::path(cfg.out_dir) / "weight_report.csv");
  write_affinity_csv(bundle.affinity.A, fs::path(cfg.out_dir) / "affinity.csv");
  std::cout << "trained pipeline written to " << cfg.out_dir << " (edge stage "
            << edge_report.wall_seconds << "s, weight stage " << weight_report.wall_seconds
            << "s)\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& r_arg, double c) {
  Preference pref = make_preference(parse_csv_floats(r_arg), c);
  if (static_cast<int>(pref.r.size()) != cfg.suite.tasks)
    throw ConfigError("--r must list one weight per task");
  TrainedBundle bundle = load_bundle(cfg.out_dir, cfg);
  Predicted out = predict(bundle.edge, bundle.weight, bundle.anchor, pref);

  json tree = json::array();
  for (const auto& layer : out.tree.parent) tree.push_back(layer);
  json active = json::array();
  for (const auto& layer : out.tree.active) {
    json row = json::array();
    for (bool b : layer) row.push_back(b ? 1 : 0);
    active.push_back(row);
  }
  json edges = json::array();
  for (const auto& e : out.tree.cross_task_edges)
    edges.push_back(json{{"layer", e[0]}, {"parent_stream", e[1]}, {"child_stream", e[2]}});
  json j{{"preference", json{{"r", pref.r}, {"c", pref.c}}},
         {"parent", tree},
         {"active", active},
         {"cross_task_edges", edges},
         {"tree_signature", out.tree.signature()},
         {"param_count", out.resource.param_count},
         {"flop_count", out.resource.flop_count},
         {"resource_ratio", out.resource.ratio_to_anchor}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, int grid_draws, bool no_adaptation) {
  TrainedBundle bundle = load_bundle(cfg.out_dir, cfg);
  TaskDataset data = generate(cfg.suite);
  SweepSpec spec;
  spec.hv_reference.assign(cfg.suite.tasks, cfg.hv_ref);
  spec.use_adaptation = !no_adaptation;
  int draws = grid_draws > 0 ? grid_draws : cfg.grid_draws;
  for (double c : cfg.c_values) {
    auto grid = default_grid(cfg.suite.tasks, draws, c, cfg.seed);
    spec.grid.insert(spec.grid.end(), grid.begin(), grid.end());
  }
  SweepResult result = preference_sweep(bundle, data, spec);
  write_sweep_csv(result, fs::path(cfg.out_dir) / "sweep.csv");
  write_sweep_summary(result, fs::path(cfg.out_dir) / "sweep_summary.json");
  std::cout << "sweep: " << result.rows.size() << " rows, hv=" << result.hv
            << ", mean_uniformity=" << result.mean_uniformity
            << ", mean_ratio=" << result.mean_ratio << "\n";
  return 0;
}

int cmd_eval_hv(const std::string& front_file, const std::string& ref_arg, long mc_samples,
                uint64_t seed) {
  LossFront front;
  front.reference = parse_csv_floats(ref_arg);
  std::ifstream in(front_file);
  if (!in) throw ConfigError("cannot read front file: " + front_file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    front.points.push_back(parse_csv_floats(line));
  }
  if (front.reference.size() <= 4) {
    std::cout << json{{"hv", hypervolume(front)}}.dump() << "\n";
  } else {
    Rng rng(seed);
    McEstimate est = hypervolume_mc(front, mc_samples, rng);
    std::cout << json{{"hv_mc", est.value}, {"stderr", est.stderr_}}.dump() << "\n";
  }
  return 0;
}

int cmd_gen_data(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  TaskDataset data = generate(cfg.suite);
  export_dataset(cfg.suite, data, cfg.out_dir);
  std::cout << "dataset written to " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-conditioned dynamic multi-task architecture controller"};
  app.require_subcommand(1);

  std::string config_path, out_dir, r_arg, front_file, ref_arg;
  double c_arg = 0.0;
  int grid_draws = 0;
  long mc_samples = 1000000;
  uint64_t seed_override = 0;
  bool no_adaptation = false;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", config_path, "run configuration JSON");
    if (need_config) opt->required();
    sub->add_option("--out", out_dir, "output / checkpoint directory");
    sub->add_option("--seed", seed_override, "override the config seed");
  };

  CLI::App* train = app.add_subcommand("train", "run the full training pipeline");
  add_common(train, true);

  CLI::App* predict_cmd = app.add_subcommand("predict", "predict an architecture for (r,c)");
  add_common(predict_cmd, true);
  predict_cmd->add_option("--r", r_arg, "comma-separated task preference")->required();
  predict_cmd->add_option("--c", c_arg, "cost preference in [0,1]")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "evaluate a preference grid");
  add_common(sweep, true);
  sweep->add_option("--grid", grid_draws, "number of sampled grid preferences");
  sweep->add_flag("--no-adaptation", no_adaptation, "disable weight-hypernet deltas");

  CLI::App* evalhv = app.add_subcommand("eval-hv", "hypervolume of a loss front CSV");
  evalhv->add_option("--front", front_file, "CSV of loss vectors, one per line")->required();
  evalhv->add_option("--ref", ref_arg, "comma-separated reference point")->required();
  evalhv->add_option("--samples", mc_samples, "Monte-Carlo samples when dims > 4");
  evalhv->add_option("--seed", seed_override, "Monte-Carlo seed");

  CLI::App* gen = app.add_subcommand("gen-data", "generate and export the synthetic suite");
  add_common(gen, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (evalhv->parsed()) return cmd_eval_hv(front_file, ref_arg, mc_samples, seed_override);
    bool has_seed = train->count("--seed") || predict_cmd->count("--seed") ||
                    sweep->count("--seed") || gen->count("--seed");
    RunConfig cfg = load_run_config(config_path, out_dir, seed_override, has_seed);
    if (train->parsed()) return cmd_train(cfg);
    if (predict_cmd->parsed()) return cmd_predict(cfg, r_arg, c_arg);
    if (sweep->parsed()) return cmd_sweep(cfg, grid_draws, no_adaptation);
    if (gen->parsed()) return cmd_gen_data(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
