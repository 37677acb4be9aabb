// Copyright 2026 The kgup Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// kgup command-line front end. Exit codes: 0 ok, 1 runtime failure,
// 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kgup/checkpoint.hpp"
#include "kgup/dataset.hpp"
#include "kgup/eval.hpp"
#include "kgup/gradsuite.hpp"
#include "kgup/train.hpp"

namespace fs = std::filesystem;
using namespace kgup;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

// Bad flags or inputs the user can fix; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
  if (!os.flush()) throw std::runtime_error("write failed for " + path);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open " + path);
  return is;
}

// --data may name a dataset directory or a single JSONL file.
fs::path split_path(const std::string& data, const std::string& split) {
  const fs::path p(data);
  if (fs::is_directory(p)) return p / (split + ".jsonl");
  return p;
}

std::vector<Transition> load_split(const std::string& data, const std::string& split, bool required = true) {
  const auto path = split_path(data, split);
  if (!fs::exists(path)) {
    if (!required) return {};
    throw UsageError("no such dataset file: " + path.string());
  }
  return load_dataset(path);
}

// ---- gen-data ----

struct GenDataArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int train = 80;
  int valid = 10;
  int test = 10;
  int jobs = 1;
};

int run_gen_data(const GenDataArgs& a) {
  for (auto [name, n] : {std::pair{"--train", a.train}, {"--valid", a.valid}, {"--test", a.test}}) {
    if (n < 0) throw UsageError(std::string(name) + " must not be negative");
  }
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  const auto config = a.config.empty() ? WorldConfig::defaults() : load_world_config(a.config);
  const auto stats = build_dataset(config, {a.train, a.valid, a.test}, a.seed, a.out, a.jobs);
  std::cout << format_stats_table(stats);
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string variant = "rgcn";
  std::string out;
  std::string log;
  std::uint64_t seed = 0;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  float lr = 1e-3f;
  float clip_norm = 5.0f;
  std::size_t val_limit = 300;
  std::size_t max_steps = 0;
  std::size_t eval_every = 0;
  std::size_t train_limit = 0;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t enc_layers = 2;
  std::size_t dec_layers = 2;
  std::size_t graph_layers = 1;
  bool graph_skip = true;
  std::size_t max_decode_len = 160;
};

int run_train(const TrainArgs& a) {
  if (!fs::is_directory(a.data)) throw UsageError("data directory not found: " + a.data);
  auto train_set = load_split(a.data, "train");
  if (a.train_limit > 0 && train_set.size() > a.train_limit) train_set.resize(a.train_limit);
  const auto valid_set = load_split(a.data, "valid", false);

  ModelConfig mc;
  mc.hidden = a.hidden;
  mc.heads = a.heads;
  mc.enc_layers = a.enc_layers;
  mc.dec_layers = a.dec_layers;
  mc.graph_layers = a.graph_layers;
  mc.graph_skip = a.graph_skip;
  mc.max_decode_len = a.max_decode_len;
  mc.variant = parse_variant(a.variant);
  mc.vocab = build_vocab(train_set);
  mc.seed = a.seed;
  Model model(mc);

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch_size;
  tc.lr = a.lr;
  tc.clip_norm = a.clip_norm;
  tc.seed = a.seed;
  tc.val_limit = a.val_limit;
  tc.max_steps = a.max_steps;
  tc.eval_every = a.eval_every;

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path);
  const auto result = train(model, train_set, valid_set, tc, &log);
  save_checkpoint(a.out, model, &result.optimizer, result.steps);

  std::cout << "variant " << to_string(mc.variant) << "  transitions " << train_set.size() << "  skipped "
            << result.skipped << "  steps " << result.steps << "\n";
  if (!result.losses.empty()) {
    std::cout << std::fixed << std::setprecision(4) << "final loss " << result.losses.back() << "\n";
  }
  if (result.best_val_tf >= 0.0) {
    std::cout << std::fixed << std::setprecision(4) << "best val TF-F1 " << result.best_val_tf << " at step "
              << result.best_step << "\n";
  }
  std::cout << "checkpoint " << a.out << "\n";
  return 0;
}

// ---- eval-tf / eval-fr ----

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string report;
  bool per_verb = false;
  bool micro = false;
  bool oracle = false;
  std::size_t limit = 0;
  int jobs = 1;
};

int run_eval(const EvalArgs& a, bool free_run) {
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  if (!a.oracle && a.ckpt.empty()) throw UsageError("--ckpt is required unless --oracle is given");
  if (!a.oracle && !fs::exists(a.ckpt)) throw UsageError("checkpoint not found: " + a.ckpt);
  auto transitions = load_split(a.data, a.split);

  std::optional<LoadedCheckpoint> loaded;
  if (!a.oracle) loaded = load_checkpoint(a.ckpt);
  const auto generator = a.oracle ? oracle_generator() : model_generator(*loaded->model);

  EvalReport report;
  report.variant = a.oracle ? "oracle" : std::string(to_string(loaded->model->config().variant));
  report.micro = a.micro;
  report.verb_table = a.per_verb;
  if (free_run) {
    auto games = group_games(transitions);
    if (a.limit > 0 && games.size() > a.limit) games.resize(a.limit);
    const bool collapse = !a.oracle && !is_relational(loaded->model->config().variant);
    report.fr = evaluate_fr(games, generator, collapse, a.jobs);
    report.games = games.size();
    for (const auto& g : games) report.transitions += g.transitions.size();
  } else {
    transitions = strided_subset(transitions, a.limit);
    report.tf = evaluate_tf(transitions, generator, a.jobs);
    report.transitions = transitions.size();
    report.games = group_games(transitions).size();
  }

  write_output(a.report, report.to_json() + "\n");
  if (!a.report.empty() && a.report != "-") {
    std::cout << std::fixed << std::setprecision(4);
    if (report.tf) {
      std::cout << "TF-F1 " << (a.micro ? report.tf->micro_f1 : report.tf->f1) << " over " << report.transitions
                << " transitions\n";
      if (a.per_verb) std::cout << per_verb_table(*report.tf);
    }
    if (report.fr) std::cout << "FR-F1 " << report.fr->f1 << " over " << report.games << " games\n";
  }
  return 0;
}

// ---- apply / diff ----

BeliefGraph read_graph_file(const std::string& path) {
  if (path.empty()) return {};
  auto is = open_input(path);
  try {
    return read_rdf(is, &RelationRegistry::standard());
  } catch (const std::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

UpdateSequence read_ops_file(const std::string& path) {
  auto is = open_input(path);
  UpdateSequence ops;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    try {
      ops.push_back(parse_op(tokens, RelationRegistry::standard()));
    } catch (const std::exception& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ops;
}

int run_apply(const std::string& graph, const std::string& ops, const std::string& out) {
  write_output(out, to_rdf_text(apply_update(read_graph_file(graph), read_ops_file(ops))));
  return 0;
}

int run_diff(const std::string& from, const std::string& to, const std::string& out) {
  std::string text;
  for (const auto& op : diff(read_graph_file(from), read_graph_file(to))) text += render_op(op) + "\n";
  write_output(out, text);
  return 0;
}

// Fills options of `cmd` that were not given on the command line from a flat
// `key = value` file whose keys are long flag names without the dashes.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw UsageError(path + ": " + e.what());
  }
  for (const auto& item : items) {
    auto* opt = cmd->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config" || !item.parents.empty()) {
      throw UsageError(path + ": unknown key '" + item.fullname() + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ": " + item.name + ": " + e.what());
    }
  }
}

// ---- gradcheck ----

int run_gradcheck(std::vector<std::string> blocks, int seeds, double tolerance) {
  if (seeds < 1) throw UsageError("--seeds must be at least 1");
  if (blocks.empty()) blocks = gradient_suite_blocks();
  const auto& known = gradient_suite_blocks();
  for (const auto& b : blocks) {
    if (std::find(known.begin(), known.end(), b) == known.end()) throw UsageError("unknown block '" + b + "'");
  }
  bool ok = true;
  std::cout << std::left << std::setw(22) << "block" << std::right << std::setw(6) << "seeds" << std::setw(12)
            << "max error" << std::setw(10) << "fallback" << "  result\n";
  for (const auto& b : blocks) {
    double worst = 0.0;
    std::size_t fallback = 0;
    for (int s = 0; s < seeds; ++s) {
      const auto r = check_block(b, static_cast<std::uint64_t>(s));
      worst = std::max(worst, r.max_error);
      fallback += r.one_sided;
    }
    const bool pass = worst < tolerance;
    ok &= pass;
    std::cout << std::left << std::setw(22) << b << std::right << std::setw(6) << seeds << std::setw(12)
              << std::scientific << std::setprecision(2) << worst << std::defaultfloat << std::setw(10) << fallback
              << "  " << (pass ? "PASS" : "FAIL") << "\n";
  }
  return ok ? 0 : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgup: learn text-driven knowledge graph updates"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic transition corpus");
  gen_cmd->add_option("--config", gen.config, "World config file (key = value)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--train", gen.train, "Training games")->capture_default_str();
  gen_cmd->add_option("--valid", gen.valid, "Validation games")->capture_default_str();
  gen_cmd->add_option("--test", gen.test, "Test games")->capture_default_str();
  gen_cmd->add_option("--jobs", gen.jobs, "Worker threads")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a generated corpus");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "Flat key = value file; flags given on the command line win")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--variant", tr.variant, "Graph encoder")
      ->check(CLI::IsMember({"none", "gcn", "rgcn", "rgcn-rel"}))
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Training log path (default: <out>.log)");
  train_cmd->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--clip-norm", tr.clip_norm)->capture_default_str();
  train_cmd->add_option("--val-limit", tr.val_limit, "Validation transitions per evaluation (0: all)")
      ->capture_default_str();
  train_cmd->add_option("--max-steps", tr.max_steps, "Stop after this many steps (0: no limit)")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.eval_every, "Also validate every N steps (0: epoch ends only)")
      ->capture_default_str();
  train_cmd->add_option("--train-limit", tr.train_limit, "Use only the first N training transitions")
      ->capture_default_str();
  train_cmd->add_option("--hidden", tr.hidden)->capture_default_str();
  train_cmd->add_option("--heads", tr.heads)->capture_default_str();
  train_cmd->add_option("--enc-layers", tr.enc_layers)->capture_default_str();
  train_cmd->add_option("--dec-layers", tr.dec_layers)->capture_default_str();
  train_cmd->add_option("--graph-layers", tr.graph_layers)->capture_default_str();
  train_cmd->add_option("--graph-skip", tr.graph_skip, "Add node features to the graph encoder output")
      ->capture_default_str();
  train_cmd->add_option("--max-decode-len", tr.max_decode_len)->capture_default_str();

  EvalArgs tf_args, fr_args;
  auto add_eval = [&](const char* name, const char* help, EvalArgs& e) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--ckpt", e.ckpt, "Checkpoint path");
    cmd->add_option("--data", e.data, "Dataset directory or JSONL file")->required();
    cmd->add_option("--split", e.split, "Split name when --data is a directory")->capture_default_str();
    cmd->add_option("--report", e.report, "JSON report path (default: stdout)");
    cmd->add_flag("--per-verb", e.per_verb, "Include the per-verb table");
    cmd->add_flag("--micro", e.micro, "Headline TF-F1 as a micro average over commands");
    cmd->add_flag("--oracle", e.oracle, "Replay gold updates instead of a model");
    cmd->add_option("--limit", e.limit, "Evaluate at most N transitions (eval-tf) or games (eval-fr)")
        ->capture_default_str();
    cmd->add_option("--jobs", e.jobs, "Worker threads")->capture_default_str();
    return cmd;
  };
  auto* tf_cmd = add_eval("eval-tf", "Teacher-forced command F1", tf_args);
  auto* fr_cmd = add_eval("eval-fr", "Free-run belief graph F1", fr_args);

  std::string apply_graph, apply_ops, apply_out;
  auto* apply_cmd = app.add_subcommand("apply", "Apply an ops file to a graph");
  apply_cmd->add_option("--graph", apply_graph, "RDF graph file (default: empty graph)");
  apply_cmd->add_option("--ops", apply_ops, "Ops file, one command per line")->required();
  apply_cmd->add_option("--out", apply_out, "Output graph file (default: stdout)");

  std::string diff_from, diff_to, diff_out;
  auto* diff_cmd = app.add_subcommand("diff", "Ops turning one graph into another");
  diff_cmd->add_option("--from", diff_from, "RDF graph file")->required();
  diff_cmd->add_option("--to", diff_to, "RDF graph file")->required();
  diff_cmd->add_option("--out", diff_out, "Output ops file (default: stdout)");

  std::vector<std::string> gc_blocks;
  int gc_seeds = 20;
  double gc_tolerance = 1e-3;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc_cmd->add_option("--block", gc_blocks, "Block to check (repeatable; default: all)");
  gc_cmd->add_option("--seeds", gc_seeds, "Seeds per block")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tolerance, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) {
      if (!train_config.empty()) apply_config_file(train_cmd, train_config);
      return run_train(tr);
    }
    if (tf_cmd->parsed()) return run_eval(tf_args, false);
    if (fr_cmd->parsed()) return run_eval(fr_args, true);
    if (apply_cmd->parsed()) return run_apply(apply_graph, apply_ops, apply_out);
    if (diff_cmd->parsed()) return run_diff(diff_from, diff_to, diff_out);
    if (gc_cmd->parsed()) return run_gradcheck(gc_blocks, gc_seeds, gc_tolerance);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const SchemaError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsageError;
}
