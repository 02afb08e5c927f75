#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ettckge/checkpoint.hpp"
#include "ettckge/config.hpp"
#include "ettckge/dataset.hpp"
#include "ettckge/error.hpp"
#include "ettckge/gradcheck.hpp"
#include "ettckge/report.hpp"
#include "ettckge/trainer.hpp"

namespace fs = std::filesystem;
using namespace ettckge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool reproducible = false;
  bool float64 = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "rng seed (overrides config)");
  cmd->add_option("--threads", opts.threads, "worker thread cap");
  cmd->add_flag("--reproducible", opts.reproducible, "deterministic reduction mode");
  cmd->add_flag("--float64", opts.float64, "64-bit embeddings");
}

TrainConfig build_config(const CommonOpts& opts) {
  TrainConfig cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw StructuralError("cannot open config file " + opts.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("config JSON: ") + e.what());
    }
    cfg.merge_json(j);
  }
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.reproducible) cfg.reproducible = true;
  if (opts.float64) cfg.float_width = 64;
  return cfg;
}

template <typename S>
int run_train(const TrainConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
  SnapshotSequence seq = load_sequence({data_dir});
  Trainer<S> trainer(seq, cfg);
  RunResult<S> result = trainer.run_continual();

  fs::create_directories(out_dir);
  for (const ModelState<S>& state : result.states) {
    CheckpointState<S> ckpt;
    ckpt.model = state;
    ckpt.metadata = {{"config", cfg.to_json()},
                     {"config_hash", cfg.hash()},
                     {"snapshot", state.snapshot},
                     {"version", kVersion}};
    save_checkpoint(fs::path(out_dir) / ("checkpoint_" + std::to_string(state.snapshot) + ".ckpt"),
                    ckpt);
  }
  RunReport report{cfg, result.evals, result.metrics, result.forgetting, ""};
  emit_report(out_dir, report);

  for (std::size_t i = 0; i < result.evals.size(); ++i) {
    const EvalResult& e = result.evals[i];
    std::cout << "snapshot " << i << ": mrr=" << e.mrr << " hits@1=" << e.hits1
              << " hits@10=" << e.hits10 << "\n";
  }
  std::cout << "report written to " << out_dir << "\n";
  return kExitOk;
}

template <typename S>
int run_eval(const TrainConfig& cfg, const std::string& ckpt_path, const std::string& data_dir,
             std::size_t snapshot, bool raw, const std::string& rank_dump) {
  SnapshotSequence seq = load_sequence({data_dir});
  if (snapshot >= seq.size()) {
    throw StructuralError("snapshot " + std::to_string(snapshot) +
                          " beyond dataset (I=" + std::to_string(seq.size()) + ")");
  }
  CheckpointState<S> ckpt = load_checkpoint<S>(ckpt_path);
  const SnapshotGraph& snap = seq.snapshots[snapshot];
  if (ckpt.model.snapshot < snapshot) {
    throw StructuralError("checkpoint trained through snapshot " +
                          std::to_string(ckpt.model.snapshot) + ", cannot evaluate snapshot " +
                          std::to_string(snapshot));
  }
  if (ckpt.model.entities.rows() < snap.num_entities ||
      ckpt.model.relations.rows() < snap.num_relations) {
    throw ShapeError("checkpoint tables smaller than dataset vocabulary at snapshot " +
                     std::to_string(snapshot));
  }
  FilterSet filter = build_filter(seq, snapshot);
  std::vector<QueryRank> ranks;
  EvalResult res = evaluate<S>(ckpt.model.entities, ckpt.model.relations, snap.test,
                               snap.num_entities, raw ? nullptr : &filter, cfg.threads,
                               rank_dump.empty() ? nullptr : &ranks);
  if (!rank_dump.empty()) write_rank_dump(rank_dump, ranks);
  nlohmann::json out = {{"mrr", res.mrr},
                        {"hits1", res.hits1},
                        {"hits10", res.hits10},
                        {"query_count", res.query_count},
                        {"snapshot", snapshot},
                        {"protocol", raw ? "raw" : "filtered"}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int run_grad_check(const std::string& component, std::size_t trials, std::uint64_t seed) {
  std::vector<std::string> names;
  if (component == "all") {
    names = {"margin", "diversity", "distill", "token_objective", "total"};
  } else {
    names = {component};
  }
  bool ok = true;
  for (const std::string& name : names) {
    GradCheckResult res = grad_check(parse_grad_component(name), trials, seed);
    const bool pass = res.max_rel_error < 1e-4;
    ok = ok && pass;
    std::cout << name << ": max_rel_error=" << res.max_rel_error
              << (pass ? " PASS" : " FAIL (" + res.worst_coordinate + ")") << "\n";
  }
  return ok ? kExitOk : kExitNumeric;
}

int run_report(const std::string& run_dir) {
  RunReport report = load_report(run_dir);
  std::cout << "run config hash: " << report.config.hash() << "\n";
  for (std::size_t i = 0; i < report.evals.size(); ++i) {
    const EvalResult& e = report.evals[i];
    const SnapshotMetrics& m = report.metrics[i];
    std::cout << "snapshot " << i << ": mrr=" << e.mrr << " hits@1=" << e.hits1
              << " hits@10=" << e.hits10 << " train_s=" << m.wall_time_s
              << " cum_s=" << m.cumulative_time_s
              << " updated_params=" << (m.stage1_updated_parameters + m.stage2_updated_parameters)
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual knowledge-graph embedding with task-driven tokens"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run the continual training loop");
  CommonOpts train_common;
  std::string data_dir, out_dir, mode = "ett";
  bool no_distill = false, no_stage1 = false, no_div = false;
  train->add_option("--data", data_dir, "dataset root directory")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--mode", mode, "ett | fine-tune")
      ->check(CLI::IsMember({"ett", "fine-tune"}));
  train->add_flag("--no-distill", no_distill, "ablation: drop the distillation loss");
  train->add_flag("--no-stage1", no_stage1, "ablation: skip Stage I token learning");
  train->add_flag("--no-div", no_div, "ablation: drop the diversity loss");
  add_common(train, train_common);
  std::optional<std::size_t> o_dim, o_tokens, o_batch, o_negatives, o_epochs_first,
      o_epochs_later, o_stage1_epochs, o_patience, o_valid_max;
  std::optional<double> o_margin, o_lambda, o_alpha, o_lr;
  bool o_filter_neg = false, o_renorm = false, o_stop_mask = false, o_shared = false,
       o_stage1_cur = false;
  train->add_option("--dim", o_dim, "embedding dimension D");
  train->add_option("--margin", o_margin, "margin gamma");
  train->add_option("--tokens", o_tokens, "token count T in (0,10]");
  train->add_option("--lambda", o_lambda, "diversity weight in [0,1]");
  train->add_option("--alpha", o_alpha, "distillation weight");
  train->add_option("--batch-size", o_batch, "minibatch size");
  train->add_option("--lr", o_lr, "learning rate");
  train->add_option("--negatives", o_negatives, "negatives per positive");
  train->add_option("--max-epochs-first", o_epochs_first, "max epochs for snapshot 0");
  train->add_option("--max-epochs-later", o_epochs_later, "max epochs for later snapshots");
  train->add_option("--stage1-epochs", o_stage1_epochs, "Stage I epochs");
  train->add_option("--patience", o_patience, "early-stop patience");
  train->add_option("--valid-max", o_valid_max, "validation subsample cap for early stopping");
  train->add_flag("--filter-negatives", o_filter_neg, "filter sampled negatives against train");
  train->add_flag("--renormalize", o_renorm, "classic TransE entity renormalization");
  train->add_flag("--stop-mask-gradient", o_stop_mask, "treat the current mask as constant");
  train->add_flag("--shared-tokens", o_shared, "one token set for entities and relations");
  train->add_flag("--stage1-current-triples", o_stage1_cur,
                  "Stage I trains on current-snapshot triples restricted to the overlap");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  CommonOpts eval_common;
  std::string ckpt_path, eval_data, rank_dump;
  std::size_t eval_snapshot = 0;
  bool raw = false;
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset root directory")->required();
  eval_cmd->add_option("--snapshot", eval_snapshot, "snapshot index to evaluate")->required();
  eval_cmd->add_flag("--raw", raw, "disable the filtered protocol");
  eval_cmd->add_option("--rank-dump", rank_dump, "per-query rank CSV path");
  add_common(eval_cmd, eval_common);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic benchmark");
  std::string gen_out, gen_mode = "entity";
  GrowthSpec spec;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--mode", gen_mode, "entity | relation | fact | hybrid")
      ->check(CLI::IsMember({"entity", "relation", "fact", "hybrid"}));
  gen->add_option("--base-entities", spec.base_entities, "entities in snapshot 0");
  gen->add_option("--base-relations", spec.base_relations, "relations in snapshot 0");
  gen->add_option("--base-facts", spec.base_facts, "facts in snapshot 0");
  gen->add_option("--growth", spec.growth_rate, "per-snapshot compound growth rate");
  gen->add_option("--snapshots", spec.snapshots, "snapshot count I");
  gen->add_option("--seed", spec.seed, "generator seed");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient audit");
  std::string gc_component = "all";
  std::size_t gc_trials = 100;
  std::uint64_t gc_seed = 0;
  gc->add_option("--component", gc_component,
                 "margin | diversity | distill | token_objective | total | all")
      ->check(CLI::IsMember({"margin", "diversity", "distill", "token_objective",
                             "total", "all"}));
  gc->add_option("--trials", gc_trials, "random instances per component");
  gc->add_option("--seed", gc_seed, "rng seed");

  // report
  auto* rep = app.add_subcommand("report", "summarize a run directory");
  std::string run_dir;
  rep->add_option("--run", run_dir, "run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) {
      TrainConfig cfg = build_config(train_common);
      cfg.mode = parse_train_mode(mode);
      if (no_distill) cfg.no_distill = true;
      if (no_stage1) cfg.no_stage1 = true;
      if (no_div) cfg.no_div = true;
      if (o_dim) cfg.dim = *o_dim;
      if (o_margin) cfg.margin = *o_margin;
      if (o_tokens) cfg.num_tokens = *o_tokens;
      if (o_lambda) cfg.lambda = *o_lambda;
      if (o_alpha) cfg.alpha = *o_alpha;
      if (o_batch) cfg.batch_size = *o_batch;
      if (o_lr) cfg.learning_rate = *o_lr;
      if (o_negatives) cfg.negatives_per_positive = *o_negatives;
      if (o_epochs_first) cfg.max_epochs_first = *o_epochs_first;
      if (o_epochs_later) cfg.max_epochs_later = *o_epochs_later;
      if (o_stage1_epochs) cfg.stage1_epochs = *o_stage1_epochs;
      if (o_patience) cfg.early_stop_patience = *o_patience;
      if (o_valid_max) cfg.eval_valid_max = *o_valid_max;
      if (o_filter_neg) cfg.filter_negatives = true;
      if (o_renorm) cfg.renormalize_entities = true;
      if (o_stop_mask) cfg.stop_mask_gradient = true;
      if (o_shared) cfg.shared_tokens = true;
      if (o_stage1_cur) cfg.stage1_current_triples = true;
      cfg.validate();
      return cfg.float_width == 64 ? run_train<double>(cfg, data_dir, out_dir)
                                   : run_train<float>(cfg, data_dir, out_dir);
    }
    if (*eval_cmd) {
      TrainConfig cfg = build_config(eval_common);
      return cfg.float_width == 64
                 ? run_eval<double>(cfg, ckpt_path, eval_data, eval_snapshot, raw, rank_dump)
                 : run_eval<float>(cfg, ckpt_path, eval_data, eval_snapshot, raw, rank_dump);
    }
    if (*gen) {
      spec.mode = parse_growth_mode(gen_mode);
      generate_synthetic(spec, gen_out);
      std::cout << "synthetic dataset written to " << gen_out << "\n";
      return kExitOk;
    }
    if (*gc) return run_grad_check(gc_component, gc_trials, gc_seed);
    if (*rep) return run_report(run_dir);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
