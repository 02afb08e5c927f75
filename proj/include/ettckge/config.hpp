#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ettckge/error.hpp"

namespace ettckge {

enum class TrainMode { Ett, FineTune };

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "ett") return TrainMode::Ett;
  if (s == "fine-tune") return TrainMode::FineTune;
  throw ParseError("unknown train mode: " + s);
}

inline std::string train_mode_name(TrainMode m) {
  return m == TrainMode::Ett ? "ett" : "fine-tune";
}

struct TrainConfig {
  std::size_t dim = 200;          // D
  double margin = 9.0;            // gamma
  std::size_t num_tokens = 4;     // T, integer in (0, 10]
  double lambda = 0.1;            // diversity weight, [0, 1]
  double alpha = 1e4;             // distillation weight, [1e3, 1e5]
  std::size_t batch_size = 1024;  // {1024, 2048, 3072}
  double learning_rate = 1e-3;    // {1e-2, 1e-3, 1e-4, 1e-5}
  std::size_t negatives_per_positive = 10;
  std::size_t max_epochs_first = 100;   // snapshot 0
  std::size_t max_epochs_later = 50;    // snapshots >= 1
  std::size_t stage1_epochs = 10;
  std::size_t early_stop_patience = 3;
  std::size_t eval_valid_max = 500;  // subsample cap for early-stop validation
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::Ett;
  bool no_distill = false;
  bool no_stage1 = false;
  bool no_div = false;
  bool filter_negatives = false;
  bool renormalize_entities = false;
  bool stop_mask_gradient = false;
  bool shared_tokens = false;      // one token set for entities and relations
  bool stage1_current_triples = false;  // Stage-I source: snapshot-i triples restricted to overlap
  bool reproducible = false;
  int float_width = 32;  // {32, 64}
  std::size_t threads = 1;

  void validate() const {
    if (dim == 0) throw StructuralError("config: dim must be positive");
    if (margin < 0) throw StructuralError("config: margin must be >= 0");
    if (num_tokens < 1 || num_tokens > 10) {
      throw StructuralError("config: token count must be an integer in (0, 10]");
    }
    if (lambda < 0 || lambda > 1) throw StructuralError("config: lambda must be in [0, 1]");
    if (alpha < 0) throw StructuralError("config: alpha must be >= 0");
    if (batch_size == 0) throw StructuralError("config: batch size must be positive");
    if (learning_rate <= 0) throw StructuralError("config: learning rate must be positive");
    if (negatives_per_positive < 1) throw StructuralError("config: need >= 1 negative");
    if (float_width != 32 && float_width != 64) {
      throw StructuralError("config: float width must be 32 or 64");
    }
  }

  nlohmann::json to_json() const {
    return {{"dim", dim},
            {"margin", margin},
            {"num_tokens", num_tokens},
            {"lambda", lambda},
            {"alpha", alpha},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"negatives_per_positive", negatives_per_positive},
            {"max_epochs_first", max_epochs_first},
            {"max_epochs_later", max_epochs_later},
            {"stage1_epochs", stage1_epochs},
            {"early_stop_patience", early_stop_patience},
            {"eval_valid_max", eval_valid_max},
            {"seed", seed},
            {"mode", train_mode_name(mode)},
            {"no_distill", no_distill},
            {"no_stage1", no_stage1},
            {"no_div", no_div},
            {"filter_negatives", filter_negatives},
            {"renormalize_entities", renormalize_entities},
            {"stop_mask_gradient", stop_mask_gradient},
            {"shared_tokens", shared_tokens},
            {"stage1_current_triples", stage1_current_triples},
            {"reproducible", reproducible},
            {"float_width", float_width},
            {"threads", threads}};
  }

  // Overlays fields present in `j` onto this config; unknown keys are errors.
  void merge_json(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      try {
        if (k == "dim") dim = it.value().get<std::size_t>();
        else if (k == "margin") margin = it.value().get<double>();
        else if (k == "num_tokens") num_tokens = it.value().get<std::size_t>();
        else if (k == "lambda") lambda = it.value().get<double>();
        else if (k == "alpha") alpha = it.value().get<double>();
        else if (k == "batch_size") batch_size = it.value().get<std::size_t>();
        else if (k == "learning_rate") learning_rate = it.value().get<double>();
        else if (k == "negatives_per_positive") negatives_per_positive = it.value().get<std::size_t>();
        else if (k == "max_epochs_first") max_epochs_first = it.value().get<std::size_t>();
        else if (k == "max_epochs_later") max_epochs_later = it.value().get<std::size_t>();
        else if (k == "stage1_epochs") stage1_epochs = it.value().get<std::size_t>();
        else if (k == "early_stop_patience") early_stop_patience = it.value().get<std::size_t>();
        else if (k == "eval_valid_max") eval_valid_max = it.value().get<std::size_t>();
        else if (k == "seed") seed = it.value().get<std::uint64_t>();
        else if (k == "mode") mode = parse_train_mode(it.value().get<std::string>());
        else if (k == "no_distill") no_distill = it.value().get<bool>();
        else if (k == "no_stage1") no_stage1 = it.value().get<bool>();
        else if (k == "no_div") no_div = it.value().get<bool>();
        else if (k == "filter_negatives") filter_negatives = it.value().get<bool>();
        else if (k == "renormalize_entities") renormalize_entities = it.value().get<bool>();
        else if (k == "stop_mask_gradient") stop_mask_gradient = it.value().get<bool>();
        else if (k == "shared_tokens") shared_tokens = it.value().get<bool>();
        else if (k == "stage1_current_triples") stage1_current_triples = it.value().get<bool>();
        else if (k == "reproducible") reproducible = it.value().get<bool>();
        else if (k == "float_width") float_width = it.value().get<int>();
        else if (k == "threads") threads = it.value().get<std::size_t>();
        else throw ParseError("config: unknown key '" + k + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("config: bad value for '" + k + "': " + e.what());
      }
    }
  }

  // FNV-1a over the canonical JSON dump; stored in checkpoints and reports.
  std::uint64_t hash() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

}  // namespace ettckge
