#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "ettckge/checkpoint.hpp"
#include "ettckge/dataset.hpp"
#include "ettckge/gradcheck.hpp"
#include "ettckge/trainer.hpp"

using namespace ettckge;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static inline int counter = 0;
};

SnapshotSequence tiny_sequence(std::size_t snapshots, const std::filesystem::path& dir) {
  GrowthSpec spec;
  spec.base_entities = 30;
  spec.base_relations = 5;
  spec.base_facts = 150;
  spec.growth_rate = 0.2;
  spec.snapshots = snapshots;
  spec.mode = GrowthMode::Entity;
  spec.seed = 3;
  return load_sequence(generate_synthetic(spec, dir));
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.margin = 2.0;
  cfg.num_tokens = 2;
  cfg.alpha = 10.0;
  cfg.batch_size = 32;
  cfg.negatives_per_positive = 4;
  cfg.max_epochs_first = 3;
  cfg.max_epochs_later = 2;
  cfg.stage1_epochs = 2;
  cfg.eval_valid_max = 20;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("adam: first step moves each coordinate by about lr") {
  Matrix<double> params(1, 3, 0.0);
  Matrix<double> grads(1, 3);
  grads(0, 0) = 0.5;
  grads(0, 1) = -200.0;
  grads(0, 2) = 1e-4;
  AdamState<double> state(1, 3);
  AdamConfig cfg;
  adam_step(params, grads, state, cfg);
  // bias correction cancels on step 1: update = lr * g / (|g| + eps)
  for (std::size_t i = 0; i < 3; ++i) {
    double g = grads.data()[i];
    double expect = -cfg.lr * g / (std::abs(g) + cfg.eps);
    CHECK(params.data()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(state.step == 1);
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
  Matrix<double> params(2, 2, 1.5);
  Matrix<double> grads(2, 2, 0.0);
  AdamState<double> state(2, 2);
  adam_step(params, grads, state, AdamConfig{});
  for (double v : params.data()) CHECK(v == 1.5);
}

TEST_CASE("adam: rejects shape mismatch and non-finite gradients") {
  Matrix<double> params(2, 2), bad(2, 3);
  AdamState<double> state(2, 2);
  CHECK_THROWS_AS(adam_step(params, bad, state, AdamConfig{}), ShapeError);

  Matrix<double> grads(2, 2, 0.0);
  grads(0, 1) = std::nan("");
  CHECK_THROWS_AS(adam_step(params, grads, state, AdamConfig{}), NumericError);
}

TEST_CASE("trainer: identical seeds give bit-identical runs") {
  TempDir dir("ck-det");
  SnapshotSequence seq = tiny_sequence(2, dir.path);
  TrainConfig cfg = tiny_config();

  auto r1 = Trainer<float>(seq, cfg).run_continual();
  auto r2 = Trainer<float>(seq, cfg).run_continual();
  REQUIRE(r1.states.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(r1.states[i].entities == r2.states[i].entities);
    CHECK(r1.states[i].relations == r2.states[i].relations);
    CHECK(r1.states[i].ent_tokens == r2.states[i].ent_tokens);
    CHECK(r1.evals[i].mrr == r2.evals[i].mrr);
  }
  REQUIRE(r1.forgetting.size() == r2.forgetting.size());
  for (std::size_t i = 0; i < r1.forgetting.size(); ++i) {
    for (std::size_t j = 0; j < r1.forgetting[i].size(); ++j) {
      if (j <= i) CHECK(r1.forgetting[i][j] == r2.forgetting[i][j]);
      else CHECK(std::isnan(r2.forgetting[i][j]));
    }
  }

  SUBCASE("a different seed diverges") {
    cfg.seed = 12;
    auto r3 = Trainer<float>(seq, cfg).run_continual();
    CHECK(r1.states[0].entities != r3.states[0].entities);
  }
}

TEST_CASE("trainer: stage freeze contracts hold") {
  TempDir dir("ck-freeze");
  SnapshotSequence seq = tiny_sequence(2, dir.path);
  TrainConfig cfg = tiny_config();
  Trainer<float> trainer(seq, cfg);

  trainer.begin_snapshot(0);
  trainer.train_stage2(seq.snapshots[0], false);
  trainer.begin_snapshot(1);

  const auto ent_before = table_hash(trainer.model().entities);
  const auto rel_before = table_hash(trainer.model().relations);
  const auto tok_before = table_hash(trainer.model().ent_tokens);
  trainer.train_stage1(seq.snapshots[0], seq.snapshots[1]);
  // Stage I trains tokens only
  CHECK(table_hash(trainer.model().entities) == ent_before);
  CHECK(table_hash(trainer.model().relations) == rel_before);
  CHECK(table_hash(trainer.model().ent_tokens) != tok_before);

  const auto tok_after1 = table_hash(trainer.model().ent_tokens);
  const auto rtok_after1 = table_hash(trainer.model().rel_tokens);
  const auto frozen_before = table_hash(trainer.frozen_entities());
  trainer.train_stage2(seq.snapshots[1], true);
  // Stage II trains embeddings only; tokens and frozen anchors stay put
  CHECK(table_hash(trainer.model().ent_tokens) == tok_after1);
  CHECK(table_hash(trainer.model().rel_tokens) == rtok_after1);
  CHECK(table_hash(trainer.frozen_entities()) == frozen_before);
  CHECK(table_hash(trainer.model().entities) != ent_before);
}

TEST_CASE("trainer: growing keeps overlap rows and bounds new ones") {
  TempDir dir("ck-grow");
  SnapshotSequence seq = tiny_sequence(2, dir.path);
  TrainConfig cfg = tiny_config();
  Trainer<float> trainer(seq, cfg);

  trainer.begin_snapshot(0);
  trainer.train_stage2(seq.snapshots[0], false);
  Matrix<float> trained = trainer.model().entities;

  trainer.begin_snapshot(1);
  const Matrix<float>& grown = trainer.model().entities;
  REQUIRE(grown.rows() == seq.snapshots[1].num_entities);
  REQUIRE(grown.rows() > trained.rows());
  for (std::size_t n = 0; n < trained.rows(); ++n) {
    for (std::size_t d = 0; d < cfg.dim; ++d) CHECK(grown(n, d) == trained(n, d));
  }
  const double bound = 6.0 / std::sqrt(double(cfg.dim));
  for (std::size_t n = trained.rows(); n < grown.rows(); ++n) {
    for (std::size_t d = 0; d < cfg.dim; ++d) {
      CHECK(std::abs(grown(n, d)) <= bound);
    }
  }
  // frozen copies match the pre-growth table
  CHECK(trainer.frozen_entities() == trained);
}

TEST_CASE("trainer: no_stage1 leaves the tokens at their initial values") {
  TempDir dir("ck-nostage1");
  SnapshotSequence seq = tiny_sequence(2, dir.path);
  TrainConfig cfg = tiny_config();
  cfg.no_stage1 = true;
  auto result = Trainer<float>(seq, cfg).run_continual();

  Trainer<float> fresh(seq, cfg);
  fresh.begin_snapshot(0);
  CHECK(result.states.back().ent_tokens == fresh.model().ent_tokens);
  CHECK(result.states.back().rel_tokens == fresh.model().rel_tokens);
}

TEST_CASE("trainer: fine-tune mode never trains tokens either") {
  TempDir dir("ck-ft");
  SnapshotSequence seq = tiny_sequence(2, dir.path);
  TrainConfig cfg = tiny_config();
  cfg.mode = TrainMode::FineTune;
  auto result = Trainer<float>(seq, cfg).run_continual();
  CHECK(result.states[0].ent_tokens == result.states[1].ent_tokens);
  for (const auto& m : result.metrics) {
    CHECK(m.stage1_s == 0.0);
    CHECK(m.stage1_updated_parameters == 0);
  }
}

TEST_CASE("trainer: forgetting matrix is lower triangular with NaN above") {
  TempDir dir("ck-forget");
  SnapshotSequence seq = tiny_sequence(3, dir.path);
  TrainConfig cfg = tiny_config();
  cfg.max_epochs_first = 1;
  cfg.max_epochs_later = 1;
  cfg.stage1_epochs = 1;
  auto result = Trainer<float>(seq, cfg).run_continual();
  REQUIRE(result.forgetting.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (j <= i) {
        CHECK(result.forgetting[i][j] >= 0.0);
        CHECK(result.forgetting[i][j] <= 1.0);
      } else {
        CHECK(std::isnan(result.forgetting[i][j]));
      }
    }
  }
  // the diagonal restates the per-snapshot eval
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(result.forgetting[i][i] == result.evals[i].mrr);
  }
}

TEST_CASE("trainer: token parameter count") {
  TempDir dir("ck-toks");
  SnapshotSequence seq = tiny_sequence(1, dir.path);
  TrainConfig cfg = tiny_config();
  cfg.num_tokens = 5;
  cfg.dim = 200;
  CHECK(Trainer<float>(seq, cfg).token_parameter_count() == 2 * 5 * 200);
  cfg.shared_tokens = true;
  CHECK(Trainer<float>(seq, cfg).token_parameter_count() == 5 * 200);
}

TEST_CASE("gradients agree with finite differences") {
  for (GradComponent c : {GradComponent::Margin, GradComponent::Diversity,
                          GradComponent::Distill, GradComponent::TokenObjective,
                          GradComponent::Total}) {
    auto res = grad_check(c, 5, 1234);
    CHECK_MESSAGE(res.max_rel_error < 1e-4, res.worst_coordinate);
  }
}
