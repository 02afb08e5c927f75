#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <unordered_set>
#include <vector>

#include "ettckge/adam.hpp"
#include "ettckge/config.hpp"
#include "ettckge/distill.hpp"
#include "ettckge/eval.hpp"
#include "ettckge/log.hpp"
#include "ettckge/matrix.hpp"
#include "ettckge/rng.hpp"
#include "ettckge/scoring.hpp"
#include "ettckge/telemetry.hpp"
#include "ettckge/tokens.hpp"
#include "ettckge/types.hpp"

namespace ettckge {

template <typename S>
struct ModelState {
  Matrix<S> entities;    // N_E(i) x D
  Matrix<S> relations;   // N_R(i) x D
  Matrix<S> ent_tokens;  // T x D
  Matrix<S> rel_tokens;  // T x D (aliases ent_tokens content when shared)
  AdamState<S> ent_adam, rel_adam, ent_tok_adam, rel_tok_adam;
  std::size_t snapshot = 0;
};

template <typename S>
struct RunResult {
  std::vector<ModelState<S>> states;       // one per snapshot
  std::vector<EvalResult> evals;           // diagonal (snapshot i on test i)
  std::vector<SnapshotMetrics> metrics;
  std::vector<std::vector<double>> forgetting;  // [i][j], j <= i; NaN above
};

namespace detail {

// rng stream tags, mixed with (seed, snapshot, epoch, batch)
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamNegatives = 3;
inline constexpr std::uint64_t kStreamStage1 = 4;
inline constexpr std::uint64_t kStreamValidSubsample = 5;

template <typename S>
void renormalize_rows(Matrix<S>& table) {
  for (std::size_t n = 0; n < table.rows(); ++n) {
    auto row = table.row(n);
    S sq = 0;
    for (S v : row) sq += v * v;
    if (sq <= 0) continue;
    S inv = S(1) / S(std::sqrt(double(sq)));
    for (S& v : row) v *= inv;
  }
}

inline std::vector<Triple> subsample(std::span<const Triple> src, std::size_t cap,
                                     std::mt19937_64 rng) {
  std::vector<Triple> out(src.begin(), src.end());
  if (cap == 0 || out.size() <= cap) return out;
  std::shuffle(out.begin(), out.end(), rng);
  out.resize(cap);
  return out;
}

}  // namespace detail

template <typename S>
class Trainer {
 public:
  Trainer(const SnapshotSequence& seq, TrainConfig cfg) : seq_(seq), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (seq_.size() == 0) throw StructuralError("trainer: empty snapshot sequence");
  }

  // The full continual loop: plain TransE on snapshot 0, then Stage I + Stage II
  // per transition. Fine-tune mode (and the full ablation stack) skips the
  // token and distillation machinery entirely.
  RunResult<S> run_continual() {
    RunResult<S> result;
    double cumulative = 0;
    for (std::size_t i = 0; i < seq_.size(); ++i) {
      const SnapshotGraph& snap = seq_.snapshots[i];
      SnapshotMetrics m;
      m.snapshot = i;

      begin_snapshot(i);

      const bool ett = cfg_.mode == TrainMode::Ett;
      if (i > 0 && ett && !cfg_.no_stage1) {
        StopWatch sw;
        train_stage1(seq_.snapshots[i - 1], snap);
        m.stage1_s = sw.seconds();
      }
      {
        StopWatch sw;
        const bool distill = i > 0 && ett && !cfg_.no_distill;
        m.stage2_updated_parameters = train_stage2(snap, distill);
        m.stage2_s = sw.seconds();
      }
      m.stage1_updated_parameters =
          (i > 0 && ett && !cfg_.no_stage1) ? token_parameter_count() : 0;
      m.wall_time_s = m.stage1_s + m.stage2_s;
      cumulative += m.wall_time_s;
      m.cumulative_time_s = cumulative;
      m.peak_memory_bytes = peak_rss_bytes();
      m.live_table_bytes = live_bytes();

      {
        StopWatch sw;
        FilterSet filter = build_filter(seq_, i);
        result.evals.push_back(evaluate<S>(model_.entities, model_.relations, snap.test,
                                           snap.num_entities, &filter, cfg_.threads));
        m.eval_time_s = sw.seconds();
      }
      result.metrics.push_back(m);
      model_.snapshot = i;
      result.states.push_back(model_);
      log_info("snapshot " + std::to_string(i) + " done: mrr=" +
               std::to_string(result.evals.back().mrr) + " time=" +
               std::to_string(m.wall_time_s) + "s");
    }
    result.forgetting = forgetting_matrix(result.states);
    return result;
  }

  // Lower-triangular MRR matrix: model after snapshot i on the test split of
  // snapshot j <= i, candidates and filter as of snapshot j.
  std::vector<std::vector<double>> forgetting_matrix(
      const std::vector<ModelState<S>>& states) const {
    const std::size_t count = states.size();
    std::vector<std::vector<double>> out(count,
                                         std::vector<double>(count, std::nan("")));
    for (std::size_t j = 0; j < count; ++j) {
      FilterSet filter = build_filter(seq_, j);
      const SnapshotGraph& snap = seq_.snapshots[j];
      for (std::size_t i = j; i < count; ++i) {
        out[i][j] = evaluate<S>(states[i].entities, states[i].relations, snap.test,
                                snap.num_entities, &filter, cfg_.threads)
                        .mrr;
      }
    }
    return out;
  }

  const ModelState<S>& model() const { return model_; }

  // --- individual stages; run_continual composes these, and tests drive
  // them directly ---

  // Initializes (i == 0) or grows (i > 0) the model for snapshot i, taking
  // the frozen copies that anchor this transition.
  void begin_snapshot(std::size_t i) {
    if (i >= seq_.size()) throw ContractError("begin_snapshot: index out of range");
    if (i == 0) {
      init_first_snapshot(seq_.snapshots[0]);
    } else {
      grow_model(seq_.snapshots[i - 1], seq_.snapshots[i]);
    }
    model_.snapshot = i;
  }

  // Stage I: freeze embeddings, optimize tokens only. The triple source is the
  // previous snapshot's train split (ids all within E_prev); a config flag
  // switches to current-snapshot triples restricted to the overlap.
  void train_stage1(const SnapshotGraph& prev, const SnapshotGraph& cur) {
    std::vector<Triple> source;
    if (cfg_.stage1_current_triples) {
      for (const Triple& t : cur.train) {
        if (t.head < prev.num_entities && t.tail < prev.num_entities &&
            t.relation < prev.num_relations) {
          source.push_back(t);
        }
      }
    } else {
      source = prev.train;
    }
    if (source.empty()) throw StructuralError("stage 1: empty triple source");

    // Frozen views: restrict the tables to the rows known at snapshot prev.
    Matrix<S> ent = prefix_rows(model_.entities, prev.num_entities);
    Matrix<S> rel = prefix_rows(model_.relations, prev.num_relations);

    model_.ent_tok_adam.reset(cfg_.num_tokens, cfg_.dim);
    model_.rel_tok_adam.reset(cfg_.num_tokens, cfg_.dim);
    const S lambda = cfg_.no_div ? S(0) : S(cfg_.lambda);
    const AdamConfig adam{cfg_.learning_rate};

    for (std::size_t epoch = 0; epoch < cfg_.stage1_epochs; ++epoch) {
      std::vector<std::size_t> order(source.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(),
                   make_engine(cfg_.seed, detail::kStreamStage1, cur.index, epoch));
      double epoch_loss = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        const std::size_t end = std::min(begin + cfg_.batch_size, order.size());
        const std::size_t bi = begin / cfg_.batch_size;
        auto rng = make_engine(cfg_.seed, detail::kStreamNegatives, cur.index,
                               epoch * 1000003 + bi, detail::kStreamStage1);
        std::vector<Triple> pos, negs;
        collect_batch(source, order, begin, end, prev.num_entities, rng, pos, negs);

        Matrix<S> gze(cfg_.num_tokens, cfg_.dim);
        Matrix<S> gzr(cfg_.num_tokens, cfg_.dim);
        const S scale = S(1) / S(pos.size());
        epoch_loss += double(token_objective_grad<S>(ent, rel, model_.ent_tokens,
                                                     model_.rel_tokens, pos, negs,
                                                     S(cfg_.margin), lambda, scale, gze, gzr));
        if (cfg_.shared_tokens) {
          for (std::size_t idx = 0; idx < gze.size(); ++idx) {
            gze.data()[idx] += gzr.data()[idx];
          }
          adam_step(model_.ent_tokens, gze, model_.ent_tok_adam, adam);
          model_.rel_tokens = model_.ent_tokens;
        } else {
          adam_step(model_.ent_tokens, gze, model_.ent_tok_adam, adam);
          adam_step(model_.rel_tokens, gzr, model_.rel_tok_adam, adam);
        }
      }
      log_debug("stage1 epoch " + std::to_string(epoch) + " loss=" + std::to_string(epoch_loss));
    }
  }

  // Stage II (and snapshot-0 / fine-tune training when `distill` is false).
  // Returns the number of embedding coordinates touched by a gradient.
  std::uint64_t train_stage2(const SnapshotGraph& snap, bool distill) {
    const std::vector<Triple>& train = snap.train;
    const std::size_t n_ent_overlap = distill ? frozen_entities_.rows() : 0;
    const std::size_t n_rel_overlap = distill ? frozen_relations_.rows() : 0;
    if (distill && n_ent_overlap == 0) {
      log_info("stage 2: empty overlap, distillation contributes nothing");
    }

    model_.ent_adam.reset(model_.entities.rows(), cfg_.dim);
    model_.rel_adam.reset(model_.relations.rows(), cfg_.dim);
    const AdamConfig adam{cfg_.learning_rate};
    const std::size_t max_epochs =
        snap.index == 0 ? cfg_.max_epochs_first : cfg_.max_epochs_later;

    TouchTracker ent_touch(model_.entities.rows());
    TouchTracker rel_touch(model_.relations.rows());

    std::unordered_set<Triple, TripleHash> true_triples;
    if (cfg_.filter_negatives) {
      true_triples.insert(train.begin(), train.end());
    }

    // Early stopping on (subsampled) validation MRR.
    std::vector<Triple> valid = detail::subsample(
        snap.valid, cfg_.eval_valid_max,
        make_engine(cfg_.seed, detail::kStreamValidSubsample, snap.index));
    FilterSet filter = build_filter(seq_, snap.index);
    double best_mrr = -1;
    std::size_t bad_checks = 0;
    Matrix<S> best_ent = model_.entities;
    Matrix<S> best_rel = model_.relations;

    for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(),
                   make_engine(cfg_.seed, detail::kStreamShuffle, snap.index, epoch));
      double epoch_loss = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
        const std::size_t end = std::min(begin + cfg_.batch_size, order.size());
        const std::size_t bi = begin / cfg_.batch_size;
        auto rng = make_engine(cfg_.seed, detail::kStreamNegatives, snap.index,
                               epoch * 1000003 + bi);
        std::vector<Triple> pos, negs;
        collect_batch(train, order, begin, end, snap.num_entities, rng, pos, negs,
                      cfg_.filter_negatives ? &true_triples : nullptr);

        Matrix<S> gent(model_.entities.rows(), cfg_.dim);
        Matrix<S> grel(model_.relations.rows(), cfg_.dim);
        const S scale = S(1) / S(pos.size());
        epoch_loss += double(scale) *
                      double(transe_batch_loss_grad<S>(model_.entities, model_.relations, pos,
                                                       negs, S(cfg_.margin), scale, gent, grel));
        if (distill && n_ent_overlap > 0) {
          const S a = S(cfg_.alpha);
          epoch_loss +=
              double(a) *
              double(distill_loss_grad<S>(frozen_entities_, model_.entities, model_.ent_tokens,
                                          n_ent_overlap, a, gent, !cfg_.stop_mask_gradient));
          epoch_loss +=
              double(a) *
              double(distill_loss_grad<S>(frozen_relations_, model_.relations, model_.rel_tokens,
                                          n_rel_overlap, a, grel, !cfg_.stop_mask_gradient));
        }
        ent_touch.observe(gent);
        rel_touch.observe(grel);
        adam_step(model_.entities, gent, model_.ent_adam, adam);
        adam_step(model_.relations, grel, model_.rel_adam, adam);
        if (cfg_.renormalize_entities) detail::renormalize_rows(model_.entities);
      }
      if (!std::isfinite(epoch_loss)) {
        throw NumericError("stage 2: non-finite loss at epoch " + std::to_string(epoch));
      }

      if (!valid.empty()) {
        const double mrr = evaluate<S>(model_.entities, model_.relations, valid,
                                       snap.num_entities, &filter, cfg_.threads)
                               .mrr;
        log_debug("stage2 epoch " + std::to_string(epoch) + " loss=" +
                  std::to_string(epoch_loss) + " valid_mrr=" + std::to_string(mrr));
        if (mrr > best_mrr) {
          best_mrr = mrr;
          best_ent = model_.entities;
          best_rel = model_.relations;
          bad_checks = 0;
        } else if (++bad_checks >= cfg_.early_stop_patience) {
          log_debug("stage 2: early stop at epoch " + std::to_string(epoch));
          break;
        }
      }
    }
    if (best_mrr >= 0) {
      model_.entities = std::move(best_ent);
      model_.relations = std::move(best_rel);
    }
    return std::uint64_t(ent_touch.touched_rows() + rel_touch.touched_rows()) * cfg_.dim;
  }

  std::uint64_t token_parameter_count() const {
    return std::uint64_t(cfg_.shared_tokens ? 1 : 2) * cfg_.num_tokens * cfg_.dim;
  }

  const Matrix<S>& frozen_entities() const { return frozen_entities_; }
  const Matrix<S>& frozen_relations() const { return frozen_relations_; }

 private:
  void init_first_snapshot(const SnapshotGraph& snap) {
    auto rng = make_engine(cfg_.seed, detail::kStreamInit, 0);
    model_.entities = init_uniform<S>(snap.num_entities, cfg_.dim, rng);
    model_.relations = init_uniform<S>(snap.num_relations, cfg_.dim, rng);
    model_.ent_tokens = init_uniform<S>(cfg_.num_tokens, cfg_.dim, rng);
    model_.rel_tokens = cfg_.shared_tokens ? model_.ent_tokens
                                           : init_uniform<S>(cfg_.num_tokens, cfg_.dim, rng);
    // checkpoints store every Adam state at full shape, trained or not
    model_.ent_adam.reset(snap.num_entities, cfg_.dim);
    model_.rel_adam.reset(snap.num_relations, cfg_.dim);
    model_.ent_tok_adam.reset(cfg_.num_tokens, cfg_.dim);
    model_.rel_tok_adam.reset(cfg_.num_tokens, cfg_.dim);
    frozen_entities_ = Matrix<S>();
    frozen_relations_ = Matrix<S>();
  }

  // Overlap rows keep their trained values; new rows start inside the init
  // range. The frozen copies anchor distillation for this transition.
  void grow_model(const SnapshotGraph& prev, const SnapshotGraph& cur) {
    OverlapIds overlap = overlap_ids(prev, cur);
    frozen_entities_ = prefix_rows(model_.entities, overlap.entities.size());
    frozen_relations_ = prefix_rows(model_.relations, overlap.relations.size());

    auto rng = make_engine(cfg_.seed, detail::kStreamInit, cur.index);
    auto grow = [&](const Matrix<S>& old, std::size_t new_rows) {
      Matrix<S> fresh = init_uniform<S>(new_rows, cfg_.dim, rng);
      for (std::size_t n = 0; n < old.rows(); ++n) {
        auto src = old.row(n);
        auto dst = fresh.row(n);
        std::copy(src.begin(), src.end(), dst.begin());
      }
      return fresh;
    };
    model_.entities = grow(model_.entities, cur.num_entities);
    model_.relations = grow(model_.relations, cur.num_relations);
    model_.ent_adam.reset(cur.num_entities, cfg_.dim);
    model_.rel_adam.reset(cur.num_relations, cfg_.dim);
  }

  static Matrix<S> prefix_rows(const Matrix<S>& m, std::size_t rows) {
    Matrix<S> out(rows, m.cols());
    for (std::size_t n = 0; n < rows; ++n) {
      auto src = m.row(n);
      auto dst = out.row(n);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
  }

  void collect_batch(const std::vector<Triple>& source, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end, std::size_t num_entities,
                     std::mt19937_64& rng, std::vector<Triple>& pos, std::vector<Triple>& negs,
                     const std::unordered_set<Triple, TripleHash>* filter = nullptr) const {
    pos.reserve(end - begin);
    negs.reserve((end - begin) * cfg_.negatives_per_positive);
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Triple& t = source[order[idx]];
      pos.push_back(t);
      std::vector<Triple> sampled =
          sample_negatives(t, num_entities, cfg_.negatives_per_positive, rng);
      if (filter) {
        for (Triple& neg : sampled) {
          for (int attempt = 0; attempt < 100 && filter->count(neg); ++attempt) {
            neg = sample_negatives(t, num_entities, 1, rng)[0];
          }
        }
      }
      negs.insert(negs.end(), sampled.begin(), sampled.end());
    }
  }

  std::uint64_t live_bytes() const {
    return std::uint64_t(model_.entities.size() + model_.relations.size() +
                         model_.ent_tokens.size() + model_.rel_tokens.size() +
                         frozen_entities_.size() + frozen_relations_.size()) *
           sizeof(S);
  }

  const SnapshotSequence& seq_;
  TrainConfig cfg_;
  ModelState<S> model_;
  Matrix<S> frozen_entities_;   // E_{i-1}, overlap rows only
  Matrix<S> frozen_relations_;  // R_{i-1}, overlap rows only
};

}  // namespace ettckge
