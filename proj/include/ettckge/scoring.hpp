#pragma once

#include <random>
#include <span>
#include <vector>

#include "ettckge/matrix.hpp"
#include "ettckge/types.hpp"

namespace ettckge {

struct ScoringConfig {
  double margin = 9.0;
  std::size_t negatives_per_positive = 10;

  void validate() const {
    if (margin < 0) throw StructuralError("margin must be >= 0");
    if (negatives_per_positive < 1) throw StructuralError("negatives per positive must be >= 1");
  }
};

// f(h, r, t) = ||h + r - t||_2^2. Lower is better.
template <typename S>
S transe_score(std::span<const S> h, std::span<const S> r, std::span<const S> t) {
  if (h.size() != r.size() || h.size() != t.size()) {
    throw ShapeError("transe_score: vector lengths differ");
  }
  S sum = 0;
  for (std::size_t d = 0; d < h.size(); ++d) {
    S x = h[d] + r[d] - t[d];
    sum += x * x;
  }
  return sum;
}

// Hinge over paired (positive, negative) scores: sum max(0, gamma + f+ - f-).
template <typename S>
S margin_loss(std::span<const S> pos_scores, std::span<const S> neg_scores, S gamma) {
  if (pos_scores.size() != neg_scores.size()) {
    throw ShapeError("margin_loss: score lists differ in length");
  }
  S sum = 0;
  for (std::size_t i = 0; i < pos_scores.size(); ++i) {
    S v = gamma + pos_scores[i] - neg_scores[i];
    if (v > 0) sum += v;
  }
  return sum;
}

// Uniform corruption of exactly one of {head, tail}; the replacement differs
// from the original. Deterministic given the engine state.
inline std::vector<Triple> sample_negatives(const Triple& triple, std::size_t num_entities,
                                            std::size_t k, std::mt19937_64& rng) {
  if (num_entities < 2) {
    throw StructuralError("sample_negatives: need at least 2 entities to corrupt");
  }
  std::uniform_int_distribution<Id> pick(0, Id(num_entities - 2));
  std::vector<Triple> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Triple neg = triple;
    const bool corrupt_head = (rng() & 1) != 0;
    const Id orig = corrupt_head ? triple.head : triple.tail;
    Id e = pick(rng);
    if (e >= orig) ++e;  // skip the original, keeping the draw uniform
    (corrupt_head ? neg.head : neg.tail) = e;
    out.push_back(neg);
  }
  return out;
}

// Batch hinge loss over raw table rows, with fixed negatives (k per positive,
// flattened). Pure in the tables, so finite differences can probe it.
template <typename S>
S transe_batch_loss(const Matrix<S>& ent, const Matrix<S>& rel,
                    std::span<const Triple> positives, std::span<const Triple> negatives,
                    S gamma) {
  if (positives.empty() || negatives.size() % positives.size() != 0) {
    throw ShapeError("transe_batch_loss: negatives must be a multiple of positives");
  }
  const std::size_t k = negatives.size() / positives.size();
  S loss = 0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Triple& p = positives[i];
    S fp = transe_score<S>(ent.row(p.head), rel.row(p.relation), ent.row(p.tail));
    for (std::size_t j = 0; j < k; ++j) {
      const Triple& q = negatives[i * k + j];
      S fn = transe_score<S>(ent.row(q.head), rel.row(q.relation), ent.row(q.tail));
      S v = gamma + fp - fn;
      if (v > 0) loss += v;
    }
  }
  return loss;
}

// Same hinge, plus the analytic gradient accumulated into grad_ent / grad_rel
// (scaled by `scale`). d f/d h = 2(h+r-t), d f/d t = -2(h+r-t), d f/d r = 2(h+r-t).
template <typename S>
S transe_batch_loss_grad(const Matrix<S>& ent, const Matrix<S>& rel,
                         std::span<const Triple> positives, std::span<const Triple> negatives,
                         S gamma, S scale, Matrix<S>& grad_ent, Matrix<S>& grad_rel) {
  if (positives.empty() || negatives.size() % positives.size() != 0) {
    throw ShapeError("transe_batch_loss_grad: negatives must be a multiple of positives");
  }
  const std::size_t k = negatives.size() / positives.size();
  const std::size_t dim = ent.cols();
  S loss = 0;
  auto add_score_grad = [&](const Triple& t, S coeff) {
    auto h = ent.row(t.head);
    auto r = rel.row(t.relation);
    auto tt = ent.row(t.tail);
    auto gh = grad_ent.row(t.head);
    auto gr = grad_rel.row(t.relation);
    auto gt = grad_ent.row(t.tail);
    for (std::size_t d = 0; d < dim; ++d) {
      S delta = S(2) * (h[d] + r[d] - tt[d]) * coeff;
      gh[d] += delta;
      gr[d] += delta;
      gt[d] -= delta;
    }
  };
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Triple& p = positives[i];
    S fp = transe_score<S>(ent.row(p.head), rel.row(p.relation), ent.row(p.tail));
    for (std::size_t j = 0; j < k; ++j) {
      const Triple& q = negatives[i * k + j];
      S fn = transe_score<S>(ent.row(q.head), rel.row(q.relation), ent.row(q.tail));
      S v = gamma + fp - fn;
      if (v > 0) {
        loss += v;
        add_score_grad(p, scale);
        add_score_grad(q, -scale);
      }
    }
  }
  return loss;
}

}  // namespace ettckge
