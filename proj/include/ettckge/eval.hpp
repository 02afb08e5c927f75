#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ettckge/matrix.hpp"
#include "ettckge/scoring.hpp"
#include "ettckge/types.hpp"

namespace ettckge {

// Known-true triples indexed by (h, r) and (r, t) for the filtered protocol.
class FilterSet {
 public:
  void add(const Triple& t) {
    tails_[pack(t.head, t.relation)].insert(t.tail);
    heads_[pack(t.tail, t.relation)].insert(t.head);
  }
  void add_all(std::span<const Triple> triples) {
    for (const Triple& t : triples) add(t);
  }

  const std::unordered_set<Id>* known_tails(Id head, Id relation) const {
    auto it = tails_.find(pack(head, relation));
    return it == tails_.end() ? nullptr : &it->second;
  }
  const std::unordered_set<Id>* known_heads(Id tail, Id relation) const {
    auto it = heads_.find(pack(tail, relation));
    return it == heads_.end() ? nullptr : &it->second;
  }

 private:
  static std::uint64_t pack(Id a, Id b) { return (std::uint64_t(a) << 32) | b; }
  std::unordered_map<std::uint64_t, std::unordered_set<Id>> tails_;
  std::unordered_map<std::uint64_t, std::unordered_set<Id>> heads_;
};

enum class QueryDirection { Tail, Head };  // (h, r, ?) vs (?, r, t)

struct EvalResult {
  double mrr = 0;
  double hits1 = 0;
  double hits10 = 0;
  std::size_t query_count = 0;
};

struct QueryRank {
  QueryDirection direction;
  Triple triple;
  double fractional_rank;
};

// Rounded half-up integer rank, used for Hits@k; MRR uses the fractional rank.
inline std::size_t integer_rank(double fractional_rank) {
  return std::size_t(std::floor(fractional_rank + 0.5));
}

// Fractional rank of the truth among all candidates [0, num_candidates):
// 1 + (# strictly better) + (# ties)/2. The filtered protocol skips
// candidates forming another known-true triple; the truth itself is never
// filtered.
template <typename S>
double rank_query(QueryDirection dir, const Triple& query, const Matrix<S>& ent,
                  const Matrix<S>& rel, std::size_t num_candidates,
                  const FilterSet* filter) {
  const Id truth = dir == QueryDirection::Tail ? query.tail : query.head;
  if (truth >= num_candidates) throw ContractError("rank_query: truth outside candidate set");
  const std::size_t dim = ent.cols();
  auto r = rel.row(query.relation);
  const std::unordered_set<Id>* known = nullptr;
  S truth_score;
  std::size_t better = 0, ties = 0;

  if (dir == QueryDirection::Tail) {
    auto h = ent.row(query.head);
    std::vector<S> q(dim);
    for (std::size_t d = 0; d < dim; ++d) q[d] = h[d] + r[d];
    truth_score = transe_score<S>(h, r, ent.row(truth));
    if (filter) known = filter->known_tails(query.head, query.relation);
    for (Id c = 0; c < num_candidates; ++c) {
      if (c == truth) continue;
      if (known && known->count(c)) continue;
      auto t = ent.row(c);
      S s = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        S x = q[d] - t[d];
        s += x * x;
      }
      if (s < truth_score) ++better;
      else if (s == truth_score) ++ties;
    }
  } else {
    auto t = ent.row(query.tail);
    truth_score = transe_score<S>(ent.row(truth), r, t);
    if (filter) known = filter->known_heads(query.tail, query.relation);
    for (Id c = 0; c < num_candidates; ++c) {
      if (c == truth) continue;
      if (known && known->count(c)) continue;
      auto h = ent.row(c);
      S s = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        // same association order as transe_score so ties match it exactly
        S x = h[d] + r[d] - t[d];
        s += x * x;
      }
      if (s < truth_score) ++better;
      else if (s == truth_score) ++ties;
    }
  }
  return 1.0 + double(better) + double(ties) / 2.0;
}

// Both query directions per test triple; parallel across queries with
// per-index result slots, so the aggregate is independent of thread count.
template <typename S>
EvalResult evaluate(const Matrix<S>& ent, const Matrix<S>& rel,
                    std::span<const Triple> test, std::size_t num_candidates,
                    const FilterSet* filter, std::size_t threads = 1,
                    std::vector<QueryRank>* rank_dump = nullptr) {
  if (test.empty()) throw StructuralError("evaluate: empty test set");
  const std::size_t nq = test.size() * 2;
  std::vector<double> ranks(nq);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t qi = begin; qi < end; ++qi) {
      const Triple& t = test[qi / 2];
      QueryDirection dir = qi % 2 == 0 ? QueryDirection::Tail : QueryDirection::Head;
      ranks[qi] = rank_query(dir, t, ent, rel, num_candidates, filter);
    }
  };
  if (threads <= 1) {
    worker(0, nq);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (nq + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      std::size_t begin = w * chunk;
      if (begin >= nq) break;
      pool.emplace_back(worker, begin, std::min(begin + chunk, nq));
    }
    for (auto& th : pool) th.join();
  }

  EvalResult res;
  res.query_count = nq;
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const double fr = ranks[qi];
    const std::size_t ir = integer_rank(fr);
    res.mrr += 1.0 / fr;
    if (ir <= 1) res.hits1 += 1;
    if (ir <= 10) res.hits10 += 1;
    if (rank_dump) {
      rank_dump->push_back({qi % 2 == 0 ? QueryDirection::Tail : QueryDirection::Head,
                            test[qi / 2], fr});
    }
  }
  res.mrr /= double(nq);
  res.hits1 /= double(nq);
  res.hits10 /= double(nq);
  return res;
}

// Cumulative known-true triples of snapshots 0..upto (inclusive), the filter
// for evaluating at snapshot `upto`.
inline FilterSet build_filter(const SnapshotSequence& seq, std::size_t upto) {
  FilterSet f;
  for (std::size_t i = 0; i <= upto && i < seq.size(); ++i) {
    f.add_all(seq.snapshots[i].train);
    f.add_all(seq.snapshots[i].valid);
    f.add_all(seq.snapshots[i].test);
  }
  return f;
}

}  // namespace ettckge
