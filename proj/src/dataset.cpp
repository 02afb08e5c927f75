#include "ettckge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "ettckge/error.hpp"
#include "ettckge/log.hpp"
#include "ettckge/rng.hpp"

namespace ettckge {

namespace fs = std::filesystem;

namespace {

struct RawTriple {
  std::string head, relation, tail;
};

std::vector<RawTriple> parse_triple_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw StructuralError("cannot open " + file.string());
  std::vector<RawTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    std::size_t t3 = t2 == std::string::npos ? std::string::npos : line.find('\t', t2 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos) {
      throw ParseError(file.string() + ":" + std::to_string(lineno) +
                       ": expected exactly 3 tab-separated fields");
    }
    out.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                   line.substr(t2 + 1)});
  }
  return out;
}

std::vector<Triple> intern_split(const std::vector<RawTriple>& raw, Vocabulary& vocab,
                                 const std::string& what) {
  std::vector<Triple> out;
  out.reserve(raw.size());
  std::unordered_set<Triple, TripleHash> seen;
  std::size_t dropped = 0;
  for (const RawTriple& r : raw) {
    Triple t{vocab.entity_id(r.head), vocab.relation_id(r.relation),
             vocab.entity_id(r.tail)};
    if (!seen.insert(t).second) {
      ++dropped;
      continue;
    }
    out.push_back(t);
  }
  if (dropped > 0) {
    log_warn(what + ": dropped " + std::to_string(dropped) + " duplicate triples");
  }
  return out;
}

}  // namespace

SnapshotSequence load_sequence(const DatasetLayout& layout) {
  if (!fs::is_directory(layout.root)) {
    throw StructuralError("dataset root not a directory: " + layout.root.string());
  }
  // Snapshot directories must be 0..I-1 with no gaps.
  std::vector<std::size_t> found;
  for (const auto& entry : fs::directory_iterator(layout.root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(),
                                     [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    found.push_back(std::stoul(name));
  }
  if (found.empty()) throw StructuralError("no snapshot directories under " + layout.root.string());
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i] != i) {
      throw StructuralError("snapshot directories must be consecutive from 0; missing " +
                            std::to_string(i));
    }
  }

  SnapshotSequence seq;
  std::unordered_set<Id> train_entities_seen;
  for (std::size_t i = 0; i < found.size(); ++i) {
    const fs::path dir = layout.root / std::to_string(i);
    SnapshotGraph snap;
    snap.index = i;
    snap.train = intern_split(parse_triple_file(dir / "train.txt"), seq.vocab,
                              dir.string() + "/train.txt");
    snap.valid = intern_split(parse_triple_file(dir / "valid.txt"), seq.vocab,
                              dir.string() + "/valid.txt");
    snap.test = intern_split(parse_triple_file(dir / "test.txt"), seq.vocab,
                             dir.string() + "/test.txt");
    if (snap.train.empty()) {
      throw StructuralError("snapshot " + std::to_string(i) +
                            ": empty train split (no trainable facts)");
    }
    snap.num_entities = seq.vocab.entity_count();
    snap.num_relations = seq.vocab.relation_count();

    for (const Triple& t : snap.train) {
      train_entities_seen.insert(t.head);
      train_entities_seen.insert(t.tail);
    }
    std::size_t unseen = 0;
    for (const std::vector<Triple>* split : {&snap.valid, &snap.test}) {
      for (const Triple& t : *split) {
        if (!train_entities_seen.count(t.head) || !train_entities_seen.count(t.tail)) ++unseen;
      }
    }
    if (unseen > 0) {
      log_warn("snapshot " + std::to_string(i) + ": " + std::to_string(unseen) +
               " valid/test triples reference entities unseen in any train split so far");
    }
    seq.snapshots.push_back(std::move(snap));
  }

  for (const SnapshotGraph& s : seq.snapshots) {
    log_info("snapshot " + std::to_string(s.index) + ": train=" +
             std::to_string(s.train.size()) + " valid=" + std::to_string(s.valid.size()) +
             " test=" + std::to_string(s.test.size()) + " N_E=" +
             std::to_string(s.num_entities) + " N_R=" + std::to_string(s.num_relations));
  }
  return seq;
}

GrowthMode parse_growth_mode(const std::string& name) {
  if (name == "entity") return GrowthMode::Entity;
  if (name == "relation") return GrowthMode::Relation;
  if (name == "fact") return GrowthMode::Fact;
  if (name == "hybrid") return GrowthMode::Hybrid;
  throw ParseError("unknown growth mode: " + name);
}

std::string growth_mode_name(GrowthMode mode) {
  switch (mode) {
    case GrowthMode::Entity: return "entity";
    case GrowthMode::Relation: return "relation";
    case GrowthMode::Fact: return "fact";
    case GrowthMode::Hybrid: return "hybrid";
  }
  return "?";
}

std::size_t grown_count(std::size_t base, double rate, std::size_t k) {
  return std::size_t(double(base) * std::pow(1.0 + rate, double(k)));
}

namespace {

// Generator-local triple over its own dense numbering; the loader reassigns
// ids by first appearance, which preserves the growth structure.
struct GenTriple {
  std::size_t h, r, t;
  bool operator==(const GenTriple&) const = default;
};
struct GenTripleHash {
  std::size_t operator()(const GenTriple& t) const {
    return std::size_t(splitmix64((std::uint64_t(t.h) << 40) ^ (std::uint64_t(t.r) << 20) ^ t.t));
  }
};

void write_split(const fs::path& file, const std::vector<GenTriple>& triples) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw StructuralError("cannot write " + file.string());
  for (const GenTriple& t : triples) {
    out << "e" << t.h << "\tr" << t.r << "\te" << t.t << "\n";
  }
}

}  // namespace

DatasetLayout generate_synthetic(const GrowthSpec& spec, const fs::path& root) {
  if (spec.base_entities == 0 || spec.base_relations == 0 || spec.base_facts == 0 ||
      spec.snapshots == 0) {
    throw StructuralError("growth spec counts must be positive");
  }
  if (spec.base_facts < spec.base_entities) {
    throw StructuralError("base facts must be >= base entities (every entity must appear)");
  }

  const bool grow_e = spec.mode == GrowthMode::Entity || spec.mode == GrowthMode::Hybrid;
  const bool grow_r = spec.mode == GrowthMode::Relation || spec.mode == GrowthMode::Hybrid;

  // Planted structure so the benchmark is learnable: entities hash to latent
  // clusters and each relation links one fixed head cluster to one fixed tail
  // cluster. That makes every relation a single translation between cluster
  // centroids, so held-out facts carry signal instead of noise. (A per-head
  // cyclic cluster shift would not work: modular shifts are not realizable by
  // translations in Euclidean space.)
  const std::size_t nclusters = std::min(
      std::clamp<std::size_t>(spec.base_entities / 20, std::size_t(2), std::size_t(25)),
      spec.base_relations);
  auto cluster = [&](std::size_t e) {
    return std::size_t(splitmix64(spec.seed ^ 0xc10c10ULL ^ std::uint64_t(e))) % nclusters;
  };
  // Every cluster gets at least one outgoing relation, so every entity can
  // appear as a head of a structured triple.
  auto head_cluster = [&](std::size_t r) { return r % nclusters; };
  auto tail_cluster = [&](std::size_t r) {
    return std::size_t(splitmix64(spec.seed ^ 0x5f1f7ULL ^ std::uint64_t(r))) % nclusters;
  };

  std::unordered_set<GenTriple, GenTripleHash> all;
  std::size_t total_facts = 0;
  fs::create_directories(root);

  for (std::size_t k = 0; k < spec.snapshots; ++k) {
    const std::size_t ne = grow_e ? grown_count(spec.base_entities, spec.growth_rate, k)
                                  : spec.base_entities;
    const std::size_t nr = grow_r ? grown_count(spec.base_relations, spec.growth_rate, k)
                                  : spec.base_relations;
    const std::size_t ne_prev = k == 0 ? 0
                                : grow_e ? grown_count(spec.base_entities, spec.growth_rate, k - 1)
                                         : spec.base_entities;
    const std::size_t nr_prev = k == 0 ? 0
                                : grow_r ? grown_count(spec.base_relations, spec.growth_rate, k - 1)
                                         : spec.base_relations;
    const std::size_t facts =
        k == 0 ? spec.base_facts
               : grown_count(spec.base_facts, spec.growth_rate, k) -
                     grown_count(spec.base_facts, spec.growth_rate, k - 1);

    total_facts += facts;

    auto rng = make_engine(spec.seed, 0x5eed5, k);
    auto uniform = [&rng](std::size_t n) {
      return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    };

    std::vector<std::vector<std::size_t>> members(nclusters);
    for (std::size_t e = 0; e < ne; ++e) members[cluster(e)].push_back(e);
    std::vector<std::vector<std::size_t>> out_rels(nclusters), in_rels(nclusters);
    for (std::size_t r = 0; r < nr; ++r) {
      out_rels[head_cluster(r)].push_back(r);
      in_rels[tail_cluster(r)].push_back(r);
    }

    std::size_t capacity = 0;
    for (std::size_t r = 0; r < nr; ++r) {
      capacity += members[head_cluster(r)].size() * members[tail_cluster(r)].size();
    }
    if (total_facts > capacity) {
      throw StructuralError("growth spec saturates the triple space at snapshot " +
                            std::to_string(k));
    }

    auto pick = [&](const std::vector<std::size_t>& pool) { return pool[uniform(pool.size())]; };
    // Within a cluster, popularity follows a harmonic profile over member rank:
    // a few entities carry most facts, the rest are rare. New snapshots attach
    // fresh entities to the rare end, so the entities under pressure to move
    // are not the ones the earlier snapshots depend on.
    auto pick_harmonic = [&](const std::vector<std::size_t>& pool, bool rare_end) {
      double total = 0;
      for (std::size_t i = 0; i < pool.size(); ++i) total += 1.0 / double(1 + i);
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      std::size_t i = 0;
      for (; i + 1 < pool.size(); ++i) {
        u -= 1.0 / double(1 + i);
        if (u < 0) break;
      }
      return pool[rare_end ? pool.size() - 1 - i : i];
    };
    auto sample_triple = [&](std::size_t r) {
      const auto& hs = members[head_cluster(r)];
      const auto& ts = members[tail_cluster(r)];
      if (hs.empty() || ts.empty()) return GenTriple{uniform(ne), r, uniform(ne)};
      return GenTriple{pick_harmonic(hs, false), r, pick_harmonic(ts, false)};
    };
    auto triple_with_head = [&](std::size_t h, bool rare_partner) {
      const std::size_t r = pick(out_rels[cluster(h)]);
      const auto& ts = members[tail_cluster(r)];
      return GenTriple{h, r, ts.empty() ? uniform(ne) : pick_harmonic(ts, rare_partner)};
    };
    auto triple_with_tail = [&](std::size_t t, bool rare_partner) {
      const auto& pool = in_rels[cluster(t)];
      if (pool.empty()) return triple_with_head(t, rare_partner);
      const std::size_t r = pick(pool);
      const auto& hs = members[head_cluster(r)];
      return GenTriple{hs.empty() ? uniform(ne) : pick_harmonic(hs, rare_partner), r, t};
    };

    std::vector<GenTriple> triples;
    triples.reserve(facts);
    auto emit = [&](GenTriple t) {
      if (all.insert(t).second) {
        triples.push_back(t);
        return true;
      }
      return false;
    };

    // Coverage facts first: every entity/relation new to this snapshot must
    // appear, and they land in the train split.
    if (k == 0) {
      for (std::size_t e = 0; e < ne; ++e) {
        for (int attempt = 0;; ++attempt) {
          if (attempt > 10000) throw StructuralError("generator stuck covering entities");
          if (emit(triple_with_head(e, false))) break;
        }
      }
      for (std::size_t r = 0; r < nr; ++r) {
        for (int attempt = 0;; ++attempt) {
          if (attempt > 10000) throw StructuralError("generator stuck covering relations");
          if (emit(sample_triple(r))) break;
        }
      }
    } else {
      for (std::size_t e = ne_prev; e < ne; ++e) {
        for (int attempt = 0;; ++attempt) {
          if (attempt > 10000) throw StructuralError("generator stuck covering entities");
          GenTriple t = rng() & 1 ? triple_with_head(e, true) : triple_with_tail(e, true);
          if (emit(t)) break;
        }
      }
      for (std::size_t r = nr_prev; r < nr; ++r) {
        for (int attempt = 0;; ++attempt) {
          if (attempt > 10000) throw StructuralError("generator stuck covering relations");
          if (emit(sample_triple(r))) break;
        }
      }
    }
    const std::size_t coverage_count = triples.size();
    if (triples.size() > facts) {
      throw StructuralError("snapshot " + std::to_string(k) +
                            ": fact budget too small for coverage (" +
                            std::to_string(triples.size()) + " > " + std::to_string(facts) + ")");
    }

    // Remaining facts. Growth modes bias sampling so the new structure is what
    // the snapshot is actually about: entity growth attaches new entities,
    // relation growth exercises new relations.
    std::size_t stall = 0;
    while (triples.size() < facts) {
      GenTriple t;
      switch (spec.mode) {
        case GrowthMode::Entity: {
          if (k == 0) {
            t = sample_triple(uniform(nr));
          } else {
            const std::size_t fresh = ne_prev + uniform(ne - ne_prev);
            t = rng() & 1 ? triple_with_head(fresh, true) : triple_with_tail(fresh, true);
          }
          break;
        }
        case GrowthMode::Relation: {
          const std::size_t r = (k > 0 && (rng() & 1)) ? nr_prev + uniform(nr - nr_prev)
                                                       : uniform(nr);
          t = sample_triple(r);
          break;
        }
        case GrowthMode::Fact: {
          t = sample_triple(uniform(nr));
          break;
        }
        case GrowthMode::Hybrid: {
          if (k > 0 && rng() % 4 == 0) {
            t = sample_triple(nr_prev + uniform(nr - nr_prev));
          } else if (k > 0 && (rng() & 1)) {
            t = triple_with_head(ne_prev + uniform(ne - ne_prev), true);
          } else {
            t = sample_triple(uniform(nr));
          }
          break;
        }
      }
      if (emit(t)) stall = 0;
      else if (++stall > 100000) {
        throw StructuralError("generator stalled at snapshot " + std::to_string(k) +
                              ": structured triple space too dense for the fact budget");
      }
    }

    // 3:1:1 split. Coverage facts stay at the front so they land in train;
    // only the tail is shuffled.
    const std::size_t n = triples.size();
    const std::size_t n_train = std::size_t(std::llround(0.6 * double(n)));
    const std::size_t n_valid = (n - n_train) / 2;
    std::shuffle(triples.begin() + std::ptrdiff_t(coverage_count), triples.end(), rng);
    const fs::path dir = root / std::to_string(k);
    fs::create_directories(dir);
    write_split(dir / "train.txt", {triples.begin(), triples.begin() + std::ptrdiff_t(n_train)});
    write_split(dir / "valid.txt",
                {triples.begin() + std::ptrdiff_t(n_train),
                 triples.begin() + std::ptrdiff_t(n_train + n_valid)});
    write_split(dir / "test.txt", {triples.begin() + std::ptrdiff_t(n_train + n_valid), triples.end()});
  }

  DatasetLayout layout{root};

  // Generator self-check: reload and assert the mode's constant-count claims.
  SnapshotSequence seq = load_sequence(layout);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const SnapshotGraph& s = seq.snapshots[k];
    const std::size_t want_e = grow_e ? grown_count(spec.base_entities, spec.growth_rate, k)
                                      : spec.base_entities;
    const std::size_t want_r = grow_r ? grown_count(spec.base_relations, spec.growth_rate, k)
                                      : spec.base_relations;
    if (s.num_entities != want_e || s.num_relations != want_r) {
      throw StructuralError("generator validator: snapshot " + std::to_string(k) +
                            " counts N_E=" + std::to_string(s.num_entities) + " N_R=" +
                            std::to_string(s.num_relations) + ", expected N_E=" +
                            std::to_string(want_e) + " N_R=" + std::to_string(want_r));
    }
  }
  return layout;
}

}  // namespace ettckge
