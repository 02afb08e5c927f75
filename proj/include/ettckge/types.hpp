#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ettckge/error.hpp"

namespace ettckge {

using Id = std::uint32_t;

// The atomic fact (h, r, t).
struct Triple {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t k = (std::uint64_t(t.head) << 32) ^ (std::uint64_t(t.relation) << 16) ^ t.tail;
    k *= 0x9e3779b97f4a7c15ULL;
    return std::size_t(k ^ (k >> 29));
  }
};

// Name <-> dense id maps shared across the whole snapshot sequence. Ids are
// assigned in first-appearance order (train, valid, test, snapshots in order)
// and never change once assigned, so every later snapshot sees earlier ids as
// a contiguous prefix.
class Vocabulary {
 public:
  Id entity_id(const std::string& name) {
    return intern(name, entity_ids_, entity_names_);
  }
  Id relation_id(const std::string& name) {
    return intern(name, relation_ids_, relation_names_);
  }

  // Lookup without interning; throws if absent.
  Id resolve_entity(const std::string& name) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) throw StructuralError("unknown entity: " + name);
    return it->second;
  }
  Id resolve_relation(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) throw StructuralError("unknown relation: " + name);
    return it->second;
  }

  std::size_t entity_count() const { return entity_names_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }

  const std::string& entity_name(Id id) const { return entity_names_.at(id); }
  const std::string& relation_name(Id id) const { return relation_names_.at(id); }

 private:
  static Id intern(const std::string& name,
                   std::unordered_map<std::string, Id>& ids,
                   std::vector<std::string>& names) {
    auto [it, inserted] = ids.emplace(name, Id(names.size()));
    if (inserted) names.push_back(name);
    return it->second;
  }

  std::unordered_map<std::string, Id> entity_ids_;
  std::unordered_map<std::string, Id> relation_ids_;
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
};

// A static KG at step i of the growing sequence. Counts are cumulative: they
// cover every entity/relation seen in snapshots 0..i.
struct SnapshotGraph {
  std::size_t index = 0;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  std::size_t num_entities = 0;   // N_E(i), cumulative
  std::size_t num_relations = 0;  // N_R(i), cumulative
};

struct SnapshotSequence {
  std::vector<SnapshotGraph> snapshots;
  Vocabulary vocab;

  std::size_t size() const { return snapshots.size(); }
};

struct IdRange {
  Id begin = 0;
  Id end = 0;  // half-open

  std::size_t size() const { return end - begin; }
};

struct OverlapIds {
  IdRange entities;
  IdRange relations;
};

// Ids present in both consecutive snapshots. With stable first-appearance ids
// the overlap is exactly the prefix [0, N(prev)).
inline OverlapIds overlap_ids(const SnapshotGraph& prev, const SnapshotGraph& cur) {
  if (prev.index + 1 != cur.index) {
    throw ContractError("overlap_ids: snapshots not consecutive (" +
                        std::to_string(prev.index) + " -> " +
                        std::to_string(cur.index) + ")");
  }
  if (cur.num_entities < prev.num_entities || cur.num_relations < prev.num_relations) {
    throw StructuralError("overlap_ids: vocabulary shrank between snapshots");
  }
  return {{0, Id(prev.num_entities)}, {0, Id(prev.num_relations)}};
}

}  // namespace ettckge
