#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ettckge/types.hpp"

namespace ettckge {

// On-disk layout: root/0/{train,valid,test}.txt .. root/(I-1)/..., one triple
// per line, three tab-separated fields.
struct DatasetLayout {
  std::filesystem::path root;
};

// Discovers snapshot directories 0..I-1, parses all splits, assigns stable
// first-appearance ids. Duplicate triples within a split are dropped with a
// warning; valid/test entities unseen in any train split so far get a warning
// and are kept.
SnapshotSequence load_sequence(const DatasetLayout& layout);

enum class GrowthMode { Entity, Relation, Fact, Hybrid };

GrowthMode parse_growth_mode(const std::string& name);
std::string growth_mode_name(GrowthMode mode);

struct GrowthSpec {
  std::size_t base_entities = 500;
  std::size_t base_relations = 20;
  std::size_t base_facts = 5000;
  double growth_rate = 0.2;  // per-snapshot compound growth
  std::size_t snapshots = 5;
  GrowthMode mode = GrowthMode::Entity;
  std::uint64_t seed = 0;
};

// Writes a synthetic growing-KG benchmark under `root` in the layout above.
// Deterministic for a fixed seed; each split is 3:1:1 within rounding. The
// generator validates its own output (mode-specific constant counts) before
// returning.
DatasetLayout generate_synthetic(const GrowthSpec& spec,
                                 const std::filesystem::path& root);

// floor(base * (1+rate)^k); the growth schedule used by the generator.
std::size_t grown_count(std::size_t base, double rate, std::size_t k);

}  // namespace ettckge
