#pragma once

// Filtered ranking and MRR / Hits@k.

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include "tkgx/engine.hpp"
#include "tkgx/kg_store.hpp"

namespace tkgx {

enum class FilterMode { kRaw, kStatic, kTimeAware };
FilterMode parse_filter_mode(std::string_view name);
std::string_view to_string(FilterMode m);

// Lookup of known objects per (s, p, t) and per (s, p), built from every
// split so alternative true answers can be filtered out.
class FactIndex {
 public:
  FactIndex() = default;
  explicit FactIndex(std::span<const Dataset* const> parts);

  // { o' : (s, p, o', t) is a fact }
  std::vector<EntityId> time_aware_filter(EntityId s, PredicateId p, Timestamp t) const;
  // { o' : (s, p, o', t') is a fact for some t' }
  std::vector<EntityId> static_filter(EntityId s, PredicateId p) const;
  std::vector<EntityId> filter(FilterMode mode, EntityId s, PredicateId p, Timestamp t) const;

 private:
  std::map<std::tuple<EntityId, PredicateId, Timestamp>, std::set<EntityId>> by_time_;
  std::map<std::pair<EntityId, PredicateId>, std::set<EntityId>> by_pair_;
};

// rank = 1 + #(unfiltered entities scoring higher) + #(unfiltered entities
// with equal score and smaller id). Entities missing from `scores` score 0.
// An answer missing from `scores` gets rank num_entities.
std::size_t rank_answer(const std::map<EntityId, double>& scores, EntityId answer,
                        std::span<const EntityId> filter_set, std::size_t num_entities);

struct Metrics {
  std::size_t count = 0;
  double mrr = 0.0;
  std::map<std::size_t, double> hits;  // k -> fraction of ranks <= k
};

// Throws std::invalid_argument on an empty rank list.
Metrics compute_metrics(std::span<const std::size_t> ranks,
                        std::span<const std::size_t> ks = std::vector<std::size_t>{1, 3, 10});

struct EvalRecord {
  Query query;
  EntityId answer = 0;
  std::size_t rank_raw = 0;
  std::size_t rank_static = 0;
  std::size_t rank_time_aware = 0;

  std::size_t rank(FilterMode m) const;
};

struct EvalOptions {
  std::size_t limit = 0;  // 0: every quadruple
  std::uint64_t seed_offset = 0;
};

// One forecast per quadruple of `split`, which should already carry
// reciprocal quadruples so both query directions are scored.
std::vector<EvalRecord> evaluate(const Model& model, const TemporalAdjacency& adj,
                                 const Dataset& split, const FactIndex& facts,
                                 const Hyperparams& hp, const EvalOptions& opts = {});

Metrics summarize(std::span<const EvalRecord> records, FilterMode mode,
                  std::span<const std::size_t> ks = std::vector<std::size_t>{1, 3, 10});

}  // namespace tkgx
