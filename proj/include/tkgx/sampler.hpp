#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "tkgx/kg_store.hpp"

namespace tkgx {

enum class SamplingStrategy { kUniform, kExpWeighted, kLinearWeighted, kLastN };

SamplingStrategy parse_sampling_strategy(std::string_view name);
std::string_view to_string(SamplingStrategy s);

struct SamplingConfig {
  SamplingStrategy strategy = SamplingStrategy::kExpWeighted;
  std::size_t budget = 32;  // N
  std::uint64_t seed = 0;
};

using Rng = std::mt19937_64;

// Independent stream per (seed, query index) so results never depend on batch
// order.
Rng make_query_rng(std::uint64_t seed, std::uint64_t query_index);

// Unnormalized log-weight of a prior edge at time t' for a node at time t.
// t_min is the oldest timestamp among the candidate edges.
double log_sampling_weight(SamplingStrategy s, Timestamp edge_time, Timestamp node_time,
                           Timestamp t_min);

// Selects min(N, |edges|) distinct edges. Weighted strategies are sequential
// draws without replacement with renormalization (realized as Gumbel top-k,
// which has the same law). Returns indices into `edges`, ascending.
std::vector<std::size_t> sample_prior_edges(std::span<const PriorEdge> edges,
                                            Timestamp node_time, const SamplingConfig& cfg,
                                            Rng& rng);

struct NeighborNode {
  EntityId entity = 0;
  Timestamp timestamp = 0;
  friend bool operator==(const NeighborNode&, const NeighborNode&) = default;
  friend auto operator<=>(const NeighborNode&, const NeighborNode&) = default;
};

// Distinct (neighbor, t') pairs among the sampled edges, in first-appearance
// order.
std::vector<NeighborNode> collapse_to_neighbors(std::span<const PriorEdge> sampled);

}  // namespace tkgx
