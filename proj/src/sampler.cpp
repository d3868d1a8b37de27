#include "tkgx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace tkgx {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SamplingStrategy parse_sampling_strategy(std::string_view name) {
  if (name == "uniform") return SamplingStrategy::kUniform;
  if (name == "exp-weighted" || name == "exp") return SamplingStrategy::kExpWeighted;
  if (name == "linear-weighted" || name == "linear") return SamplingStrategy::kLinearWeighted;
  if (name == "last-n") return SamplingStrategy::kLastN;
  throw std::invalid_argument("unknown sampling strategy '" + std::string(name) + "'");
}

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::kUniform: return "uniform";
    case SamplingStrategy::kExpWeighted: return "exp-weighted";
    case SamplingStrategy::kLinearWeighted: return "linear-weighted";
    case SamplingStrategy::kLastN: return "last-n";
  }
  return "?";
}

Rng make_query_rng(std::uint64_t seed, std::uint64_t query_index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(query_index + 0x51ed2701ULL)));
}

double log_sampling_weight(SamplingStrategy s, Timestamp edge_time, Timestamp node_time,
                           Timestamp t_min) {
  switch (s) {
    case SamplingStrategy::kUniform:
    case SamplingStrategy::kLastN:
      return 0.0;
    case SamplingStrategy::kExpWeighted:
      return static_cast<double>(edge_time - node_time);
    case SamplingStrategy::kLinearWeighted:
      return std::log(1.0 + static_cast<double>(edge_time - t_min));
  }
  return 0.0;
}

std::vector<std::size_t> sample_prior_edges(std::span<const PriorEdge> edges,
                                            Timestamp node_time, const SamplingConfig& cfg,
                                            Rng& rng) {
  if (cfg.budget == 0) throw std::invalid_argument("sampling budget must be >= 1");
  std::vector<std::size_t> idx(edges.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (edges.size() <= cfg.budget) return idx;

  if (cfg.strategy == SamplingStrategy::kLastN) {
    // Most recent first; among equal times prefer smaller (predicate, neighbor).
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = edges[a];
      const auto& y = edges[b];
      if (x.timestamp != y.timestamp) return x.timestamp > y.timestamp;
      return std::tie(x.predicate, x.neighbor) < std::tie(y.predicate, y.neighbor);
    });
  } else {
    Timestamp t_min = edges.front().timestamp;
    for (const auto& e : edges) t_min = std::min(t_min, e.timestamp);
    // Gumbel top-k: keys log w + G are ordered like successive draws without
    // replacement from the renormalized weights.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> key(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      double u = unif(rng);
      while (u <= 0.0) u = unif(rng);
      key[i] = log_sampling_weight(cfg.strategy, edges[i].timestamp, node_time, t_min) -
               std::log(-std::log(u));
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  }
  idx.resize(cfg.budget);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<NeighborNode> collapse_to_neighbors(std::span<const PriorEdge> sampled) {
  std::vector<NeighborNode> nodes;
  for (const auto& e : sampled) {
    const NeighborNode n{e.neighbor, e.timestamp};
    if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
  }
  return nodes;
}

}  // namespace tkgx
