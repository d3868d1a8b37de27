#include "tkgx/evaluation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tkgx {

FilterMode parse_filter_mode(std::string_view name) {
  if (name == "raw") return FilterMode::kRaw;
  if (name == "static") return FilterMode::kStatic;
  if (name == "time-aware") return FilterMode::kTimeAware;
  throw std::invalid_argument("unknown filter mode '" + std::string(name) +
                              "' (expected raw, static or time-aware)");
}

std::string_view to_string(FilterMode m) {
  switch (m) {
    case FilterMode::kRaw: return "raw";
    case FilterMode::kStatic: return "static";
    case FilterMode::kTimeAware: return "time-aware";
  }
  return "?";
}

FactIndex::FactIndex(std::span<const Dataset* const> parts) {
  for (const Dataset* d : parts) {
    for (const auto& q : d->quadruples) {
      by_time_[{q.subject, q.predicate, q.timestamp}].insert(q.object);
      by_pair_[{q.subject, q.predicate}].insert(q.object);
    }
  }
}

std::vector<EntityId> FactIndex::time_aware_filter(EntityId s, PredicateId p, Timestamp t) const {
  auto it = by_time_.find({s, p, t});
  if (it == by_time_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<EntityId> FactIndex::static_filter(EntityId s, PredicateId p) const {
  auto it = by_pair_.find({s, p});
  if (it == by_pair_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<EntityId> FactIndex::filter(FilterMode mode, EntityId s, PredicateId p,
                                        Timestamp t) const {
  switch (mode) {
    case FilterMode::kRaw: return {};
    case FilterMode::kStatic: return static_filter(s, p);
    case FilterMode::kTimeAware: return time_aware_filter(s, p, t);
  }
  return {};
}

std::size_t rank_answer(const std::map<EntityId, double>& scores, EntityId answer,
                        std::span<const EntityId> filter_set, std::size_t num_entities) {
  if (answer < 0 || static_cast<std::size_t>(answer) >= num_entities)
    throw std::out_of_range("answer entity " + std::to_string(answer) + " outside vocabulary");
  const auto found = scores.find(answer);
  if (found == scores.end()) return num_entities;
  const double target = found->second;
  std::vector<EntityId> filtered(filter_set.begin(), filter_set.end());
  std::sort(filtered.begin(), filtered.end());
  filtered.erase(std::unique(filtered.begin(), filtered.end()), filtered.end());
  auto is_filtered = [&](EntityId e) {
    return e != answer && std::binary_search(filtered.begin(), filtered.end(), e);
  };

  std::size_t better = 0;
  for (const auto& [e, s] : scores) {
    if (e == answer || is_filtered(e)) continue;
    if (s > target || (s == target && e < answer)) ++better;
  }
  if (target == 0.0) {
    // Absent entities implicitly score 0 and tie with the answer.
    std::size_t absent_smaller = static_cast<std::size_t>(answer);
    for (const auto& [e, s] : scores)
      if (e < answer) --absent_smaller;
    for (const auto e : filtered)
      if (e < answer && !scores.count(e)) --absent_smaller;
    better += absent_smaller;
  }
  return std::min(better + 1, num_entities);
}

Metrics compute_metrics(std::span<const std::size_t> ranks, std::span<const std::size_t> ks) {
  if (ranks.empty()) throw std::invalid_argument("cannot compute metrics over zero records");
  Metrics m;
  m.count = ranks.size();
  for (const auto k : ks) m.hits[k] = 0.0;
  for (const auto r : ranks) {
    if (r == 0) throw std::invalid_argument("ranks are 1-based");
    m.mrr += 1.0 / static_cast<double>(r);
    for (auto& [k, h] : m.hits)
      if (r <= k) h += 1.0;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  for (auto& [k, h] : m.hits) h /= n;
  return m;
}

std::size_t EvalRecord::rank(FilterMode m) const {
  switch (m) {
    case FilterMode::kRaw: return rank_raw;
    case FilterMode::kStatic: return rank_static;
    case FilterMode::kTimeAware: return rank_time_aware;
  }
  return rank_raw;
}

std::vector<EvalRecord> evaluate(const Model& model, const TemporalAdjacency& adj,
                                 const Dataset& split, const FactIndex& facts,
                                 const Hyperparams& hp, const EvalOptions& opts) {
  const std::size_t n = opts.limit ? std::min(opts.limit, split.size()) : split.size();
  const auto num_entities = model.dims().num_entities;
  std::vector<EvalRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = split.quadruples[i];
    const Query query{q.subject, q.predicate, q.timestamp};
    auto rng = make_query_rng(hp.sampling.seed + opts.seed_offset, i);
    const auto f = forecast(model, adj, query, hp, rng);
    const auto scores = aggregate_entity_scores(f.graph, hp.agg);
    EvalRecord r;
    r.query = query;
    r.answer = q.object;
    r.rank_raw = rank_answer(scores, q.object, {}, num_entities);
    r.rank_static =
        rank_answer(scores, q.object, facts.static_filter(q.subject, q.predicate), num_entities);
    r.rank_time_aware = rank_answer(
        scores, q.object, facts.time_aware_filter(q.subject, q.predicate, q.timestamp),
        num_entities);
    out.push_back(r);
  }
  return out;
}

Metrics summarize(std::span<const EvalRecord> records, FilterMode mode,
                  std::span<const std::size_t> ks) {
  std::vector<std::size_t> ranks;
  ranks.reserve(records.size());
  for (const auto& r : records) ranks.push_back(r.rank(mode));
  return compute_metrics(ranks, ks);
}

}  // namespace tkgx
