#pragma once

// Small hand-built knowledge graphs shared by the unit and acceptance tests.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "tkgx/engine.hpp"
#include "tkgx/kg_store.hpp"

namespace tkgx::toy {

using Fact = std::tuple<EntityId, PredicateId, EntityId, Timestamp>;

inline std::shared_ptr<Vocab> make_vocab(std::size_t entities, std::size_t predicates) {
  auto v = std::make_shared<Vocab>();
  for (std::size_t i = 0; i < entities; ++i) v->entities.intern("e" + std::to_string(i));
  for (std::size_t i = 0; i < predicates; ++i) v->predicates.intern("p" + std::to_string(i));
  return v;
}

inline Dataset make_dataset(const std::vector<Fact>& facts, std::shared_ptr<Vocab> vocab) {
  Dataset d;
  d.vocab = std::move(vocab);
  for (const auto& [s, p, o, t] : facts) d.quadruples.push_back({s, p, o, t});
  return d;
}

struct Kg {
  std::shared_ptr<Vocab> vocab;
  Dataset data;  // augmented
  TemporalAdjacency adj;
};

inline Kg make_kg(const std::vector<Fact>& facts, std::size_t entities, std::size_t predicates,
                  bool augment = true) {
  Kg kg;
  kg.vocab = make_vocab(entities, predicates);
  kg.data = make_dataset(facts, kg.vocab);
  if (augment) kg.data = augment_reciprocal(kg.data);
  const Dataset* parts[] = {&kg.data};
  kg.adj = TemporalAdjacency::from_datasets(parts);
  return kg;
}

inline std::vector<Fact> random_facts(std::size_t n, std::size_t entities, std::size_t predicates,
                                      Timestamp t_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(entities) - 1);
  std::uniform_int_distribution<PredicateId> pred(0, static_cast<PredicateId>(predicates) - 1);
  std::uniform_int_distribution<Timestamp> time(0, t_max);
  std::vector<Fact> facts;
  while (facts.size() < n) {
    const auto s = ent(rng);
    auto o = ent(rng);
    if (o == s) continue;
    facts.emplace_back(s, pred(rng), o, time(rng));
  }
  return facts;
}

inline ModelDims small_dims(const Vocab& v, std::size_t ds = 4, std::size_t dt = 3) {
  ModelDims d;
  d.num_entities = v.num_entities();
  d.num_predicates = v.num_predicates();
  d.dim_static = ds;
  d.dim_time = dt;
  return d;
}

// Rule-governed KG: every (s, r_k, o, t) is followed by (s, r'_k, o, t+1).
// Predicates 0..rules-1 are triggers, rules..2*rules-1 their consequences and
// the rest are noise. Each subject fires at most one trigger per timestamp.
struct RuleKg {
  std::vector<Fact> train, valid, test;
  std::size_t entities = 0;
  std::size_t predicates = 0;
};

inline RuleKg make_rule_kg(std::size_t entities, std::size_t facts, std::size_t rules,
                           std::size_t noise_predicates, Timestamp t_valid, Timestamp t_test,
                           Timestamp t_end, std::uint64_t seed) {
  RuleKg kg;
  kg.entities = entities;
  kg.predicates = 2 * rules + noise_predicates;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(entities) - 1);
  std::uniform_int_distribution<PredicateId> rule(0, static_cast<PredicateId>(rules) - 1);
  std::uniform_int_distribution<Timestamp> when(0, t_end - 1);
  std::vector<Fact> all;
  std::vector<std::tuple<EntityId, Timestamp>> fired;
  auto add = [&](const Fact& f) {
    const auto t = std::get<3>(f);
    if (t < t_valid) kg.train.push_back(f);
    else if (t < t_test) kg.valid.push_back(f);
    else kg.test.push_back(f);
    all.push_back(f);
  };
  std::size_t guard = 0;
  while (all.size() + 2 <= facts && guard++ < 100 * facts) {
    const auto s = ent(rng);
    const auto t = when(rng);
    if (std::find(fired.begin(), fired.end(), std::make_tuple(s, t)) != fired.end()) continue;
    if (std::find(fired.begin(), fired.end(), std::make_tuple(s, t + 1)) != fired.end()) continue;
    if (std::find(fired.begin(), fired.end(), std::make_tuple(s, t - 1)) != fired.end()) continue;
    auto o = ent(rng);
    if (o == s) continue;
    const auto r = rule(rng);
    fired.emplace_back(s, t);
    add({s, r, o, t});
    add({s, r + static_cast<PredicateId>(rules), o, t + 1});
    if (noise_predicates > 0 && all.size() < facts) {
      std::uniform_int_distribution<PredicateId> noise(
          static_cast<PredicateId>(2 * rules), static_cast<PredicateId>(kg.predicates) - 1);
      auto o2 = ent(rng);
      if (o2 != s) add({s, noise(rng), o2, t});
    }
  }
  return kg;
}

}  // namespace tkgx::toy
