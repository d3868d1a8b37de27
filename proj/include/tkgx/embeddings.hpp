#pragma once

// Time-aware entity representations [static row || Phi(t)] and stationary
// predicate embeddings. Everything is f64.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tkgx/autodiff.hpp"
#include "tkgx/kg_store.hpp"
#include "tkgx/parameters.hpp"

namespace tkgx {

namespace param_names {
inline constexpr const char* kEntityStatic = "entity_static";
inline constexpr const char* kPredicate = "pred";
inline constexpr const char* kTimeFreq = "time_freq";
inline constexpr const char* kTimePhase = "time_phase";
inline constexpr const char* kInputW = "input_w";
inline constexpr const char* kInputB = "input_b";
}  // namespace param_names

struct EmbeddingDims {
  std::size_t num_entities = 0;
  std::size_t num_predicates = 0;  // after reciprocal augmentation
  std::size_t dim_static = 32;     // d_S
  std::size_t dim_time = 32;       // d_T
  std::size_t dim() const { return dim_static + dim_time; }
};

// Adds and initializes entity_static, pred, time_freq, time_phase.
// Rows ~ U(-1/sqrt(d), 1/sqrt(d)); frequencies geometric over [1/t_max, 1];
// phases 0.
void init_embedding_tables(ParameterSet& params, const EmbeddingDims& dims, Timestamp t_max,
                           std::uint64_t seed);

// Phi(t)_j = sqrt(1/d_T) cos(freq_j t + phase_j)
std::vector<double> time_encoding(const Parameter& freq, const Parameter& phase, double t);

std::vector<double> entity_embedding(const ParameterSet& params, EntityId e, Timestamp t);
std::vector<double> predicate_embedding(const ParameterSet& params, PredicateId p);

ad::Var entity_embedding(ad::Tape& tape, ParameterSet& params, EntityId e, Timestamp t);
ad::Var predicate_embedding(ad::Tape& tape, ParameterSet& params, PredicateId p);

}  // namespace tkgx
