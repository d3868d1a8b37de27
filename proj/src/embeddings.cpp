#include "tkgx/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tkgx {

void init_embedding_tables(ParameterSet& params, const EmbeddingDims& dims, Timestamp t_max,
                           std::uint64_t seed) {
  if (dims.dim_static == 0 && dims.dim_time == 0)
    throw std::invalid_argument("embedding dimension must be positive");
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.dim()));
  std::uniform_real_distribution<double> unif(-bound, bound);

  auto& ent = params.add(param_names::kEntityStatic, dims.num_entities, dims.dim_static);
  for (auto& v : ent.value) v = unif(rng);
  auto& pred = params.add(param_names::kPredicate, dims.num_predicates, dims.dim());
  for (auto& v : pred.value) v = unif(rng);

  auto& freq = params.add(param_names::kTimeFreq, 1, dims.dim_time);
  params.add(param_names::kTimePhase, 1, dims.dim_time);
  const double lo = 1.0 / static_cast<double>(std::max<Timestamp>(t_max, 1));
  for (std::size_t j = 0; j < dims.dim_time; ++j) {
    const double frac =
        dims.dim_time == 1 ? 1.0 : static_cast<double>(j) / static_cast<double>(dims.dim_time - 1);
    freq.value[j] = std::pow(lo, 1.0 - frac);
  }
}

std::vector<double> time_encoding(const Parameter& freq, const Parameter& phase, double t) {
  if (freq.size() != phase.size()) throw std::invalid_argument("time encoding shape mismatch");
  const double amp = std::sqrt(1.0 / static_cast<double>(freq.size()));
  std::vector<double> out(freq.size());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = amp * std::cos(freq.value[j] * t + phase.value[j]);
  return out;
}

std::vector<double> entity_embedding(const ParameterSet& params, EntityId e, Timestamp t) {
  const auto& ent = params.get(param_names::kEntityStatic);
  if (e < 0 || static_cast<std::size_t>(e) >= ent.rows)
    throw std::out_of_range("entity id " + std::to_string(e) + " out of range");
  const auto row = ent.row(static_cast<std::size_t>(e));
  std::vector<double> out(row.begin(), row.end());
  const auto phi = time_encoding(params.get(param_names::kTimeFreq),
                                 params.get(param_names::kTimePhase), static_cast<double>(t));
  out.insert(out.end(), phi.begin(), phi.end());
  return out;
}

std::vector<double> predicate_embedding(const ParameterSet& params, PredicateId p) {
  const auto& pred = params.get(param_names::kPredicate);
  if (p < 0 || static_cast<std::size_t>(p) >= pred.rows)
    throw std::out_of_range("predicate id " + std::to_string(p) + " out of range");
  const auto row = pred.row(static_cast<std::size_t>(p));
  return {row.begin(), row.end()};
}

ad::Var entity_embedding(ad::Tape& tape, ParameterSet& params, EntityId e, Timestamp t) {
  auto& ent = params.get(param_names::kEntityStatic);
  if (e < 0 || static_cast<std::size_t>(e) >= ent.rows)
    throw std::out_of_range("entity id " + std::to_string(e) + " out of range");
  const ad::Var parts[] = {
      tape.param_row(ent, static_cast<std::size_t>(e)),
      tape.time_encoding(params.get(param_names::kTimeFreq), params.get(param_names::kTimePhase),
                         static_cast<double>(t))};
  return tape.concat(parts);
}

ad::Var predicate_embedding(ad::Tape& tape, ParameterSet& params, PredicateId p) {
  auto& pred = params.get(param_names::kPredicate);
  if (p < 0 || static_cast<std::size_t>(p) >= pred.rows)
    throw std::out_of_range("predicate id " + std::to_string(p) + " out of range");
  return tape.param_row(pred, static_cast<std::size_t>(p));
}

}  // namespace tkgx
