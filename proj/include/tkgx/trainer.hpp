#pragma once

// BCE over inference-graph entities, Adam, and the epoch loop with
// best-on-valid checkpoint selection.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tkgx/autodiff.hpp"
#include "tkgx/engine.hpp"
#include "tkgx/evaluation.hpp"
#include "tkgx/kg_store.hpp"
#include "tkgx/parameters.hpp"

namespace tkgx {

struct TrainingConfig {
  double lr = 2e-4;
  std::size_t batch = 128;
  std::size_t epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool skip_missing_answer = false;
  std::size_t valid_limit = 0;  // 0: score the full validation split

  void validate() const;
};

inline constexpr double kScoreClamp = 1e-12;

// Scores of one query's inference-graph entities and their 0/1 labels.
struct QueryTerms {
  ad::Var scores;
  std::vector<double> labels;
};

// Mean over queries of the mean per-entity BCE of normalized scores.
// Queries with no entities, or with zero total mass, are left out of the
// outer mean. Throws if nothing is left.
ad::Var bce_loss(ad::Tape& tape, std::span<const QueryTerms> queries);

// Plain-value version of the same loss.
double bce_loss(std::span<const std::vector<double>> scores,
                std::span<const std::vector<double>> labels);

class Adam {
 public:
  explicit Adam(const TrainingConfig& cfg) : cfg_(cfg) {}
  void step(ParameterSet& params);
  std::size_t steps_taken() const { return t_; }

 private:
  TrainingConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

struct BatchLoss {
  double loss = 0.0;
  std::size_t queries_used = 0;
};

// Forward + backward for one batch of training quadruples. Gradients are
// accumulated into model.params(); they are not zeroed first.
BatchLoss accumulate_batch_gradients(Model& model, const TemporalAdjacency& adj,
                                     std::span<const Quadruple> batch, const Hyperparams& hp,
                                     const TrainingConfig& cfg, std::uint64_t rng_stream);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_mrr = 0.0;
  double valid_hits1 = 0.0;
};

struct FitResult {
  std::vector<double> batch_losses;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters
  double best_valid_mrr = -1.0;
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains in place; on return the model holds the best-on-valid parameters
// (or the last finite ones if training diverged).
FitResult fit(Model& model, const TemporalAdjacency& adj, const Dataset& train,
              const Dataset& valid, const FactIndex& facts, const Hyperparams& hp,
              const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace tkgx
