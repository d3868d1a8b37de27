#pragma once

// Query-dependent subgraph reasoning.
//
// For a query (e_q, p_q, ?, t_q) the engine grows an inference graph whose
// nodes are (entity, timestamp) pairs, starting from (e_q, t_q). Each of the L
// steps runs:
//
//   expand         sample prior edges of every node not yet expanded
//   reverse update score edges with the bilinear query-conditioned attention,
//                  softmax per source node, then update hiddens in reverse
//                  order of insertion so messages from the newest nodes reach
//                  the query node within the same step
//   propagate      a^l(u) = sum over posterior v of alpha(v,u) * a^{l-1}(v)
//   prune          keep the K new edges with the largest contributions
//
// Entity scores are the per-entity sum (or mean) of final node attention.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "tkgx/autodiff.hpp"
#include "tkgx/embeddings.hpp"
#include "tkgx/kg_store.hpp"
#include "tkgx/parameters.hpp"
#include "tkgx/sampler.hpp"

namespace tkgx {

struct Query {
  EntityId subject = 0;
  PredicateId predicate = 0;
  Timestamp time = 0;
};

enum class ScoreAggregation { kSum, kMean };
ScoreAggregation parse_score_aggregation(std::string_view name);
std::string_view to_string(ScoreAggregation a);

struct Hyperparams {
  std::size_t steps = 3;     // L
  std::size_t prune_k = 64;  // K, edges kept per step
  double gamma = 0.5;        // self vs. neighbourhood mixing
  double leaky_slope = 0.01;
  ScoreAggregation agg = ScoreAggregation::kSum;
  bool reverse_update = true;
  SamplingConfig sampling;

  void validate() const;
};

struct ModelDims : EmbeddingDims {
  std::size_t dim_attention = 0;  // rows of W_sub / W_obj; 0 means dim()
  std::size_t attention_dim() const { return dim_attention ? dim_attention : dim(); }
};

// All trainable tensors of the reasoner.
class Model {
 public:
  struct StepWeights {
    Parameter& w_sub;
    Parameter& w_obj;
    Parameter& w_h;
    Parameter& b_h;
  };

  Model() = default;
  // Allocates every tensor with zeros.
  Model(const ModelDims& dims, std::size_t steps);
  static Model initialized(const ModelDims& dims, std::size_t steps, Timestamp t_max,
                           std::uint64_t seed);
  // Infers dims and step count from tensor shapes.
  static Model from_parameters(ParameterSet params);

  const ModelDims& dims() const { return dims_; }
  std::size_t steps() const { return steps_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  StepWeights step(std::size_t l);  // 1 <= l <= steps()
  Parameter& input_w() { return params_.get(param_names::kInputW); }
  Parameter& input_b() { return params_.get(param_names::kInputB); }

  static std::string step_param(std::size_t l, std::string_view what);

 private:
  ModelDims dims_;
  std::size_t steps_ = 0;
  ParameterSet params_;
};

struct InferenceNode {
  EntityId entity = 0;
  Timestamp timestamp = 0;
  std::size_t added_at_step = 0;
  double attention = 0.0;
  std::vector<double> hidden;
  bool expanded = false;
};

struct InferenceEdge {
  std::size_t from = 0;  // posterior node
  std::size_t to = 0;    // prior node
  PredicateId predicate = 0;
  std::size_t added_at_step = 0;
  std::size_t insertion_index = 0;
  // Values at the step the edge was selected (its pruning step).
  double raw_score = 0.0;
  double attention = 0.0;
  double contribution = 0.0;
};

class InferenceGraph {
 public:
  static constexpr std::size_t kQueryNode = 0;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  InferenceGraph() = default;
  explicit InferenceGraph(const Query& q);

  const Query& query() const { return query_; }
  const std::vector<InferenceNode>& nodes() const { return nodes_; }
  const std::vector<InferenceEdge>& edges() const { return edges_; }
  std::vector<InferenceNode>& nodes() { return nodes_; }
  std::vector<InferenceEdge>& edges() { return edges_; }

  std::size_t find_node(EntityId e, Timestamp t) const;
  // Returns the index of the (possibly pre-existing) node and whether it is new.
  std::pair<std::size_t, bool> add_node(EntityId e, Timestamp t, std::size_t step);
  // Returns false when the identical (from, predicate, to) edge already exists.
  bool add_edge(std::size_t from, std::size_t to, PredicateId p, std::size_t step);

  // Drops edges where keep_edge is false, then every non-query node left
  // without incident edges. Returns old-index -> new-index for nodes (npos if
  // removed).
  std::vector<std::size_t> remove_edges(const std::vector<bool>& keep_edge);

 private:
  void reindex();

  Query query_{};
  std::vector<InferenceNode> nodes_;
  std::vector<InferenceEdge> edges_;
  std::map<std::pair<EntityId, Timestamp>, std::size_t> node_index_;
  std::map<std::tuple<std::size_t, PredicateId, std::size_t>, std::size_t> edge_index_;
  std::size_t next_insertion_ = 0;
};

// --- TRGA building blocks (differentiable) ---------------------------------

// <W_sub (h_v || p_k || h_q || p_q), W_obj (h_u || p_k || h_q || p_q)>
ad::Var edge_attention(ad::Tape& tape, Model::StepWeights w, ad::Var h_v, ad::Var h_u,
                       ad::Var p_k, ad::Var h_q, ad::Var p_q);

// Softmax of raw edge scores grouped by source node.
ad::Var normalize_attention(ad::Tape& tape, ad::Var raw_scores,
                            std::span<const seg::SegmentId> source_node, std::size_t num_nodes);

// h~ = sum alpha_i h_i; h^l = LeakyReLU(W_h (gamma h^{l-1} + (1-gamma) h~) + b_h).
// With no neighbours h~ = h^{l-1}, i.e. a pure self transform.
ad::Var aggregate_and_update(ad::Tape& tape, Model::StepWeights w, ad::Var h_prev,
                             ad::Var alpha, std::span<const ad::Var> neighbor_hidden,
                             double gamma, double leaky_slope);

// p^l = W_h p^{l-1} + b_h (affine, no activation).
ad::Var project_predicate(ad::Tape& tape, Model::StepWeights w, ad::Var p_prev);

// a^l = segment_sum(alpha * a^{l-1}[from], to); the query node keeps a^{l-1}
// only while it has no outgoing edges.
ad::Var propagate_node_attention(ad::Tape& tape, ad::Var alpha, ad::Var prev_attention,
                                 std::span<const std::size_t> edge_from,
                                 std::span<const std::size_t> edge_to, std::size_t num_nodes,
                                 std::size_t query_node);

struct EntityScores {
  std::vector<EntityId> entities;  // distinct entities in the graph, ascending
  ad::Var scores;                  // aligned with `entities`
};

EntityScores aggregate_entity_scores(ad::Tape& tape, const InferenceGraph& g,
                                     ad::Var node_attention, ScoreAggregation agg);

// Plain-value variant over the attention stored on graph nodes.
std::map<EntityId, double> aggregate_entity_scores(const InferenceGraph& g,
                                                   ScoreAggregation agg);

// Keeps at most K edges among those added at `step`, ranked by contribution
// (ties: older prior-node timestamp, then smaller insertion index). Returns
// the node remap from InferenceGraph::remove_edges.
std::vector<std::size_t> prune(InferenceGraph& g, std::size_t k, std::size_t step);

// --- Full reasoning --------------------------------------------------------

// Called once per step after propagation and before pruning.
struct StepSnapshot {
  std::size_t step = 0;
  const InferenceGraph* graph = nullptr;      // edge/node values of this step
  std::vector<double> prev_attention;         // a^{l-1}, indexed like graph nodes
  std::vector<double> alpha;                  // per edge
  std::vector<double> attention;              // a^l per node
  std::size_t messages = 0;
};
using StepObserver = std::function<void(const StepSnapshot&)>;

struct ReasoningOutput {
  InferenceGraph graph;
  EntityScores scores;
  ad::Var query_hidden;  // h^L of the query node
  std::vector<std::size_t> messages_per_step;
  std::vector<std::size_t> edges_per_step;  // before pruning
};

ReasoningOutput run_reasoning(ad::Tape& tape, Model& model, const TemporalAdjacency& adj,
                              const Query& query, const Hyperparams& hp, Rng& rng,
                              const StepObserver& observer = {});

struct Forecast {
  // Entities of the final graph by score descending, ties by id ascending.
  std::vector<std::pair<EntityId, double>> ranking;
  InferenceGraph graph;
  std::vector<std::size_t> messages_per_step;
};

// Gradient-free forward pass. Parameters are only read.
Forecast forecast(const Model& model, const TemporalAdjacency& adj, const Query& query,
                  const Hyperparams& hp, Rng& rng, const StepObserver& observer = {});

}  // namespace tkgx
