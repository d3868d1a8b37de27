#include "tkgx/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace tkgx {

ScoreAggregation parse_score_aggregation(std::string_view name) {
  if (name == "sum") return ScoreAggregation::kSum;
  if (name == "mean") return ScoreAggregation::kMean;
  throw std::invalid_argument("unknown score aggregation '" + std::string(name) + "'");
}

std::string_view to_string(ScoreAggregation a) {
  return a == ScoreAggregation::kSum ? "sum" : "mean";
}

void Hyperparams::validate() const {
  if (steps < 1) throw std::invalid_argument("model.steps must be >= 1");
  if (prune_k < 1) throw std::invalid_argument("model.prune_k must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("model.gamma must be in [0, 1]");
  if (!(leaky_slope > 0.0)) throw std::invalid_argument("model.leaky_slope must be positive");
  if (sampling.budget < 1) throw std::invalid_argument("sampling.budget must be >= 1");
}

// --- Model -----------------------------------------------------------------

std::string Model::step_param(std::size_t l, std::string_view what) {
  return "step" + std::to_string(l) + "." + std::string(what);
}

Model::Model(const ModelDims& dims, std::size_t steps) : dims_(dims), steps_(steps) {
  if (steps < 1) throw std::invalid_argument("a model needs at least one step");
  const auto d = dims.dim();
  const auto da = dims.attention_dim();
  params_.add(param_names::kEntityStatic, dims.num_entities, dims.dim_static);
  params_.add(param_names::kPredicate, dims.num_predicates, d);
  params_.add(param_names::kTimeFreq, 1, dims.dim_time);
  params_.add(param_names::kTimePhase, 1, dims.dim_time);
  params_.add(param_names::kInputW, d, d);
  params_.add(param_names::kInputB, 1, d);
  for (std::size_t l = 1; l <= steps; ++l) {
    params_.add(step_param(l, "w_sub"), da, 4 * d);
    params_.add(step_param(l, "w_obj"), da, 4 * d);
    params_.add(step_param(l, "w_h"), d, d);
    params_.add(step_param(l, "b_h"), 1, d);
  }
}

Model Model::initialized(const ModelDims& dims, std::size_t steps, Timestamp t_max,
                         std::uint64_t seed) {
  Model m;
  m.dims_ = dims;
  m.steps_ = steps;
  if (steps < 1) throw std::invalid_argument("a model needs at least one step");
  init_embedding_tables(m.params_, dims, t_max, seed);
  std::mt19937_64 rng(seed ^ 0x7f4a7c15ULL);
  const auto d = dims.dim();
  const auto da = dims.attention_dim();
  auto fill = [&](Parameter& p, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (auto& v : p.value) v = unif(rng);
  };
  fill(m.params_.add(param_names::kInputW, d, d), d);
  m.params_.add(param_names::kInputB, 1, d);
  for (std::size_t l = 1; l <= steps; ++l) {
    fill(m.params_.add(step_param(l, "w_sub"), da, 4 * d), 4 * d);
    fill(m.params_.add(step_param(l, "w_obj"), da, 4 * d), 4 * d);
    fill(m.params_.add(step_param(l, "w_h"), d, d), d);
    m.params_.add(step_param(l, "b_h"), 1, d);
  }
  return m;
}

Model Model::from_parameters(ParameterSet params) {
  Model m;
  const auto& ent = params.get(param_names::kEntityStatic);
  const auto& pred = params.get(param_names::kPredicate);
  const auto& freq = params.get(param_names::kTimeFreq);
  m.dims_.num_entities = ent.rows;
  m.dims_.dim_static = ent.cols;
  m.dims_.dim_time = freq.cols;
  m.dims_.num_predicates = pred.rows;
  if (pred.cols != m.dims_.dim()) throw std::runtime_error("predicate width != d_S + d_T");
  while (params.contains(step_param(m.steps_ + 1, "w_sub"))) ++m.steps_;
  if (m.steps_ == 0) throw std::runtime_error("checkpoint has no step weights");
  m.dims_.dim_attention = params.get(step_param(1, "w_sub")).rows;
  m.params_ = std::move(params);
  for (std::size_t l = 1; l <= m.steps_; ++l) {
    const auto& ws = m.params_.get(step_param(l, "w_sub"));
    if (ws.cols != 4 * m.dims_.dim()) throw std::runtime_error("w_sub shape mismatch");
  }
  return m;
}

Model::StepWeights Model::step(std::size_t l) {
  if (l < 1 || l > steps_)
    throw std::out_of_range("step " + std::to_string(l) + " outside [1, " +
                            std::to_string(steps_) + "]");
  return {params_.get(step_param(l, "w_sub")), params_.get(step_param(l, "w_obj")),
          params_.get(step_param(l, "w_h")), params_.get(step_param(l, "b_h"))};
}

// --- InferenceGraph --------------------------------------------------------

InferenceGraph::InferenceGraph(const Query& q) : query_(q) {
  add_node(q.subject, q.time, 0);
  nodes_[kQueryNode].attention = 1.0;
}

std::size_t InferenceGraph::find_node(EntityId e, Timestamp t) const {
  auto it = node_index_.find({e, t});
  return it == node_index_.end() ? npos : it->second;
}

std::pair<std::size_t, bool> InferenceGraph::add_node(EntityId e, Timestamp t, std::size_t step) {
  if (auto idx = find_node(e, t); idx != npos) return {idx, false};
  InferenceNode n;
  n.entity = e;
  n.timestamp = t;
  n.added_at_step = step;
  nodes_.push_back(std::move(n));
  node_index_.emplace(std::make_pair(e, t), nodes_.size() - 1);
  return {nodes_.size() - 1, true};
}

bool InferenceGraph::add_edge(std::size_t from, std::size_t to, PredicateId p, std::size_t step) {
  if (from >= nodes_.size() || to >= nodes_.size()) throw std::out_of_range("edge endpoint");
  if (!(nodes_[to].timestamp < nodes_[from].timestamp))
    throw std::logic_error("edge must point to a strictly earlier node");
  auto key = std::make_tuple(from, p, to);
  if (edge_index_.count(key)) return false;
  InferenceEdge e;
  e.from = from;
  e.to = to;
  e.predicate = p;
  e.added_at_step = step;
  e.insertion_index = next_insertion_++;
  edges_.push_back(e);
  edge_index_.emplace(key, edges_.size() - 1);
  return true;
}

void InferenceGraph::reindex() {
  node_index_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    node_index_.emplace(std::make_pair(nodes_[i].entity, nodes_[i].timestamp), i);
  edge_index_.clear();
  for (std::size_t i = 0; i < edges_.size(); ++i)
    edge_index_.emplace(std::make_tuple(edges_[i].from, edges_[i].predicate, edges_[i].to), i);
}

std::vector<std::size_t> InferenceGraph::remove_edges(const std::vector<bool>& keep_edge) {
  if (keep_edge.size() != edges_.size()) throw std::invalid_argument("keep mask size mismatch");
  std::vector<InferenceEdge> kept;
  std::vector<bool> touched(nodes_.size(), false);
  touched[kQueryNode] = true;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!keep_edge[i]) continue;
    kept.push_back(edges_[i]);
    touched[edges_[i].from] = touched[edges_[i].to] = true;
  }
  std::vector<std::size_t> remap(nodes_.size(), npos);
  std::vector<InferenceNode> nodes;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!touched[i]) continue;
    remap[i] = nodes.size();
    nodes.push_back(std::move(nodes_[i]));
  }
  for (auto& e : kept) {
    e.from = remap[e.from];
    e.to = remap[e.to];
  }
  nodes_ = std::move(nodes);
  edges_ = std::move(kept);
  reindex();
  return remap;
}

// --- TRGA building blocks --------------------------------------------------

ad::Var edge_attention(ad::Tape& tape, Model::StepWeights w, ad::Var h_v, ad::Var h_u,
                       ad::Var p_k, ad::Var h_q, ad::Var p_q) {
  const ad::Var sub_in[] = {h_v, p_k, h_q, p_q};
  const ad::Var obj_in[] = {h_u, p_k, h_q, p_q};
  const auto left = tape.matvec(w.w_sub, tape.concat(sub_in));
  const auto right = tape.matvec(w.w_obj, tape.concat(obj_in));
  return tape.dot(left, right);
}

ad::Var normalize_attention(ad::Tape& tape, ad::Var raw_scores,
                            std::span<const seg::SegmentId> source_node, std::size_t num_nodes) {
  return tape.segment_softmax(raw_scores, source_node, num_nodes);
}

ad::Var aggregate_and_update(ad::Tape& tape, Model::StepWeights w, ad::Var h_prev, ad::Var alpha,
                             std::span<const ad::Var> neighbor_hidden, double gamma,
                             double leaky_slope) {
  ad::Var mixed = h_prev;
  if (!neighbor_hidden.empty()) {
    const auto h_tilde = tape.weighted_sum(alpha, neighbor_hidden);
    mixed = tape.axpby(gamma, h_prev, 1.0 - gamma, h_tilde);
  }
  return tape.leaky_relu(tape.affine(w.w_h, w.b_h, mixed), leaky_slope);
}

ad::Var project_predicate(ad::Tape& tape, Model::StepWeights w, ad::Var p_prev) {
  return tape.affine(w.w_h, w.b_h, p_prev);
}

ad::Var propagate_node_attention(ad::Tape& tape, ad::Var alpha, ad::Var prev_attention,
                                 std::span<const std::size_t> edge_from,
                                 std::span<const std::size_t> edge_to, std::size_t num_nodes,
                                 std::size_t query_node) {
  if (prev_attention.size() != num_nodes)
    throw std::invalid_argument("previous attention must cover every node");
  const auto sent = tape.mul(alpha, tape.gather(prev_attention, edge_from));
  std::vector<seg::SegmentId> to(edge_to.begin(), edge_to.end());
  auto inflow = tape.segment_sum(sent, to, num_nodes);
  const bool query_has_edges =
      std::find(edge_from.begin(), edge_from.end(), query_node) != edge_from.end();
  if (!query_has_edges) {
    std::vector<double> mask(num_nodes, 0.0);
    mask[query_node] = 1.0;
    inflow = tape.add(inflow, tape.mul(prev_attention, tape.constant(std::move(mask))));
  }
  return inflow;
}

EntityScores aggregate_entity_scores(ad::Tape& tape, const InferenceGraph& g,
                                     ad::Var node_attention, ScoreAggregation agg) {
  EntityScores out;
  for (const auto& n : g.nodes()) out.entities.push_back(n.entity);
  std::sort(out.entities.begin(), out.entities.end());
  out.entities.erase(std::unique(out.entities.begin(), out.entities.end()), out.entities.end());
  std::vector<seg::SegmentId> slot(g.nodes().size());
  std::vector<double> count(out.entities.size(), 0.0);
  for (std::size_t i = 0; i < g.nodes().size(); ++i) {
    const auto it = std::lower_bound(out.entities.begin(), out.entities.end(), g.nodes()[i].entity);
    slot[i] = it - out.entities.begin();
    count[static_cast<std::size_t>(slot[i])] += 1.0;
  }
  out.scores = tape.segment_sum(node_attention, slot, out.entities.size());
  if (agg == ScoreAggregation::kMean) {
    for (auto& c : count) c = 1.0 / c;
    out.scores = tape.mul(out.scores, tape.constant(std::move(count)));
  }
  return out;
}

std::map<EntityId, double> aggregate_entity_scores(const InferenceGraph& g, ScoreAggregation agg) {
  std::map<EntityId, std::pair<double, std::size_t>> acc;
  for (const auto& n : g.nodes()) {
    auto& [s, c] = acc[n.entity];
    s += n.attention;
    ++c;
  }
  std::map<EntityId, double> out;
  for (const auto& [e, sc] : acc)
    out[e] = agg == ScoreAggregation::kSum ? sc.first : sc.first / static_cast<double>(sc.second);
  return out;
}

std::vector<std::size_t> prune(InferenceGraph& g, std::size_t k, std::size_t step) {
  if (k == 0) throw std::invalid_argument("prune budget K must be >= 1");
  const auto& edges = g.edges();
  std::vector<std::size_t> fresh;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].added_at_step == step) fresh.push_back(i);
  if (fresh.size() <= k) {
    std::vector<std::size_t> identity(g.nodes().size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    return identity;
  }
  std::stable_sort(fresh.begin(), fresh.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = edges[a];
    const auto& y = edges[b];
    if (x.contribution != y.contribution) return x.contribution > y.contribution;
    const auto tx = g.nodes()[x.to].timestamp;
    const auto ty = g.nodes()[y.to].timestamp;
    if (tx != ty) return tx < ty;
    return x.insertion_index < y.insertion_index;
  });
  std::vector<bool> keep(edges.size(), true);
  for (std::size_t i = k; i < fresh.size(); ++i) keep[fresh[i]] = false;
  return g.remove_edges(keep);
}

// --- Reasoning loop --------------------------------------------------------

namespace {

class Reasoner {
 public:
  Reasoner(ad::Tape& tape, Model& model, const TemporalAdjacency& adj, const Query& q,
           const Hyperparams& hp, Rng& rng, const StepObserver& observer)
      : tape_(tape), model_(model), adj_(adj), hp_(hp), rng_(rng), observer_(observer), g_(q) {}

  ReasoningOutput run() {
    hp_.validate();
    if (hp_.steps > model_.steps())
      throw std::invalid_argument("model.steps exceeds the steps the parameters were built for");
    const auto& q = g_.query();
    if (q.subject < 0 || static_cast<std::size_t>(q.subject) >= model_.dims().num_entities)
      throw std::out_of_range("query entity " + std::to_string(q.subject) + " unknown");
    if (q.predicate < 0 || static_cast<std::size_t>(q.predicate) >= model_.dims().num_predicates)
      throw std::out_of_range("query predicate " + std::to_string(q.predicate) + " unknown");

    hidden_.push_back({input_projection(q.subject, q.time)});
    attention_ = tape_.constant({1.0});

    ReasoningOutput out;
    for (std::size_t l = 1; l <= hp_.steps; ++l) {
      expand(l);
      out.edges_per_step.push_back(g_.edges().size());
      const auto alpha = reverse_update(l);
      out.messages_per_step.push_back(messages_);
      propagate(l, alpha);
      compact(prune(g_, hp_.prune_k, l));
    }

    for (std::size_t i = 0; i < g_.nodes().size(); ++i) {
      const auto h = hidden_[i].back().value();
      g_.nodes()[i].hidden.assign(h.begin(), h.end());
    }
    out.query_hidden = hidden_[InferenceGraph::kQueryNode].back();
    out.scores = aggregate_entity_scores(tape_, g_, attention_, hp_.agg);
    out.graph = std::move(g_);
    return out;
  }

 private:
  ad::Var input_projection(EntityId e, Timestamp t) {
    return tape_.affine(model_.input_w(), model_.input_b(),
                        entity_embedding(tape_, model_.params(), e, t));
  }

  // Hidden state of node i at step k; nodes added late get h^k by repeated
  // self transforms.
  ad::Var hidden(std::size_t i, std::size_t k) {
    auto& hs = hidden_[i];
    while (hs.size() <= k) {
      const auto l = hs.size();
      hs.push_back(aggregate_and_update(tape_, model_.step(l), hs.back(), ad::Var{}, {}, hp_.gamma,
                                        hp_.leaky_slope));
    }
    return hs[k];
  }

  ad::Var predicate(PredicateId p, std::size_t k) {
    auto& ps = pred_cache_[p];
    if (ps.empty()) ps.push_back(predicate_embedding(tape_, model_.params(), p));
    while (ps.size() <= k) ps.push_back(project_predicate(tape_, model_.step(ps.size()), ps.back()));
    return ps[k];
  }

  void expand(std::size_t l) {
    const auto existing = g_.nodes().size();
    for (std::size_t v = 0; v < existing; ++v) {
      if (g_.nodes()[v].expanded) continue;
      g_.nodes()[v].expanded = true;
      const auto entity = g_.nodes()[v].entity;
      const auto t = g_.nodes()[v].timestamp;
      const auto prior = adj_.prior_edges(entity, t);
      for (const auto i : sample_prior_edges(prior, t, hp_.sampling, rng_)) {
        const auto& e = prior[i];
        const auto [u, is_new] = g_.add_node(e.neighbor, e.timestamp, l);
        if (is_new) hidden_.push_back({input_projection(e.neighbor, e.timestamp)});
        g_.add_edge(v, u, e.predicate, l);
      }
    }
  }

  // Scores every edge with step-l weights, then updates hiddens newest group
  // first. Nodes read step-l states only from groups already swept. Returns
  // alpha^l aligned with g_.edges().
  ad::Var reverse_update(std::size_t l) {
    const auto w = model_.step(l);
    const auto n = g_.nodes().size();
    const auto& edges = g_.edges();
    for (std::size_t i = 0; i < n; ++i) hidden(i, l - 1);

    const auto h_q = hidden_[InferenceGraph::kQueryNode][l - 1];
    const auto p_q = predicate(g_.query().predicate, l - 1);
    std::vector<ad::Var> raw;
    raw.reserve(edges.size());
    std::vector<seg::SegmentId> source(edges.size());
    std::vector<std::vector<std::size_t>> out_edges(n);
    messages_ = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      raw.push_back(edge_attention(tape_, w, hidden_[edges[e].from][l - 1],
                                   hidden_[edges[e].to][l - 1], predicate(edges[e].predicate, l - 1),
                                   h_q, p_q));
      ++messages_;
      source[e] = static_cast<seg::SegmentId>(edges[e].from);
      out_edges[edges[e].from].push_back(e);
    }
    const auto raw_vec = tape_.concat(raw);
    raw_scores_.assign(raw_vec.value().begin(), raw_vec.value().end());
    const auto alpha = normalize_attention(tape_, raw_vec, source, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& x = g_.nodes()[a];
      const auto& y = g_.nodes()[b];
      if (x.added_at_step != y.added_at_step) return x.added_at_step > y.added_at_step;
      return x.timestamp < y.timestamp;
    });
    for (const auto v : order) {
      const auto& mine = out_edges[v];
      std::vector<ad::Var> neighbors;
      neighbors.reserve(mine.size());
      for (const auto e : mine) {
        const auto u = edges[e].to;
        const bool fresh = hp_.reverse_update &&
                           g_.nodes()[u].added_at_step > g_.nodes()[v].added_at_step;
        neighbors.push_back(hidden_[u][fresh ? l : l - 1]);
      }
      ad::Var alpha_v;
      if (!mine.empty()) alpha_v = tape_.gather(alpha, mine);
      const auto h = aggregate_and_update(tape_, w, hidden_[v][l - 1], alpha_v, neighbors,
                                          hp_.gamma, hp_.leaky_slope);
      hidden_[v].push_back(h);
    }
    return alpha;
  }

  void propagate(std::size_t l, ad::Var alpha) {
    const auto n = g_.nodes().size();
    const auto old = attention_.size();
    if (old < n) {
      const ad::Var parts[] = {attention_, tape_.constant(std::vector<double>(n - old, 0.0))};
      attention_ = tape_.concat(parts);
    }
    std::vector<std::size_t> from, to;
    for (const auto& e : g_.edges()) {
      from.push_back(e.from);
      to.push_back(e.to);
    }
    const auto prev = attention_;
    attention_ = propagate_node_attention(tape_, alpha, prev, from, to, n,
                                          InferenceGraph::kQueryNode);

    const auto a_prev = prev.value();
    const auto a_now = attention_.value();
    const auto al = alpha.value();
    auto& edges = g_.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].added_at_step != l) continue;
      edges[e].raw_score = raw_scores_[e];
      edges[e].attention = al[e];
      edges[e].contribution = al[e] * a_prev[edges[e].from];
    }
    for (std::size_t i = 0; i < n; ++i) g_.nodes()[i].attention = a_now[i];

    if (observer_) {
      StepSnapshot snap;
      snap.step = l;
      snap.graph = &g_;
      snap.prev_attention.assign(a_prev.begin(), a_prev.end());
      snap.alpha.assign(al.begin(), al.end());
      snap.attention.assign(a_now.begin(), a_now.end());
      snap.messages = messages_;
      observer_(snap);
    }
  }

  void compact(const std::vector<std::size_t>& remap) {
    std::vector<std::size_t> kept;
    bool changed = remap.size() != g_.nodes().size();
    for (std::size_t i = 0; i < remap.size(); ++i) {
      if (remap[i] == InferenceGraph::npos) continue;
      if (remap[i] != kept.size()) changed = true;
      kept.push_back(i);
    }
    if (!changed) return;
    std::vector<std::vector<ad::Var>> hs;
    hs.reserve(kept.size());
    for (const auto i : kept) hs.push_back(std::move(hidden_[i]));
    hidden_ = std::move(hs);
    attention_ = tape_.gather(attention_, kept);
  }

  ad::Tape& tape_;
  Model& model_;
  const TemporalAdjacency& adj_;
  const Hyperparams& hp_;
  Rng& rng_;
  const StepObserver& observer_;
  InferenceGraph g_;
  std::vector<std::vector<ad::Var>> hidden_;
  ad::Var attention_;
  std::map<PredicateId, std::vector<ad::Var>> pred_cache_;
  std::vector<double> raw_scores_;
  std::size_t messages_ = 0;
};

}  // namespace

ReasoningOutput run_reasoning(ad::Tape& tape, Model& model, const TemporalAdjacency& adj,
                              const Query& query, const Hyperparams& hp, Rng& rng,
                              const StepObserver& observer) {
  return Reasoner(tape, model, adj, query, hp, rng, observer).run();
}

Forecast forecast(const Model& model, const TemporalAdjacency& adj, const Query& query,
                  const Hyperparams& hp, Rng& rng, const StepObserver& observer) {
  ad::Tape tape(/*record_grad=*/false);
  // A non-recording tape never writes to parameter gradients.
  auto out = run_reasoning(tape, const_cast<Model&>(model), adj, query, hp, rng, observer);
  Forecast f;
  const auto scores = out.scores.scores.value();
  for (std::size_t i = 0; i < out.scores.entities.size(); ++i)
    f.ranking.emplace_back(out.scores.entities[i], scores[i]);
  std::stable_sort(f.ranking.begin(), f.ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  f.graph = std::move(out.graph);
  f.messages_per_step = std::move(out.messages_per_step);
  return f;
}

}  // namespace tkgx
