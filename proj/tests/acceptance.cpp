// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 run criteria 1-9, report 10 as not run
//   acceptance --criterion N   run one criterion; exit 0 pass, 1 fail, 77 skip
//
// Criteria 1 and 4 need the ICEWS14 release in $TKGX_ICEWS14_DIR (or
// data/ICEWS14 under the source tree).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pipeline_toys.hpp"
#include "tkgx/engine.hpp"
#include "tkgx/evaluation.hpp"
#include "tkgx/segment_ops.hpp"
#include "tkgx/trainer.hpp"
#include "toy_kg.hpp"

namespace tkgx {
namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.empty()) failures_ = what;
    if (!ok) ++failed_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome done() const {
    if (failed_ == 0) return {Status::kPass, notes_};
    return {Status::kFail, std::to_string(failed_) + " check(s) failed, first: " + failures_ +
                               (notes_.empty() ? "" : "; " + notes_)};
  }

 private:
  std::size_t failed_ = 0;
  std::string failures_, notes_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::optional<std::filesystem::path> icews_dir() {
  std::filesystem::path dir;
  if (const char* env = std::getenv("TKGX_ICEWS14_DIR"); env && *env) dir = env;
  else dir = std::filesystem::path(TKGX_SOURCE_DIR) / "data" / "ICEWS14";
  if (std::filesystem::exists(dir / "train.txt")) return dir;
  return std::nullopt;
}

Outcome skip_without_icews() {
  return {Status::kSkip, "ICEWS14 not found; set TKGX_ICEWS14_DIR"};
}

// 1. Ingestion counts and runtime.
Outcome criterion1() {
  const auto dir = icews_dir();
  if (!dir) return skip_without_icews();
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  const auto raw = load_dataset_dir(*dir, false);
  const double raw_secs = seconds_since(start);
  c.expect(raw.train.size() == 63685, "train " + std::to_string(raw.train.size()));
  c.expect(raw.valid.size() == 13823, "valid " + std::to_string(raw.valid.size()));
  c.expect(raw.test.size() == 13222, "test " + std::to_string(raw.test.size()));
  c.expect(raw.vocab->num_entities() == 7128, "entities " + std::to_string(raw.vocab->num_entities()));
  c.expect(raw.vocab->num_predicates() == 230,
           "predicates " + std::to_string(raw.vocab->num_predicates()));
  const auto start_aug = std::chrono::steady_clock::now();
  const auto aug = load_dataset_dir(*dir, true);
  const double aug_secs = seconds_since(start_aug);
  c.expect(aug.vocab->num_predicates() == 460,
           "augmented predicates " + std::to_string(aug.vocab->num_predicates()));
  c.expect(aug.train.size() == 2 * 63685, "augmented train size");
  c.expect(raw_secs < 10.0 && aug_secs < 10.0, "load time " + fmt(std::max(raw_secs, aug_secs)));
  c.note("load " + fmt(raw_secs) + " s, with reciprocals " + fmt(aug_secs) + " s");
  return c.done();
}

// 2. Segment kernels against naive loops, the worked example and the benchmark.
Outcome criterion2() {
  Checker c;
  {
    const std::vector<double> x = {3, 1, 5};
    const std::vector<seg::SegmentId> s = {0, 0, 1};
    c.expect(seg::segment_sum(x, s, 2) == std::vector<double>{4, 5}, "worked example");
  }
  std::mt19937_64 rng(99);
  std::normal_distribution<double> val(0.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 20, d = rng() % 257;
    std::vector<double> x;
    std::vector<seg::SegmentId> s;
    for (std::size_t i = 0; i < d; ++i) {
      x.push_back(rng() % 4 == 0 ? std::round(val(rng)) : val(rng));
      s.push_back(static_cast<seg::SegmentId>(rng() % n));
    }
    c.expect(seg::segment_sum(x, s, n) == seg::naive::segment_sum(x, s, n), "sum mismatch");
    c.expect(seg::segment_argmax(x, s, n) == seg::naive::segment_argmax(x, s, n),
             "argmax mismatch");
    const auto fast = seg::segment_softmax(x, s, n), slow = seg::naive::segment_softmax(x, s, n);
    bool close = fast.size() == slow.size();
    for (std::size_t i = 0; close && i < fast.size(); ++i)
      close = std::abs(fast[i] - slow[i]) <= 1e-12 * std::abs(slow[i]);
    c.expect(close, "softmax beyond 1e-12 relative");
  }
  for (const auto& r : seg::benchmark(100000, 1000, 5, 1)) {
    c.expect(r.speedup() >= 10.0,
             std::string(r.kernel) + " speedup " + fmt(r.speedup(), 1) + "x below 10x");
    c.note(std::string(r.kernel) + " " + fmt(r.speedup(), 1) + "x");
  }
  return c.done();
}

// 3. Full-pipeline gradients against central differences.
Outcome criterion3() {
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  const int toys = 20;
  for (int seed = 0; seed < toys; ++seed) {
    const auto r = toy::five_node_grad_check(static_cast<std::uint64_t>(seed) + 1000);
    worst = std::max(worst, r.max_rel_error);
    c.expect(r.max_rel_error < 1e-3, "toy " + std::to_string(seed) + " " + r.worst);
    c.expect(r.entries_checked > 0, "nothing checked");
  }
  const double secs = seconds_since(start);
  c.expect(secs < 120.0, "runtime " + fmt(secs));
  c.note(std::to_string(toys) + " toys, max rel error " + sci(worst) + ", " +
         fmt(secs) + " s");
  return c.done();
}

// Observer shared by criteria 4 and 5.
struct InvariantTally {
  double worst_partition = 0.0;
  double worst_conservation = 0.0;
  std::size_t counter_mismatches = 0;
  std::size_t steps = 0;

  StepObserver observer() {
    return [this](const StepSnapshot& s) {
      const auto& g = *s.graph;
      std::vector<double> out_sum(g.nodes().size(), 0.0);
      std::vector<bool> has_out(g.nodes().size(), false);
      for (std::size_t e = 0; e < g.edges().size(); ++e) {
        out_sum[g.edges()[e].from] += s.alpha[e];
        has_out[g.edges()[e].from] = true;
      }
      double sending = 0.0, received = 0.0;
      for (std::size_t v = 0; v < g.nodes().size(); ++v) {
        received += s.attention[v];
        if (!has_out[v]) continue;
        worst_partition = std::max(worst_partition, std::abs(out_sum[v] - 1.0));
        sending += s.prev_attention[v];
      }
      if (!has_out[InferenceGraph::kQueryNode])
        received -= s.prev_attention[InferenceGraph::kQueryNode];
      worst_conservation = std::max(worst_conservation, std::abs(received - sending));
      if (s.messages != g.edges().size()) ++counter_mismatches;
      ++steps;
    };
  }
};

struct CausalityTally {
  std::size_t bad_edges = 0;
  std::size_t late_nodes = 0;
  std::size_t graphs = 0;
  std::size_t edges = 0;

  void check(const InferenceGraph& g) {
    ++graphs;
    const auto t_q = g.query().time;
    for (std::size_t v = 1; v < g.nodes().size(); ++v)
      if (g.nodes()[v].timestamp >= t_q) ++late_nodes;
    for (const auto& e : g.edges()) {
      ++edges;
      if (g.nodes()[e.to].timestamp >= g.nodes()[e.from].timestamp) ++bad_edges;
    }
  }
};

CausalityTally causality_fuzz(const TemporalAdjacency& adj, std::size_t entities,
                              std::size_t predicates, Timestamp t_max) {
  ModelDims dims;
  dims.num_entities = entities;
  dims.num_predicates = predicates;
  dims.dim_static = dims.dim_time = 8;
  const auto model = Model::initialized(dims, 3, t_max, 0);
  Hyperparams hp;
  hp.steps = 3;
  CausalityTally tally;
  std::mt19937_64 pick(14);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const Query q{static_cast<EntityId>(pick() % entities),
                  static_cast<PredicateId>(pick() % predicates),
                  static_cast<Timestamp>(pick() % static_cast<std::uint64_t>(t_max + 2))};
    auto rng = make_query_rng(0, i);
    tally.check(forecast(model, adj, q, hp, rng).graph);
  }
  return tally;
}

// 4. Causality on 10,000 random ICEWS14 queries. Without the dataset a
// synthetic graph of the same size is fuzzed instead and the criterion is
// reported as skipped.
Outcome criterion4() {
  const auto dir = icews_dir();
  if (!dir) {
    const std::size_t entities = 7128, predicates = 230;
    auto kg = toy::make_kg(toy::random_facts(90730, entities, predicates, 364, 4), entities,
                           predicates);
    const auto tally = causality_fuzz(kg.adj, entities, 2 * predicates, 364);
    auto out = skip_without_icews();
    out.detail += "; synthetic stand-in of the same size: " + std::to_string(tally.graphs) +
                  " graphs, " + std::to_string(tally.edges) + " edges, " +
                  std::to_string(tally.bad_edges) + " non-causal edges, " +
                  std::to_string(tally.late_nodes) + " late nodes";
    if (tally.bad_edges || tally.late_nodes) out.status = Status::kFail;
    return out;
  }
  const auto d = load_dataset_dir(*dir);
  const Dataset* parts[] = {&d.train, &d.valid, &d.test};
  Timestamp t_max = 0;
  for (const auto* p : parts)
    for (const auto& q : p->quadruples) t_max = std::max(t_max, q.timestamp);
  const auto tally = causality_fuzz(TemporalAdjacency::from_datasets(parts),
                                    d.vocab->num_entities(), d.vocab->num_predicates(), t_max);
  Checker c;
  c.expect(tally.bad_edges == 0, std::to_string(tally.bad_edges) + " non-causal edges");
  c.expect(tally.late_nodes == 0, std::to_string(tally.late_nodes) + " nodes at or after t_q");
  c.note(std::to_string(tally.graphs) + " graphs, " + std::to_string(tally.edges) + " edges");
  return c.done();
}

// 5. Attention partition and restricted conservation on fuzzed graphs.
Outcome criterion5() {
  Checker c;
  InvariantTally inv;
  CausalityTally causal;
  std::size_t graphs = 0;
  for (std::uint64_t world = 0; world < 5; ++world) {
    const std::size_t entities = 30 + 20 * world, preds = 3 + world;
    auto kg = toy::make_kg(toy::random_facts(400 + 300 * world, entities, preds, 60, world), entities,
                           preds);
    Hyperparams hp;
    hp.steps = 1 + world % 3;
    hp.prune_k = 4 + 4 * world;
    hp.sampling.budget = 3 + 3 * world;
    hp.sampling.strategy = static_cast<SamplingStrategy>(world % 4);
    hp.agg = world % 2 ? ScoreAggregation::kMean : ScoreAggregation::kSum;
    const auto model = Model::initialized(toy::small_dims(*kg.vocab), hp.steps, 60, world);
    std::mt19937_64 pick(world);
    for (std::uint64_t i = 0; i < 200; ++i) {
      const Query q{static_cast<EntityId>(pick() % entities),
                    static_cast<PredicateId>(pick() % (2 * preds)),
                    static_cast<Timestamp>(pick() % 65)};
      auto rng = make_query_rng(world, i);
      causal.check(forecast(model, kg.adj, q, hp, rng, inv.observer()).graph);
      ++graphs;
    }
  }
  c.expect(inv.worst_partition <= 1e-9, "partition error " + sci(inv.worst_partition));
  c.expect(inv.worst_conservation <= 1e-9,
           "conservation error " + sci(inv.worst_conservation));
  c.expect(causal.bad_edges == 0 && causal.late_nodes == 0, "causality violated");
  c.expect(inv.counter_mismatches == 0, "message counter differs from edge count");
  c.note(std::to_string(graphs) + " graphs, " + std::to_string(inv.steps) +
         " steps, max partition error " + sci(inv.worst_partition) +
         ", max conservation error " + sci(inv.worst_conservation));
  return c.done();
}

// 6. Two-hop reach of the reverse update and the per-step message counter.
Outcome criterion6() {
  const std::vector<toy::Fact> facts = {{0, 0, 1, 8}, {0, 1, 2, 8}, {0, 2, 3, 8}, {1, 0, 4, 5},
                                        {1, 1, 5, 5}, {2, 2, 7, 5}, {2, 0, 8, 5}, {3, 1, 6, 5}};
  const auto kg = toy::make_kg(facts, 9, 3, false);
  Hyperparams hp;
  hp.steps = 2;
  hp.prune_k = 100;
  hp.sampling.budget = 100;
  Checker c;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = Model::initialized(toy::small_dims(*kg.vocab), 2, 10, seed);
    InferenceGraph last;
    auto run = [&](std::vector<std::size_t>* messages) {
      ad::Tape tape(false);
      auto rng = make_query_rng(0, 0);
      const auto out = run_reasoning(tape, model, kg.adj, {0, 0, 10}, hp, rng);
      if (messages) *messages = out.messages_per_step;
      last = out.graph;
      const auto v = out.query_hidden.value();
      return std::vector<double>(v.begin(), v.end());
    };
    std::vector<std::size_t> messages;
    const auto base = run(&messages);
    c.expect(messages == std::vector<std::size_t>{3, 8}, "message counter not {3, 8}");
    c.expect(last.edges().size() == 8, "final graph does not hold 8 edges");
    auto& ent = model.params().get(param_names::kEntityStatic);
    for (EntityId e = 4; e <= 8; ++e) {
      const auto saved = ent.value;
      for (auto& v : ent.row(static_cast<std::size_t>(e))) v += 0.5;
      c.expect(run(nullptr) != base, "two-hop entity " + std::to_string(e) + " does not reach h2");
      ent.value = saved;
    }
  }
  c.note("5 initializations, 5 two-hop nodes each, messages per step {3, 8}");
  return c.done();
}

// Rank oracle that scans every entity and every fact.
std::size_t brute_rank(const std::map<EntityId, double>& scores, const Quadruple& q,
                       const std::vector<Quadruple>& facts, FilterMode mode, std::size_t n) {
  if (!scores.count(q.object)) return n;
  const double target = scores.at(q.object);
  std::size_t rank = 1;
  for (EntityId e = 0; e < static_cast<EntityId>(n); ++e) {
    if (e == q.object) continue;
    const bool filtered =
        mode != FilterMode::kRaw &&
        std::any_of(facts.begin(), facts.end(), [&](const Quadruple& f) {
          return f.subject == q.subject && f.predicate == q.predicate && f.object == e &&
                 (mode == FilterMode::kStatic || f.timestamp == q.timestamp);
        });
    if (filtered) continue;
    const auto it = scores.find(e);
    const double s = it == scores.end() ? 0.0 : it->second;
    if (s > target || (s == target && e < q.object)) ++rank;
  }
  return rank;
}

// 7. Filtered ranks against brute force, and the Obama/Germany case.
Outcome criterion7() {
  Checker c;
  auto kg = toy::make_kg(toy::random_facts(25, 8, 2, 4, 5), 8, 2);
  c.expect(kg.data.size() == 50, "toy KG does not hold 50 quadruples");
  const Dataset* parts[] = {&kg.data};
  const FactIndex facts(parts);
  std::mt19937_64 rng(8);
  std::size_t compared = 0;
  for (const auto& q : kg.data.quadruples) {
    std::map<EntityId, double> scores;
    for (EntityId e = 0; e < 8; ++e)
      if (rng() % 4) scores[e] = static_cast<double>(rng() % 5) / 4.0;
    for (const auto mode : {FilterMode::kStatic, FilterMode::kTimeAware}) {
      const auto got = rank_answer(scores, q.object,
                                   facts.filter(mode, q.subject, q.predicate, q.timestamp), 8);
      c.expect(got == brute_rank(scores, q, kg.data.quadruples, mode, 8),
               std::string(to_string(mode)) + " rank mismatch");
      ++compared;
    }
  }
  auto vocab = std::make_shared<Vocab>();
  const auto obama = vocab->entities.intern("Barack Obama");
  const auto germany = vocab->entities.intern("Germany");
  const auto india = vocab->entities.intern("India");
  const auto visit = vocab->predicates.intern("Make a visit");
  Dataset d;
  d.vocab = vocab;
  d.quadruples = {{obama, visit, germany, parse_timestamp("2013-01-18")},
                  {obama, visit, india, parse_timestamp("2015-01-25")}};
  const Dataset* op[] = {&d};
  const FactIndex of(op);
  const auto t = parse_timestamp("2015-01-25");
  const std::map<EntityId, double> scores = {{germany, 0.6}, {india, 0.4}};
  c.expect(rank_answer(scores, india, of.filter(FilterMode::kStatic, obama, visit, t), 3) == 1,
           "static filter keeps Germany");
  c.expect(rank_answer(scores, india, of.filter(FilterMode::kTimeAware, obama, visit, t), 3) == 2,
           "time-aware filter removes Germany");
  c.note(std::to_string(compared) + " filtered ranks compared; Germany filtered only statically");
  return c.done();
}

// 8. Metric arithmetic.
Outcome criterion8() {
  Checker c;
  const std::vector<std::size_t> ranks = {1, 2, 4};
  const auto m = compute_metrics(ranks, std::vector<std::size_t>{1, 3});
  c.expect(std::abs(m.mrr - (1.0 + 0.5 + 0.25) / 3.0) < 1e-12, "MRR " + std::to_string(m.mrr));
  c.expect(std::abs(m.mrr - 0.5833) < 1e-4, "MRR not 0.5833");
  c.expect(m.hits.at(1) == 1.0 / 3.0, "Hits@1");
  c.expect(m.hits.at(3) == 2.0 / 3.0, "Hits@3");
  c.note("MRR " + fmt(m.mrr, 4) + ", Hits@1 " + fmt(m.hits.at(1), 4) + ", Hits@3 " +
         fmt(m.hits.at(3), 4));
  return c.done();
}

// 9. Learnability of a one-step temporal rule.
Outcome criterion9() {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t rules = 4;
  const auto rk = toy::make_rule_kg(120, 2400, rules, 2, 46, 53, 60, 1);
  auto vocab = toy::make_vocab(rk.entities, rk.predicates);
  auto train = augment_reciprocal(toy::make_dataset(rk.train, vocab));
  auto valid = augment_reciprocal(toy::make_dataset(rk.valid, vocab));
  auto test = augment_reciprocal(toy::make_dataset(rk.test, vocab));
  const Dataset* parts[] = {&train, &valid, &test};
  const auto adj = TemporalAdjacency::from_datasets(parts);
  const FactIndex facts(parts);

  // Only consequence facts are predictable; triggers and noise are random.
  auto consequences = [&](const Dataset& d) {
    Dataset out;
    out.vocab = d.vocab;
    for (const auto& q : d.quadruples)
      if (q.predicate >= static_cast<PredicateId>(rules) &&
          q.predicate < static_cast<PredicateId>(2 * rules))
        out.quadruples.push_back(q);
    return out;
  };
  const auto valid_rule = consequences(valid);
  const auto test_rule = consequences(test);

  Hyperparams hp;
  hp.steps = 1;
  hp.prune_k = 64;
  hp.sampling.strategy = SamplingStrategy::kExpWeighted;
  hp.sampling.budget = 6;
  auto model = Model::initialized(toy::small_dims(*vocab, 16, 2), hp.steps, 60, 1);
  TrainingConfig cfg;
  cfg.epochs = 30;
  cfg.batch = 16;
  cfg.lr = 3e-3;
  const auto result = fit(model, adj, train, valid_rule, facts, hp, cfg);

  const auto m = summarize(evaluate(model, adj, test_rule, facts, hp), FilterMode::kTimeAware);
  const double secs = seconds_since(start);
  Checker c;
  c.expect(!result.diverged, "training diverged");
  c.expect(m.hits.at(1) >= 0.9, "Hits@1 " + fmt(m.hits.at(1)));
  c.expect(secs < 600.0, "runtime " + fmt(secs));
  c.note("test Hits@1 " + fmt(m.hits.at(1)) + ", MRR " + fmt(m.mrr) + " on " +
         std::to_string(m.count) + " held-out queries, best epoch " +
         std::to_string(result.best_epoch) + ", " + fmt(secs, 1) + " s");
  return c.done();
}

using Criterion = Outcome (*)();
constexpr Criterion kCriteria[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                   criterion6, criterion7, criterion8, criterion9};

const char* label(Status s) {
  switch (s) {
    case Status::kPass: return "PASS";
    case Status::kFail: return "FAIL";
    case Status::kSkip: return "SKIP";
  }
  return "?";
}

Outcome run_guarded(Criterion f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {Status::kFail, std::string("exception: ") + e.what()};
  }
}

}  // namespace
}  // namespace tkgx

int main(int argc, char** argv) {
  using namespace tkgx;
  CLI::App app{"tkgx acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool failed = false, skipped = false;
  for (int i = 1; i <= 9; ++i) {
    if (only != 0 && only != i) continue;
    const auto o = run_guarded(kCriteria[i - 1]);
    std::cout << "criterion " << i << ": " << label(o.status) << (o.detail.empty() ? "" : ": ")
              << o.detail << std::endl;
    failed = failed || o.status == Status::kFail;
    skipped = skipped || o.status == Status::kSkip;
  }
  if (only == 10 || only == 0) {
    std::cout << "criterion 10: SKIP: full-scale ICEWS14 training is long-running and not run "
                 "by this suite (reported only)\n";
    if (only == 10) return 77;
  }
  if (failed) return 1;
  return only != 0 && skipped ? 77 : 0;
}
