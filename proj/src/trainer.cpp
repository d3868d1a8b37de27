#include "tkgx/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tkgx {

void TrainingConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train.lr must be >= 0");
  if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
}

ad::Var bce_loss(ad::Tape& tape, std::span<const QueryTerms> queries) {
  std::vector<ad::Var> parts;
  std::vector<double> labels;
  std::vector<seg::SegmentId> segment;
  std::vector<std::size_t> counts;
  for (const auto& q : queries) {
    if (q.scores.size() != q.labels.size())
      throw std::invalid_argument("scores and labels differ in length");
    if (q.labels.empty()) continue;
    double total = 0.0;
    for (const auto v : q.scores.value()) {
      if (v < 0.0) throw std::invalid_argument("entity scores must be non-negative");
      total += v;
    }
    if (total == 0.0) continue;
    const auto id = static_cast<seg::SegmentId>(counts.size());
    parts.push_back(q.scores);
    labels.insert(labels.end(), q.labels.begin(), q.labels.end());
    segment.insert(segment.end(), q.labels.size(), id);
    counts.push_back(q.labels.size());
  }
  if (counts.empty()) throw std::invalid_argument("no query contributes to the loss");
  const auto nq = counts.size();

  const auto x = tape.concat(parts);
  const auto totals = tape.segment_sum(x, segment, nq);
  std::vector<std::size_t> gather_idx(segment.begin(), segment.end());
  const auto normalized = tape.div(x, tape.gather(totals, gather_idx));
  const auto a = tape.clamp(normalized, kScoreClamp, 1.0 - kScoreClamp);
  const auto ones = tape.constant(std::vector<double>(labels.size(), 1.0));
  std::vector<double> neg(labels.size());
  std::transform(labels.begin(), labels.end(), neg.begin(), [](double y) { return 1.0 - y; });
  const auto y = tape.constant(labels);
  const auto not_y = tape.constant(std::move(neg));
  const auto log_a = tape.log(a);
  const auto log_1ma = tape.log(tape.axpby(1.0, ones, -1.0, a));
  const auto term = tape.scale(tape.add(tape.mul(y, log_a), tape.mul(not_y, log_1ma)), -1.0);
  std::vector<double> inv(nq);
  for (std::size_t i = 0; i < nq; ++i) inv[i] = 1.0 / static_cast<double>(counts[i]);
  const auto per_query = tape.mul(tape.segment_sum(term, segment, nq), tape.constant(std::move(inv)));
  return tape.mean(per_query);
}

double bce_loss(std::span<const std::vector<double>> scores,
                std::span<const std::vector<double>> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("query count mismatch");
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t q = 0; q < scores.size(); ++q) {
    const auto& s = scores[q];
    const auto& y = labels[q];
    if (s.size() != y.size()) throw std::invalid_argument("scores and labels differ in length");
    if (s.empty()) continue;
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    if (total == 0.0) continue;
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double a = std::clamp(s[i] / total, kScoreClamp, 1.0 - kScoreClamp);
      acc -= y[i] * std::log(a) + (1.0 - y[i]) * std::log(1.0 - a);
    }
    sum += acc / static_cast<double>(s.size());
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no query contributes to the loss");
  return sum / static_cast<double>(used);
}

void Adam::step(ParameterSet& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params.all()) {
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      p.value[i] -= cfg_.lr * update;
    }
  }
}

BatchLoss accumulate_batch_gradients(Model& model, const TemporalAdjacency& adj,
                                     std::span<const Quadruple> batch, const Hyperparams& hp,
                                     const TrainingConfig& cfg, std::uint64_t rng_stream) {
  ad::Tape tape;
  std::vector<QueryTerms> terms;
  terms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& q = batch[i];
    auto rng = make_query_rng(hp.sampling.seed ^ rng_stream, i);
    auto out = run_reasoning(tape, model, adj, {q.subject, q.predicate, q.timestamp}, hp, rng);
    QueryTerms t;
    t.scores = out.scores.scores;
    t.labels.reserve(out.scores.entities.size());
    bool hit = false;
    for (const auto e : out.scores.entities) {
      t.labels.push_back(e == q.object ? 1.0 : 0.0);
      hit = hit || e == q.object;
    }
    if (!hit && cfg.skip_missing_answer) continue;
    terms.push_back(std::move(t));
  }
  BatchLoss r;
  std::size_t used = 0;
  for (const auto& t : terms) {
    double total = 0.0;
    for (const auto v : t.scores.value()) total += v;
    if (!t.labels.empty() && total != 0.0) ++used;
  }
  if (used == 0) return r;
  const auto loss = bce_loss(tape, terms);
  r.loss = loss.scalar();
  r.queries_used = used;
  tape.backward(loss);
  return r;
}

namespace {

bool all_finite(const ParameterSet& params) {
  for (const auto& [name, p] : params.all())
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!std::isfinite(p.value[i]) || !std::isfinite(p.grad[i])) return false;
  return true;
}

void copy_values(const ParameterSet& from, ParameterSet& to) {
  for (auto& [name, p] : to.all()) p.value = from.get(name).value;
}

}  // namespace

FitResult fit(Model& model, const TemporalAdjacency& adj, const Dataset& train,
              const Dataset& valid, const FactIndex& facts, const Hyperparams& hp,
              const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  hp.validate();
  FitResult result;
  if (cfg.epochs == 0) return result;

  ParameterSet best = model.params();
  ParameterSet last_good = model.params();
  Adam adam(cfg);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Quadruple> batch;
  std::uint64_t stream = cfg.seed * 0x9e3779b97f4a7c15ULL;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      batch.clear();
      for (std::size_t j = start; j < std::min(order.size(), start + cfg.batch); ++j)
        batch.push_back(train.quadruples[order[j]]);
      model.params().zero_grad();
      const auto bl = accumulate_batch_gradients(model, adj, batch, hp, cfg, ++stream);
      if (bl.queries_used == 0) continue;
      if (!std::isfinite(bl.loss) || !all_finite(model.params())) {
        result.diverged = true;
        break;
      }
      adam.step(model.params());
      if (!all_finite(model.params())) {
        result.diverged = true;
        break;
      }
      copy_values(model.params(), last_good);
      result.batch_losses.push_back(bl.loss);
      loss_sum += bl.loss;
      ++loss_batches;
    }
    if (result.diverged) {
      copy_values(last_good, model.params());
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    if (valid.size() > 0) {
      EvalOptions opts;
      opts.limit = cfg.valid_limit;
      const auto records = evaluate(model, adj, valid, facts, hp, opts);
      const std::size_t ks[] = {1};
      const auto m = summarize(records, FilterMode::kTimeAware, ks);
      stats.valid_mrr = m.mrr;
      stats.valid_hits1 = m.hits.at(1);
    }
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.valid_mrr > result.best_valid_mrr) {
      result.best_valid_mrr = stats.valid_mrr;
      result.best_epoch = epoch;
      copy_values(model.params(), best);
    }
  }
  if (!result.diverged || result.best_epoch > 0) copy_values(best, model.params());
  model.params().zero_grad();
  return result;
}

}  // namespace tkgx
