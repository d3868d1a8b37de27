#include "tkgx/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace tkgx {

using nlohmann::json;

ExplanationDocument build_explanation(const InferenceGraph& g,
                                      std::span<const std::pair<EntityId, double>> ranking,
                                      const Vocab& vocab, std::string fingerprint,
                                      const std::vector<bool>& seen) {
  auto unseen = [&](EntityId e) {
    return !seen.empty() && (static_cast<std::size_t>(e) >= seen.size() ||
                             !seen[static_cast<std::size_t>(e)]);
  };
  ExplanationDocument doc;
  const auto& q = g.query();
  doc.subject = vocab.entities.name(q.subject);
  doc.predicate = vocab.predicates.name(q.predicate);
  doc.time = q.time;
  doc.fingerprint = std::move(fingerprint);
  if (!ranking.empty() && ranking.front().second > 0.0) {
    doc.predicted = vocab.entities.name(ranking.front().first);
    doc.predicted_score = ranking.front().second;
  }

  if (g.nodes().empty()) {
    doc.nodes.push_back({doc.subject, q.time, 1.0, true, unseen(q.subject)});
    return doc;
  }
  std::vector<std::size_t> order(g.nodes().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = g.nodes()[a];
    const auto& y = g.nodes()[b];
    if (x.attention != y.attention) return x.attention > y.attention;
    const auto& nx = vocab.entities.name(x.entity);
    const auto& ny = vocab.entities.name(y.entity);
    if (nx != ny) return nx < ny;
    return x.timestamp < y.timestamp;
  });
  std::vector<std::size_t> position(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& n = g.nodes()[order[i]];
    position[order[i]] = i;
    doc.nodes.push_back({vocab.entities.name(n.entity), n.timestamp, n.attention,
                         order[i] == InferenceGraph::kQueryNode, unseen(n.entity)});
  }
  for (const auto& e : g.edges())
    doc.edges.push_back({position[e.from], position[e.to], vocab.predicates.name(e.predicate),
                         e.contribution, e.attention, e.added_at_step});
  std::sort(doc.edges.begin(), doc.edges.end(), [](const auto& a, const auto& b) {
    if (a.contribution != b.contribution) return a.contribution > b.contribution;
    return std::tie(a.from, a.to, a.predicate) < std::tie(b.from, b.to, b.predicate);
  });
  return doc;
}

std::string to_json(const ExplanationDocument& doc) {
  json j;
  j["schema_version"] = doc.schema_version;
  j["query"] = {{"subject", doc.subject}, {"predicate", doc.predicate}, {"time", doc.time}};
  j["prediction"] = {{"entity", doc.predicted}, {"score", doc.predicted_score}};
  j["fingerprint"] = doc.fingerprint;
  j["nodes"] = json::array();
  for (const auto& n : doc.nodes)
    j["nodes"].push_back({{"entity", n.entity},
                          {"timestamp", n.timestamp},
                          {"attention", n.attention},
                          {"is_query", n.is_query},
                          {"unseen", n.unseen}});
  j["edges"] = json::array();
  for (const auto& e : doc.edges)
    j["edges"].push_back({{"from", e.from},
                          {"to", e.to},
                          {"predicate", e.predicate},
                          {"contribution", e.contribution},
                          {"attention", e.attention},
                          {"step", e.step}});
  return j.dump(2) + "\n";
}

ExplanationDocument explanation_from_json(const std::string& text) {
  const auto j = json::parse(text);
  ExplanationDocument doc;
  doc.schema_version = j.at("schema_version").get<int>();
  if (doc.schema_version != kExplanationSchemaVersion)
    throw std::runtime_error("unsupported explanation schema_version " +
                             std::to_string(doc.schema_version));
  doc.subject = j.at("query").at("subject").get<std::string>();
  doc.predicate = j.at("query").at("predicate").get<std::string>();
  doc.time = j.at("query").at("time").get<Timestamp>();
  doc.predicted = j.at("prediction").at("entity").get<std::string>();
  doc.predicted_score = j.at("prediction").at("score").get<double>();
  doc.fingerprint = j.at("fingerprint").get<std::string>();
  for (const auto& n : j.at("nodes"))
    doc.nodes.push_back({n.at("entity").get<std::string>(), n.at("timestamp").get<Timestamp>(),
                         n.at("attention").get<double>(), n.at("is_query").get<bool>(),
                         n.value("unseen", false)});
  for (const auto& e : j.at("edges")) {
    ExplanationEdge edge{e.at("from").get<std::size_t>(), e.at("to").get<std::size_t>(),
                         e.at("predicate").get<std::string>(), e.at("contribution").get<double>(),
                         e.at("attention").get<double>(), e.at("step").get<std::size_t>()};
    if (edge.from >= doc.nodes.size() || edge.to >= doc.nodes.size())
      throw std::runtime_error("explanation edge refers to a missing node");
    doc.edges.push_back(std::move(edge));
  }
  return doc;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string to_dot(const ExplanationDocument& doc) {
  double max_att = 0.0;
  for (const auto& n : doc.nodes) max_att = std::max(max_att, n.attention);
  double max_c = 0.0;
  for (const auto& e : doc.edges) max_c = std::max(max_c, e.contribution);

  std::string out = "digraph explanation {\n  rankdir=RL;\n";
  out += "  label=\"" + dot_escape(doc.subject + " / " + doc.predicate + " / ? @ " +
                                   std::to_string(doc.time)) +
         "\";\n  node [shape=ellipse, fixedsize=true];\n";
  for (std::size_t i = 0; i < doc.nodes.size(); ++i) {
    const auto& n = doc.nodes[i];
    const double rel = max_att > 0.0 ? n.attention / max_att : 0.0;
    const double width = 0.8 + 1.6 * rel;
    out += "  n" + std::to_string(i) + " [label=\"" + dot_escape(n.entity) + "\\nt=" +
           std::to_string(n.timestamp) + "\\na=" + fixed(n.attention, 4) +
           "\", width=" + fixed(width, 3) + ", height=" + fixed(width * 0.5, 3) +
           (n.is_query ? ", peripheries=2" : "") + (n.unseen ? ", style=dashed" : "") + "];\n";
  }
  for (const auto& e : doc.edges) {
    const double darkness = max_c > 0.0 ? e.contribution / max_c : 0.0;
    const int grey = static_cast<int>(std::lround(255.0 * 0.85 * (1.0 - darkness)));
    char color[8];
    std::snprintf(color, sizeof color, "#%02x%02x%02x", grey, grey, grey);
    out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
           dot_escape(e.predicate) + "\", color=\"" + color + "\", penwidth=" +
           fixed(1.0 + 3.0 * darkness, 3) + ", darkness=" + fixed(darkness, 6) + "];\n";
  }
  out += "}\n";
  return out;
}

std::string model_fingerprint(const Model& model, const Hyperparams& hp) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::string cfg = "L=" + std::to_string(hp.steps) + ";K=" + std::to_string(hp.prune_k) +
                          ";N=" + std::to_string(hp.sampling.budget) + ";s=" +
                          std::string(to_string(hp.sampling.strategy)) + ";g=" +
                          fixed(hp.gamma, 6) + ";agg=" + std::string(to_string(hp.agg)) +
                          ";seed=" + std::to_string(hp.sampling.seed);
  feed(cfg.data(), cfg.size());
  for (const auto& [name, p] : model.params().all()) {
    feed(name.data(), name.size());
    feed(p.value.data(), p.value.size() * sizeof(double));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> verify_explanation(const ExplanationDocument& doc, const Vocab& vocab,
                                            std::span<const Dataset* const> facts) {
  std::set<std::tuple<EntityId, PredicateId, EntityId, Timestamp>> known;
  for (const Dataset* d : facts)
    for (const auto& q : d->quadruples) known.emplace(q.subject, q.predicate, q.object, q.timestamp);
  std::vector<std::string> problems;
  for (const auto& e : doc.edges) {
    const auto describe = [&] {
      return doc.nodes[e.from].entity + " -[" + e.predicate + "]-> " + doc.nodes[e.to].entity +
             " @ " + std::to_string(doc.nodes[e.to].timestamp);
    };
    if (e.from >= doc.nodes.size() || e.to >= doc.nodes.size()) {
      problems.push_back("edge endpoint missing from node list");
      continue;
    }
    if (e.contribution < 0.0) problems.push_back("negative contribution on " + describe());
    const auto s = vocab.entities.find(doc.nodes[e.from].entity);
    const auto p = vocab.predicates.find(e.predicate);
    const auto o = vocab.entities.find(doc.nodes[e.to].entity);
    if (s < 0 || p < 0 || o < 0 || !known.count({s, p, o, doc.nodes[e.to].timestamp}))
      problems.push_back("not a fact: " + describe());
  }
  return problems;
}

}  // namespace tkgx
