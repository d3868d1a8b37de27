#pragma once

// Inference graphs rendered as explanations: versioned JSON and Graphviz DOT.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tkgx/engine.hpp"
#include "tkgx/kg_store.hpp"

namespace tkgx {

inline constexpr int kExplanationSchemaVersion = 1;

struct ExplanationNode {
  std::string entity;
  Timestamp timestamp = 0;
  double attention = 0.0;
  bool is_query = false;
  // Entity absent from the training data; its embedding row is untrained.
  bool unseen = false;
  friend bool operator==(const ExplanationNode&, const ExplanationNode&) = default;
};

struct ExplanationEdge {
  std::size_t from = 0;  // index into nodes
  std::size_t to = 0;
  std::string predicate;
  double contribution = 0.0;
  double attention = 0.0;
  std::size_t step = 0;
  friend bool operator==(const ExplanationEdge&, const ExplanationEdge&) = default;
};

struct ExplanationDocument {
  int schema_version = kExplanationSchemaVersion;
  std::string subject;
  std::string predicate;
  Timestamp time = 0;
  std::string predicted;  // empty when no candidate has positive score
  double predicted_score = 0.0;
  std::vector<ExplanationNode> nodes;
  std::vector<ExplanationEdge> edges;
  std::string fingerprint;
  friend bool operator==(const ExplanationDocument&, const ExplanationDocument&) = default;
};

// Nodes sorted by attention descending, then name, then timestamp; edges by
// contribution descending, then endpoint order and predicate. Nodes whose
// entity is false in `seen` are flagged unseen; an empty `seen` flags none.
ExplanationDocument build_explanation(const InferenceGraph& g,
                                      std::span<const std::pair<EntityId, double>> ranking,
                                      const Vocab& vocab, std::string fingerprint,
                                      const std::vector<bool>& seen = {});

std::string to_json(const ExplanationDocument& doc);
ExplanationDocument explanation_from_json(const std::string& text);

// Node width grows with attention; edge grey level darkens with
// contribution / max contribution.
std::string to_dot(const ExplanationDocument& doc);

// FNV-1a over the hyperparameters and every parameter value.
std::string model_fingerprint(const Model& model, const Hyperparams& hp);

// Edges whose (from entity, predicate, to entity, to timestamp) is not a fact
// of `facts`. Empty means the explanation is fully grounded.
std::vector<std::string> verify_explanation(const ExplanationDocument& doc, const Vocab& vocab,
                                            std::span<const Dataset* const> facts);

}  // namespace tkgx
