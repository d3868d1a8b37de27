#pragma once

// Temporal knowledge graph storage: quadruple ingestion, reciprocal
// augmentation, time-based splitting and the time-sorted adjacency index.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tkgx {

using EntityId = std::int32_t;
using PredicateId = std::int32_t;
using Timestamp = std::int64_t;

struct Quadruple {
  EntityId subject = 0;
  PredicateId predicate = 0;
  EntityId object = 0;
  Timestamp timestamp = 0;
  // Set when the record names an entity or predicate unknown to a frozen vocab.
  bool unseen = false;

  friend bool operator==(const Quadruple& a, const Quadruple& b) {
    return a.subject == b.subject && a.predicate == b.predicate &&
           a.object == b.object && a.timestamp == b.timestamp;
  }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Bidirectional name <-> dense id map. Ids are assigned in first-appearance
// order.
class NameIndex {
 public:
  std::int32_t intern(std::string_view name);
  std::int32_t find(std::string_view name) const;  // -1 when absent
  const std::string& name(std::int32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  void save(const std::filesystem::path& path) const;
  static NameIndex load(const std::filesystem::path& path);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

struct Vocab {
  NameIndex entities;
  NameIndex predicates;
  // When frozen, names that are not yet known are still appended but marked
  // unseen (ids >= the *_known counts).
  bool frozen = false;
  std::size_t entities_known = 0;
  std::size_t predicates_known = 0;
  // Number of predicates before reciprocal augmentation; 0 until augmented.
  std::size_t base_predicates = 0;
  bool augmented = false;
  // Set when ids were preloaded from entity2id/relation2id maps; quadruple
  // fields may then be either names or integer ids.
  bool numeric_ids = false;

  void freeze();
  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_predicates() const { return predicates.size(); }
  PredicateId reciprocal(PredicateId p) const;

  void save(const std::filesystem::path& dir) const;
  static Vocab load(const std::filesystem::path& dir);
};

enum class SplitTag { kTrain, kValid, kTest, kUnsplit };

struct Dataset {
  std::vector<Quadruple> quadruples;
  std::shared_ptr<Vocab> vocab;
  SplitTag split = SplitTag::kUnsplit;
  bool augmented = false;

  std::size_t size() const { return quadruples.size(); }
};

// Parses "YYYY-MM-DD" into days since 1970-01-01, or a plain integer.
Timestamp parse_timestamp(std::string_view field);

// Reads a 4-column TSV (subject, predicate, object, timestamp). A fifth
// integer column, present in some public releases, is ignored. A null vocab
// starts a fresh one. Timestamps are kept in raw units (see
// normalize_timestamps).
Dataset load_quadruples(const std::filesystem::path& path,
                        std::shared_ptr<Vocab> vocab = nullptr);

// Adds (o, p^-1, s, t) for every (s, p, o, t), with p^-1 = p + |P_base|.
Dataset augment_reciprocal(const Dataset& d);

// seen[e] is true when entity e occurs as subject or object in `d`.
std::vector<bool> seen_entities(const Dataset& d, std::size_t num_entities);

struct SplitResult {
  Dataset train, valid, test;
  std::vector<std::string> warnings;
};

// train: t < t_valid; valid: t_valid <= t < t_test; test: t >= t_test.
SplitResult time_split(const Dataset& d, Timestamp t_valid, Timestamp t_test);

// Shifts every timestamp by the minimum over all given datasets and divides by
// the gcd of the offsets, so timestamps become dense units starting at 0.
// Returns the (epoch, unit) pair used.
std::pair<Timestamp, Timestamp> normalize_timestamps(
    std::span<Dataset* const> datasets);

// train/valid/test sharing one vocab, loaded from <dir>/{train,valid,test}.txt.
// When <dir>/entity2id.txt and relation2id.txt exist they fix the id space.
struct DatasetSplits {
  Dataset train, valid, test;
  std::shared_ptr<Vocab> vocab;
  Timestamp epoch = 0;
  Timestamp unit = 1;
};

DatasetSplits load_dataset_dir(const std::filesystem::path& dir,
                               bool augment = true);

struct PriorEdge {
  PredicateId predicate = 0;
  EntityId neighbor = 0;
  Timestamp timestamp = 0;

  friend bool operator==(const PriorEdge&, const PriorEdge&) = default;
};

// Per-entity edge lists sorted ascending by timestamp (ties by predicate,
// then neighbor). Immutable after construction.
class TemporalAdjacency {
 public:
  TemporalAdjacency() = default;
  TemporalAdjacency(std::span<const Quadruple> quadruples,
                    std::size_t num_entities);
  static TemporalAdjacency from_datasets(std::span<const Dataset* const> parts);

  // Entries of `entity` with timestamp strictly before t, ascending in time.
  std::span<const PriorEdge> prior_edges(EntityId entity, Timestamp t) const;
  std::span<const PriorEdge> edges(EntityId entity) const;

  std::size_t num_entities() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_entries() const { return entries_.size(); }

 private:
  std::vector<std::size_t> offsets_;  // CSR row pointers
  std::vector<PriorEdge> entries_;
};

}  // namespace tkgx
