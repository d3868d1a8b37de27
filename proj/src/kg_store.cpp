#include "tkgx/kg_store.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

namespace tkgx {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// With id maps preloaded, a field that is not a known name but is an
// in-range integer refers to that id.
std::int32_t resolve(NameIndex& index, std::string_view field, bool numeric_ids) {
  if (numeric_ids) {
    if (const auto id = index.find(field); id >= 0) return id;
    std::int64_t v = 0;
    if (parse_int(field, v) && v >= 0 && static_cast<std::size_t>(v) < index.size())
      return static_cast<std::int32_t>(v);
  }
  return index.intern(field);
}

}  // namespace

std::int32_t NameIndex::intern(std::string_view name) {
  std::string key(name);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(names_.size());
  names_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::int32_t NameIndex::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  return it == ids_.end() ? -1 : it->second;
}

void NameIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << '\t' << i << '\n';
}

NameIndex NameIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::pair<std::int64_t, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto l = strip_cr(line);
    if (l.empty()) continue;
    const auto tab = l.rfind('\t');
    std::int64_t id = 0;
    if (tab == std::string_view::npos || !parse_int(l.substr(tab + 1), id))
      throw ParseError(path.string(), lineno, "expected name<TAB>id");
    rows.emplace_back(id, std::string(l.substr(0, tab)));
  }
  std::sort(rows.begin(), rows.end());
  NameIndex index;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<std::int64_t>(i))
      throw std::runtime_error(path.string() + ": ids are not dense");
    if (index.intern(rows[i].second) != static_cast<std::int32_t>(i))
      throw std::runtime_error(path.string() + ": duplicate name " + rows[i].second);
  }
  return index;
}

void Vocab::freeze() {
  frozen = true;
  entities_known = entities.size();
  predicates_known = predicates.size();
}

PredicateId Vocab::reciprocal(PredicateId p) const {
  if (!augmented) throw std::logic_error("vocab is not augmented");
  const auto base = static_cast<PredicateId>(base_predicates);
  if (p < 0 || p >= 2 * base) throw std::out_of_range("predicate id out of range");
  return p < base ? p + base : p - base;
}

void Vocab::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  entities.save(dir / "entity2id.tsv");
  predicates.save(dir / "relation2id.tsv");
  std::ofstream meta(dir / "vocab.meta");
  meta << "base_predicates\t" << base_predicates << "\naugmented\t" << (augmented ? 1 : 0)
       << "\n";
}

Vocab Vocab::load(const std::filesystem::path& dir) {
  Vocab v;
  v.entities = NameIndex::load(dir / "entity2id.tsv");
  v.predicates = NameIndex::load(dir / "relation2id.tsv");
  std::ifstream meta(dir / "vocab.meta");
  std::string key;
  std::int64_t value = 0;
  while (meta >> key >> value) {
    if (key == "base_predicates") v.base_predicates = static_cast<std::size_t>(value);
    if (key == "augmented") v.augmented = value != 0;
  }
  v.freeze();
  return v;
}

Timestamp parse_timestamp(std::string_view field) {
  std::int64_t value = 0;
  if (parse_int(field, value)) return value;
  // YYYY-MM-DD
  if (field.size() == 10 && field[4] == '-' && field[7] == '-') {
    std::int64_t y = 0, m = 0, d = 0;
    if (parse_int(field.substr(0, 4), y) && parse_int(field.substr(5, 2), m) &&
        parse_int(field.substr(8, 2), d)) {
      const std::chrono::year_month_day ymd{
          std::chrono::year{static_cast<int>(y)},
          std::chrono::month{static_cast<unsigned>(m)},
          std::chrono::day{static_cast<unsigned>(d)}};
      if (ymd.ok()) return std::chrono::sys_days{ymd}.time_since_epoch().count();
    }
  }
  throw std::invalid_argument("bad timestamp '" + std::string(field) + "'");
}

Dataset load_quadruples(const std::filesystem::path& path, std::shared_ptr<Vocab> vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset d;
  d.vocab = vocab ? std::move(vocab) : std::make_shared<Vocab>();
  if (d.vocab->augmented)
    throw std::logic_error("cannot ingest raw quadruples into an augmented vocab");
  Vocab& v = *d.vocab;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto l = strip_cr(line);
    if (l.empty()) continue;
    const auto f = split_tabs(l);
    std::int64_t extra = 0;
    if (f.size() != 4 && !(f.size() == 5 && parse_int(f[4], extra)))
      throw ParseError(path.string(), lineno,
                       "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty() || f[2].empty())
      throw ParseError(path.string(), lineno, "empty name field");
    Quadruple q;
    try {
      q.timestamp = parse_timestamp(f[3]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    q.subject = resolve(v.entities, f[0], v.numeric_ids);
    q.predicate = resolve(v.predicates, f[1], v.numeric_ids);
    q.object = resolve(v.entities, f[2], v.numeric_ids);
    if (v.frozen) {
      const auto ek = static_cast<EntityId>(v.entities_known);
      q.unseen = q.subject >= ek || q.object >= ek ||
                 q.predicate >= static_cast<PredicateId>(v.predicates_known);
    }
    d.quadruples.push_back(q);
  }
  return d;
}

Dataset augment_reciprocal(const Dataset& d) {
  if (d.augmented) throw std::logic_error("dataset is already augmented");
  if (!d.vocab) throw std::logic_error("dataset has no vocab");
  Vocab& v = *d.vocab;
  if (!v.augmented) {
    v.base_predicates = v.predicates.size();
    for (std::size_t p = 0; p < v.base_predicates; ++p) {
      const std::string inv = v.predicates.name(static_cast<PredicateId>(p)) + " (reciprocal)";
      v.predicates.intern(inv);
    }
    if (v.predicates.size() != 2 * v.base_predicates)
      throw std::runtime_error("reciprocal predicate name collides with an existing predicate");
    v.augmented = true;
    if (v.frozen) v.predicates_known = v.predicates.size();
  }
  Dataset out = d;
  out.augmented = true;
  out.quadruples.reserve(2 * d.quadruples.size());
  const auto base = static_cast<PredicateId>(v.base_predicates);
  for (const auto& q : d.quadruples) {
    if (q.predicate >= base) throw std::logic_error("predicate id exceeds base vocab");
    Quadruple r = q;
    r.subject = q.object;
    r.object = q.subject;
    r.predicate = q.predicate + base;
    out.quadruples.push_back(r);
  }
  return out;
}

SplitResult time_split(const Dataset& d, Timestamp t_valid, Timestamp t_test) {
  if (!(t_valid < t_test)) throw std::invalid_argument("time_split requires t_valid < t_test");
  SplitResult r;
  for (Dataset* s : {&r.train, &r.valid, &r.test}) {
    s->vocab = d.vocab;
    s->augmented = d.augmented;
  }
  r.train.split = SplitTag::kTrain;
  r.valid.split = SplitTag::kValid;
  r.test.split = SplitTag::kTest;
  for (const auto& q : d.quadruples) {
    if (q.timestamp < t_valid)
      r.train.quadruples.push_back(q);
    else if (q.timestamp < t_test)
      r.valid.quadruples.push_back(q);
    else
      r.test.quadruples.push_back(q);
  }
  const std::pair<const char*, const Dataset*> named[] = {
      {"train", &r.train}, {"valid", &r.valid}, {"test", &r.test}};
  for (const auto& [name, s] : named)
    if (s->quadruples.empty()) r.warnings.push_back(std::string(name) + " split is empty");
  return r;
}

std::pair<Timestamp, Timestamp> normalize_timestamps(std::span<Dataset* const> datasets) {
  Timestamp lo = std::numeric_limits<Timestamp>::max();
  bool any = false;
  for (const Dataset* d : datasets)
    for (const auto& q : d->quadruples) {
      lo = std::min(lo, q.timestamp);
      any = true;
    }
  if (!any) return {0, 1};
  Timestamp unit = 0;
  for (const Dataset* d : datasets)
    for (const auto& q : d->quadruples) unit = std::gcd(unit, q.timestamp - lo);
  if (unit == 0) unit = 1;
  for (Dataset* d : datasets)
    for (auto& q : d->quadruples) q.timestamp = (q.timestamp - lo) / unit;
  return {lo, unit};
}

std::vector<bool> seen_entities(const Dataset& d, std::size_t num_entities) {
  std::vector<bool> seen(num_entities, false);
  auto mark = [&](EntityId e) {
    if (e >= 0 && static_cast<std::size_t>(e) < num_entities) seen[static_cast<std::size_t>(e)] = true;
  };
  for (const auto& q : d.quadruples) {
    mark(q.subject);
    mark(q.object);
  }
  return seen;
}

DatasetSplits load_dataset_dir(const std::filesystem::path& dir, bool augment) {
  DatasetSplits s;
  s.vocab = std::make_shared<Vocab>();
  if (std::filesystem::exists(dir / "entity2id.txt") &&
      std::filesystem::exists(dir / "relation2id.txt")) {
    s.vocab->entities = NameIndex::load(dir / "entity2id.txt");
    s.vocab->predicates = NameIndex::load(dir / "relation2id.txt");
    s.vocab->numeric_ids = true;
  }
  s.train = load_quadruples(dir / "train.txt", s.vocab);
  s.valid = load_quadruples(dir / "valid.txt", s.vocab);
  s.test = load_quadruples(dir / "test.txt", s.vocab);
  s.train.split = SplitTag::kTrain;
  s.valid.split = SplitTag::kValid;
  s.test.split = SplitTag::kTest;
  Dataset* parts[] = {&s.train, &s.valid, &s.test};
  std::tie(s.epoch, s.unit) = normalize_timestamps(parts);
  if (augment) {
    for (Dataset* p : parts) {
      const auto tag = p->split;
      *p = augment_reciprocal(*p);
      p->split = tag;
    }
  }
  return s;
}

TemporalAdjacency::TemporalAdjacency(std::span<const Quadruple> quadruples,
                                     std::size_t num_entities) {
  offsets_.assign(num_entities + 1, 0);
  for (const auto& q : quadruples) {
    if (q.subject < 0 || static_cast<std::size_t>(q.subject) >= num_entities)
      throw std::out_of_range("quadruple subject outside entity range");
    ++offsets_[static_cast<std::size_t>(q.subject) + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  entries_.resize(quadruples.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& q : quadruples)
    entries_[cursor[static_cast<std::size_t>(q.subject)]++] =
        PriorEdge{q.predicate, q.object, q.timestamp};
  for (std::size_t e = 0; e < num_entities; ++e) {
    std::sort(entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[e]),
              entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[e + 1]),
              [](const PriorEdge& a, const PriorEdge& b) {
                return std::tie(a.timestamp, a.predicate, a.neighbor) <
                       std::tie(b.timestamp, b.predicate, b.neighbor);
              });
  }
}

TemporalAdjacency TemporalAdjacency::from_datasets(std::span<const Dataset* const> parts) {
  std::vector<Quadruple> all;
  std::size_t n = 0;
  for (const Dataset* d : parts) {
    all.insert(all.end(), d->quadruples.begin(), d->quadruples.end());
    if (d->vocab) n = std::max(n, d->vocab->num_entities());
  }
  return TemporalAdjacency(all, n);
}

std::span<const PriorEdge> TemporalAdjacency::edges(EntityId entity) const {
  if (entity < 0 || static_cast<std::size_t>(entity) >= num_entities()) return {};
  const auto e = static_cast<std::size_t>(entity);
  return std::span<const PriorEdge>(entries_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]);
}

std::span<const PriorEdge> TemporalAdjacency::prior_edges(EntityId entity, Timestamp t) const {
  const auto all = edges(entity);
  const auto end = std::lower_bound(all.begin(), all.end(), t,
                                    [](const PriorEdge& e, Timestamp v) { return e.timestamp < v; });
  return all.first(static_cast<std::size_t>(end - all.begin()));
}

}  // namespace tkgx
