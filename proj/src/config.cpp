#include "tkgx/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tkgx {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      "data.dir",           "sampling.strategy", "sampling.budget",    "sampling.seed",
      "model.steps",        "model.prune_k",     "model.gamma",        "model.agg",
      "model.leaky_slope",  "model.dim_static",  "model.dim_time",     "model.dim_attention",
      "model.reverse_update", "model.init_seed", "train.lr",           "train.batch",
      "train.epochs",       "train.seed",        "train.skip_missing_answer",
      "train.valid_limit",  "train.beta1",       "train.beta2",        "train.eps",
  };
  return keys;
}

Config Config::parse(std::string_view text, std::string_view origin) {
  Config c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const auto& known = known_keys();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, std::string value) {
  const auto& known = known_keys();
  if (std::find(known.begin(), known.end(), key) == known.end())
    throw ConfigError("unknown key '" + key + "'");
  values_[key] = std::move(value);
}

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
  }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto [ptr, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': '" + *v + "' is not an integer");
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

namespace {

std::size_t non_negative(const Config& c, const std::string& key, std::size_t fallback) {
  const auto v = c.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

Hyperparams hyperparams_from(const Config& c) {
  Hyperparams hp;
  hp.steps = non_negative(c, "model.steps", hp.steps);
  hp.prune_k = non_negative(c, "model.prune_k", hp.prune_k);
  hp.gamma = c.get_double("model.gamma", hp.gamma);
  hp.leaky_slope = c.get_double("model.leaky_slope", hp.leaky_slope);
  hp.agg = parse_score_aggregation(c.get_string("model.agg", std::string(to_string(hp.agg))));
  hp.reverse_update = c.get_bool("model.reverse_update", hp.reverse_update);
  hp.sampling.strategy = parse_sampling_strategy(
      c.get_string("sampling.strategy", std::string(to_string(hp.sampling.strategy))));
  hp.sampling.budget = non_negative(c, "sampling.budget", hp.sampling.budget);
  hp.sampling.seed = non_negative(c, "sampling.seed", hp.sampling.seed);
  hp.validate();
  return hp;
}

TrainingConfig training_from(const Config& c) {
  TrainingConfig t;
  t.lr = c.get_double("train.lr", t.lr);
  t.batch = non_negative(c, "train.batch", t.batch);
  t.epochs = non_negative(c, "train.epochs", t.epochs);
  t.seed = non_negative(c, "train.seed", t.seed);
  t.skip_missing_answer = c.get_bool("train.skip_missing_answer", t.skip_missing_answer);
  t.valid_limit = non_negative(c, "train.valid_limit", t.valid_limit);
  t.beta1 = c.get_double("train.beta1", t.beta1);
  t.beta2 = c.get_double("train.beta2", t.beta2);
  t.eps = c.get_double("train.eps", t.eps);
  t.validate();
  return t;
}

ModelDims model_dims_from(const Config& c, std::size_t num_entities, std::size_t num_predicates) {
  ModelDims d;
  d.num_entities = num_entities;
  d.num_predicates = num_predicates;
  d.dim_static = non_negative(c, "model.dim_static", d.dim_static);
  d.dim_time = non_negative(c, "model.dim_time", d.dim_time);
  d.dim_attention = non_negative(c, "model.dim_attention", d.dim_attention);
  return d;
}

}  // namespace tkgx
