#include "tkgx/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tkgx/config.hpp"
#include "tkgx/engine.hpp"
#include "tkgx/evaluation.hpp"
#include "tkgx/explain.hpp"
#include "tkgx/kg_store.hpp"
#include "tkgx/segment_ops.hpp"
#include "tkgx/trainer.hpp"

namespace tkgx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

Config load_config(const GlobalOptions& g, const Config& base = {}) {
  Config c = base;
  if (!g.config_path.empty()) {
    const auto overrides = Config::load(g.config_path);
    for (const auto& [k, v] : overrides.values()) c.set(k, v);
  }
  if (g.seed) {
    c.set("sampling.seed", std::to_string(*g.seed));
    c.set("train.seed", std::to_string(*g.seed));
  }
  return c;
}

fs::path data_dir(const std::string& flag, const Config& c) {
  const auto dir = flag.empty() ? c.get_string("data.dir", "") : flag;
  if (dir.empty()) throw std::runtime_error("no dataset directory (use --data or data.dir)");
  if (!fs::is_directory(dir)) throw std::runtime_error("dataset directory '" + dir + "' not found");
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Checkpoint {
  Model model;
  Config config;
  Timestamp epoch = 0;
  Timestamp unit = 1;
};

void save_checkpoint(const fs::path& dir, const Model& model, const Config& config,
                     const DatasetSplits& data, const FitResult& fit) {
  fs::create_directories(dir);
  model.params().save(dir / "model.ckpt");
  json manifest;
  manifest["format"] = "tkgx-checkpoint";
  manifest["version"] = 1;
  manifest["config"] = config.values();
  manifest["time_epoch"] = data.epoch;
  manifest["time_unit"] = data.unit;
  manifest["num_entities"] = model.dims().num_entities;
  manifest["num_predicates"] = model.dims().num_predicates;
  manifest["best_epoch"] = fit.best_epoch;
  manifest["best_valid_mrr"] = fit.best_valid_mrr;
  manifest["diverged"] = fit.diverged;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  data.vocab->save(dir / "vocab");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("checkpoint directory '" + dir.string() + "' not found");
  const auto manifest = json::parse(read_file(dir / "manifest.json"));
  if (manifest.value("format", "") != "tkgx-checkpoint")
    throw std::runtime_error("'" + dir.string() + "' is not a checkpoint directory");
  Checkpoint c;
  for (const auto& [k, v] : manifest.at("config").items()) c.config.set(k, v.get<std::string>());
  c.epoch = manifest.at("time_epoch").get<Timestamp>();
  c.unit = manifest.at("time_unit").get<Timestamp>();
  c.model = Model::from_parameters(ParameterSet::load(dir / "model.ckpt"));
  return c;
}

void check_compatible(const Model& model, const DatasetSplits& data) {
  if (model.dims().num_entities != data.vocab->num_entities() ||
      model.dims().num_predicates != data.vocab->num_predicates())
    throw std::runtime_error("checkpoint vocabulary does not match the dataset (" +
                             std::to_string(model.dims().num_entities) + " vs " +
                             std::to_string(data.vocab->num_entities()) + " entities)");
}

TemporalAdjacency full_adjacency(const DatasetSplits& d) {
  const Dataset* parts[] = {&d.train, &d.valid, &d.test};
  return TemporalAdjacency::from_datasets(parts);
}

FactIndex full_facts(const DatasetSplits& d) {
  const Dataset* parts[] = {&d.train, &d.valid, &d.test};
  return FactIndex(parts);
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long k = 0;
    try {
      k = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || k < 1) throw std::runtime_error("bad --ks entry '" + item + "'");
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) throw std::runtime_error("--ks needs at least one value");
  return ks;
}

json metrics_json(const Metrics& m) {
  json j;
  j["count"] = m.count;
  j["mrr"] = m.mrr;
  for (const auto& [k, h] : m.hits) j["hits@" + std::to_string(k)] = h;
  return j;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"tkgx: explainable link forecasting on temporal knowledge graphs", "tkgx"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config_path, "flat key = value config file");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "overrides sampling.seed and train.seed");

  std::string data_flag;

  auto* ingest = app.add_subcommand("ingest", "load a dataset directory and report statistics");
  std::string ingest_out;
  ingest->add_option("--data", data_flag, "directory with train/valid/test.txt");
  ingest->add_option("--out", ingest_out, "write the vocabulary here");

  auto* train = app.add_subcommand("train", "fit a model and write a checkpoint directory");
  std::string train_out;
  train->add_option("--data", data_flag, "directory with train/valid/test.txt");
  train->add_option("--out", train_out, "checkpoint directory")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "rank the answers of a split");
  std::string ckpt_dir, filter_name = "time-aware", ks_text = "1,3,10", ranks_out, split_name = "test";
  std::size_t limit = 0;
  evaluate_cmd->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  evaluate_cmd->add_option("--data", data_flag, "directory with train/valid/test.txt");
  evaluate_cmd->add_option("--filter", filter_name, "raw, static or time-aware");
  evaluate_cmd->add_option("--ks", ks_text, "comma separated Hits@k cut-offs");
  evaluate_cmd->add_option("--split", split_name, "valid or test");
  evaluate_cmd->add_option("--ranks-out", ranks_out, "per-query rank TSV");
  evaluate_cmd->add_option("--limit", limit, "score only the first N quadruples");

  auto* forecast_cmd = app.add_subcommand("forecast", "rank objects for one query");
  std::string subject, predicate, time_text, explain_out = "explanation.json", format = "json";
  std::size_t top = 10;
  forecast_cmd->add_option("--checkpoint", ckpt_dir, "checkpoint directory")->required();
  forecast_cmd->add_option("--data", data_flag, "directory with train/valid/test.txt");
  forecast_cmd->add_option("--subject", subject, "subject entity name")->required();
  forecast_cmd->add_option("--predicate", predicate, "predicate name")->required();
  forecast_cmd->add_option("--time", time_text, "query time (YYYY-MM-DD or integer)")->required();
  forecast_cmd->add_option("--top", top, "number of entities to print");
  forecast_cmd->add_option("--explain-out", explain_out, "explanation output path");
  forecast_cmd->add_option("--format", format, "json or dot")->check(CLI::IsMember({"json", "dot"}));

  auto* explain = app.add_subcommand("explain", "render or verify a saved explanation");
  std::string input, explain_dest;
  explain->add_option("--input", input, "explanation JSON")->required();
  explain->add_option("--format", format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  explain->add_option("--out", explain_dest, "output path (stdout when omitted)");
  explain->add_option("--data", data_flag, "verify every edge against this dataset");

  auto* bench = app.add_subcommand("bench-segments", "time segment kernels against naive loops");
  std::size_t bench_size = 100000, bench_segments = 1000, bench_iters = 5;
  bench->add_option("--size", bench_size, "number of values");
  bench->add_option("--segments", bench_segments, "number of segments");
  bench->add_option("--iters", bench_iters, "timing repetitions");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }
  if (seed_opt->count()) global.seed = seed_value;

  try {
    if (ingest->parsed()) {
      const auto start = std::chrono::steady_clock::now();
      const auto config = load_config(global);
      const auto d = load_dataset_dir(data_dir(data_flag, config), false);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      json j = {{"train", d.train.size()},
                {"valid", d.valid.size()},
                {"test", d.test.size()},
                {"entities", d.vocab->num_entities()},
                {"predicates", d.vocab->num_predicates()},
                {"predicates_with_reciprocals", 2 * d.vocab->num_predicates()},
                {"time_epoch", d.epoch},
                {"time_unit", d.unit},
                {"seconds", secs}};
      if (!ingest_out.empty()) d.vocab->save(ingest_out);
      out << j.dump(2) << "\n";
      return 0;
    }

    if (train->parsed()) {
      auto config = load_config(global);
      const auto dir = data_dir(data_flag, config);
      config.set("data.dir", dir.string());
      const auto hp = hyperparams_from(config);
      const auto tc = training_from(config);
      const auto d = load_dataset_dir(dir);
      const auto adj = full_adjacency(d);
      const auto facts = full_facts(d);
      Timestamp t_max = 1;
      for (const auto* s : {&d.train, &d.valid, &d.test})
        for (const auto& q : s->quadruples) t_max = std::max(t_max, q.timestamp);
      auto model = Model::initialized(
          model_dims_from(config, d.vocab->num_entities(), d.vocab->num_predicates()), hp.steps,
          t_max, static_cast<std::uint64_t>(config.get_int("model.init_seed", 0)));
      const auto result = fit(model, adj, d.train, d.valid, facts, hp, tc, [&](const EpochStats& s) {
        err << json{{"epoch", s.epoch}, {"train_loss", s.train_loss}, {"valid_mrr", s.valid_mrr},
                    {"valid_hits@1", s.valid_hits1}}.dump()
            << "\n";
      });
      save_checkpoint(train_out, model, config, d, result);
      out << json{{"checkpoint", train_out},
                  {"best_epoch", result.best_epoch},
                  {"best_valid_mrr", result.best_valid_mrr},
                  {"diverged", result.diverged},
                  {"batches", result.batch_losses.size()}}
                 .dump(2)
          << "\n";
      return result.diverged ? 3 : 0;
    }

    if (evaluate_cmd->parsed()) {
      const auto mode = parse_filter_mode(filter_name);
      const auto ks = parse_ks(ks_text);
      auto ckpt = load_checkpoint(ckpt_dir);
      const auto config = load_config(global, ckpt.config);
      const auto hp = hyperparams_from(config);
      const auto d = load_dataset_dir(data_dir(data_flag, config));
      check_compatible(ckpt.model, d);
      const Dataset* split = nullptr;
      if (split_name == "test") split = &d.test;
      else if (split_name == "valid") split = &d.valid;
      else throw std::runtime_error("--split must be valid or test");
      EvalOptions opts;
      opts.limit = limit;
      const auto records = evaluate(ckpt.model, full_adjacency(d), *split, full_facts(d), hp, opts);
      const auto m = summarize(records, mode, ks);
      if (!ranks_out.empty()) {
        std::string tsv = "subject\tpredicate\ttime\tanswer\trank\n";
        for (const auto& r : records)
          tsv += d.vocab->entities.name(r.query.subject) + "\t" +
                 d.vocab->predicates.name(r.query.predicate) + "\t" +
                 std::to_string(r.query.time) + "\t" + d.vocab->entities.name(r.answer) + "\t" +
                 std::to_string(r.rank(mode)) + "\n";
        write_file(ranks_out, tsv);
      }
      json j = metrics_json(m);
      j["filter"] = std::string(to_string(mode));
      j["split"] = split_name;
      out << j.dump(2) << "\n";
      return 0;
    }

    if (forecast_cmd->parsed()) {
      auto ckpt = load_checkpoint(ckpt_dir);
      const auto config = load_config(global, ckpt.config);
      const auto hp = hyperparams_from(config);
      const auto d = load_dataset_dir(data_dir(data_flag, config));
      check_compatible(ckpt.model, d);
      const auto s = d.vocab->entities.find(subject);
      if (s < 0) throw std::runtime_error("unknown subject '" + subject + "'");
      const auto p = d.vocab->predicates.find(predicate);
      if (p < 0) throw std::runtime_error("unknown predicate '" + predicate + "'");
      const auto raw_t = parse_timestamp(time_text);
      if ((raw_t - ckpt.epoch) % ckpt.unit != 0)
        throw std::runtime_error("time '" + time_text + "' is not on the dataset's time grid");
      const Query q{s, p, (raw_t - ckpt.epoch) / ckpt.unit};
      auto rng = make_query_rng(hp.sampling.seed, 0);
      const auto f = forecast(ckpt.model, full_adjacency(d), q, hp, rng);
      const auto seen = seen_entities(d.train, d.vocab->num_entities());
      if (!seen[static_cast<std::size_t>(s)])
        err << "note: subject '" << subject << "' does not occur in the training data\n";
      for (std::size_t i = 0; i < std::min(top, f.ranking.size()); ++i) {
        const auto e = static_cast<std::size_t>(f.ranking[i].first);
        out << (i + 1) << "\t" << d.vocab->entities.name(f.ranking[i].first) << "\t"
            << f.ranking[i].second << (seen[e] ? "" : "\tunseen") << "\n";
      }
      const auto doc = build_explanation(f.graph, f.ranking, *d.vocab,
                                         model_fingerprint(ckpt.model, hp), seen);
      write_file(explain_out, format == "dot" ? to_dot(doc) : to_json(doc));
      err << "explanation written to " << explain_out << "\n";
      return 0;
    }

    if (explain->parsed()) {
      const auto doc = explanation_from_json(read_file(input));
      if (!data_flag.empty()) {
        const auto d = load_dataset_dir(data_flag);
        const Dataset* parts[] = {&d.train, &d.valid, &d.test};
        const auto problems = verify_explanation(doc, *d.vocab, parts);
        for (const auto& p : problems) err << "unverified edge: " << p << "\n";
        if (!problems.empty()) return 4;
      }
      const auto text = format == "dot" ? to_dot(doc) : to_json(doc);
      if (explain_dest.empty()) out << text;
      else write_file(explain_dest, text);
      return 0;
    }

    if (bench->parsed()) {
      const auto config = load_config(global);
      const auto seed = static_cast<std::uint64_t>(config.get_int("sampling.seed", 0));
      json j = json::array();
      for (const auto& r : seg::benchmark(bench_size, bench_segments, bench_iters, seed))
        j.push_back({{"kernel", std::string(r.kernel)},
                     {"size", bench_size},
                     {"segments", bench_segments},
                     {"naive_seconds", r.naive_seconds},
                     {"kernel_seconds", r.kernel_seconds},
                     {"speedup", r.speedup()}});
      out << j.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace tkgx
