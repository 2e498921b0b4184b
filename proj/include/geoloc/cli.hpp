#pragma once

// Command-line front end. Every stage reads and writes files, so stages can be
// rerun one at a time:
//
//   geoloc ingest   --geonames dump.tsv --out index.jsonl
//   geoloc extract  --docs docs.jsonl --format json --out spans.jsonl [--replay t.jsonl | --record t.jsonl]
//   geoloc geocode  --docs docs.jsonl --spans spans.jsonl --index index.jsonl --out selections.jsonl
//   geoloc eval     --pred spans.jsonl --gold gold.jsonl [--pred-geo ... --gold-geo ... --index ...] --out report.json
//   geoloc serve    --port 8080 --data-dir sessions/
//
// Settings resolve as flags, then GEOLOC_* environment variables, then the
// --config JSON file, then built-in defaults.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "geoloc/annotation_server.hpp"
#include "geoloc/evaluator.hpp"
#include "geoloc/gazetteer.hpp"
#include "geoloc/llm_http.hpp"
#include "geoloc/pipeline.hpp"

namespace geoloc::cli {

constexpr int kUsageError = 2;

// Everything a config file may set. Unset optionals fall back to
// format-dependent defaults.
struct Settings {
  ModelConfig model;
  std::string format = "json";
  std::optional<std::size_t> min_chunk;
  std::optional<std::size_t> max_chunk;
  int jobs = 1;
  std::optional<std::string> fewshot;
  MergeConfig merge;
  AgentBudgets budgets;
};

inline json to_json_settings(const Settings& s) {
  json j{{"model", s.model},
         {"format", s.format},
         {"jobs", s.jobs},
         {"connectors", s.merge.connectors},
         {"max_gap", s.merge.max_gap},
         {"action_budget", s.budgets.action_budget},
         {"searches_per_place", s.budgets.searches_per_place},
         {"max_candidates", s.budgets.max_candidates},
         {"context_chars", s.budgets.context_chars}};
  if (s.min_chunk) j["min_chunk"] = *s.min_chunk;
  if (s.max_chunk) j["max_chunk"] = *s.max_chunk;
  if (s.fewshot) j["fewshot"] = *s.fewshot;
  return j;
}

inline void apply_config_file(Settings& s, const std::string& path) {
  auto in = open_input(path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("config file " + path + " is not a JSON object");
  if (j.contains("model")) s.model = j["model"].get<ModelConfig>();
  s.format = j.value("format", s.format);
  if (j.contains("min_chunk")) s.min_chunk = j["min_chunk"].get<std::size_t>();
  if (j.contains("max_chunk")) s.max_chunk = j["max_chunk"].get<std::size_t>();
  s.jobs = j.value("jobs", s.jobs);
  if (j.contains("fewshot")) s.fewshot = j["fewshot"].get<std::string>();
  s.merge.connectors = j.value("connectors", s.merge.connectors);
  s.merge.max_gap = j.value("max_gap", s.merge.max_gap);
  s.budgets.action_budget = j.value("action_budget", s.budgets.action_budget);
  s.budgets.searches_per_place = j.value("searches_per_place", s.budgets.searches_per_place);
  s.budgets.max_candidates = j.value("max_candidates", s.budgets.max_candidates);
  s.budgets.context_chars = j.value("context_chars", s.budgets.context_chars);
}

namespace detail {

inline std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

inline int env_int(const char* name, const std::string& value) {
  try {
    std::size_t used = 0;
    int n = std::stoi(value, &used);
    if (used == value.size()) return n;
  } catch (const std::exception&) {
  }
  throw ValidationError(std::string(name) + " must be an integer, got \"" + value + "\"");
}

}  // namespace detail

inline void apply_environment(Settings& s) {
  using detail::env;
  if (auto v = env("GEOLOC_ENDPOINT_URL")) s.model.endpoint_url = *v;
  if (auto v = env("GEOLOC_MODEL_ID")) s.model.model_id = *v;
  if (auto v = env("GEOLOC_API_KEY_ENV")) s.model.api_key_env = *v;
  if (auto v = env("GEOLOC_MAX_RETRIES")) s.model.max_retries = detail::env_int("GEOLOC_MAX_RETRIES", *v);
  if (auto v = env("GEOLOC_MAX_IN_FLIGHT")) s.model.max_in_flight = detail::env_int("GEOLOC_MAX_IN_FLIGHT", *v);
  if (auto v = env("GEOLOC_JOBS")) s.jobs = detail::env_int("GEOLOC_JOBS", *v);
  if (auto v = env("GEOLOC_FORMAT")) s.format = *v;
}

// Flag values are bound to these and only copied into Settings when the flag
// was actually given.
struct CommonFlags {
  std::string config;
  std::string endpoint_url, model_id, api_key_env;
  int max_retries = 0, max_in_flight = 0, jobs = 0;
  std::string record, replay, run_dir;

  CLI::Option *endpoint_opt = nullptr, *model_opt = nullptr, *key_opt = nullptr, *retries_opt = nullptr,
              *inflight_opt = nullptr, *jobs_opt = nullptr;

  void add_to(CLI::App& sub) {
    sub.add_option("--config", config, "JSON config file");
    endpoint_opt = sub.add_option("--endpoint-url", endpoint_url, "chat-completions endpoint");
    model_opt = sub.add_option("--model-id", model_id, "model id sent with each request");
    key_opt = sub.add_option("--api-key-env", api_key_env, "environment variable holding the API key");
    retries_opt = sub.add_option("--max-retries", max_retries)->check(CLI::NonNegativeNumber);
    inflight_opt = sub.add_option("--max-in-flight", max_in_flight)->check(CLI::PositiveNumber);
    jobs_opt = sub.add_option("--jobs", jobs, "documents processed in parallel")->check(CLI::PositiveNumber);
    auto* rec = sub.add_option("--record", record, "append every model exchange to this transcript");
    auto* rep = sub.add_option("--replay", replay, "answer model requests from this transcript only");
    rec->excludes(rep);
    sub.add_option("--run-dir", run_dir, "directory for config snapshot, transcript and run report");
  }

  Settings resolve() const {
    Settings s;
    if (!config.empty())
      apply_config_file(s, config);
    else if (auto path = detail::env("GEOLOC_CONFIG"))
      apply_config_file(s, *path);
    apply_environment(s);
    if (endpoint_opt->count()) s.model.endpoint_url = endpoint_url;
    if (model_opt->count()) s.model.model_id = model_id;
    if (key_opt->count()) s.model.api_key_env = api_key_env;
    if (retries_opt->count()) s.model.max_retries = max_retries;
    if (inflight_opt->count()) s.model.max_in_flight = max_in_flight;
    if (jobs_opt->count()) s.jobs = jobs;
    return s;
  }

  std::string transcript_path() const {
    if (!record.empty()) return record;
    if (!run_dir.empty() && replay.empty()) return (std::filesystem::path(run_dir) / "transcript.jsonl").string();
    return {};
  }

  std::shared_ptr<ChatBackend> backend(const Settings& s) const {
    if (!replay.empty()) return std::make_shared<ReplayBackend>(load_transcript(replay));
    auto live = make_http_backend(s.model);
    if (auto path = transcript_path(); !path.empty()) return std::make_shared<RecordingBackend>(live, path);
    return live;
  }

  void snapshot(const Settings& s, const std::string& stage) const {
    if (run_dir.empty()) return;
    std::filesystem::create_directories(run_dir);
    json j = to_json_settings(s);
    j["stage"] = stage;
    if (!replay.empty()) j["replay"] = replay;
    if (auto t = transcript_path(); !t.empty()) j["transcript"] = t;
    auto out = open_output((std::filesystem::path(run_dir) / (stage + "_config.json")).string());
    out << j.dump(2) << '\n';
  }

  void report(const json& r, const std::string& stage) const {
    if (run_dir.empty()) return;
    auto out = open_output((std::filesystem::path(run_dir) / (stage + "_report.json")).string());
    out << r.dump(2) << '\n';
  }
};

inline void write_lines(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  auto out = open_output(path);
  fn(out);
  out.flush();
  if (!out) throw Error("failed writing " + path);
}

// -- subcommands ------------------------------------------------------------

struct IngestArgs {
  std::string geonames, out;
};

inline int do_ingest(const IngestArgs& a, std::ostream& out) {
  IngestReport rep;
  auto index = ingest_geonames(a.geonames, &rep);
  save_index(index, a.out);
  out << "indexed " << index.size() << " entries";
  if (rep.skipped) out << " (" << rep.skipped << " malformed rows skipped)";
  out << '\n';
  return 0;
}

struct ExtractArgs {
  CommonFlags common;
  std::string docs, out, format, fewshot;
  std::size_t min_chunk = 0, max_chunk = 0;
  CLI::Option *format_opt = nullptr, *min_opt = nullptr, *max_opt = nullptr, *fewshot_opt = nullptr;
};

inline int do_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  auto s = a.common.resolve();
  if (a.format_opt->count()) s.format = a.format;
  if (a.min_opt->count()) s.min_chunk = a.min_chunk;
  if (a.max_opt->count()) s.max_chunk = a.max_chunk;
  if (a.fewshot_opt->count()) s.fewshot = a.fewshot;

  auto opts = extract_options(output_format_from_string(s.format));
  if (s.min_chunk) opts.window.min_len = *s.min_chunk;
  if (s.max_chunk) opts.window.max_len = *s.max_chunk;
  if (opts.window.min_len >= opts.window.max_len) throw ValidationError("--min-chunk must be below --max-chunk");
  if (s.fewshot) opts.bundle = bundle_with_fewshot_file(opts.format, *s.fewshot);
  opts.merge = s.merge;
  opts.jobs = s.jobs;

  auto docs = load_documents(a.docs);
  a.common.snapshot(s, "extract");
  auto backend = a.common.backend(s);
  auto results = extract_corpus(docs, *backend, opts);

  std::size_t chunks = 0, spans = 0;
  json warnings = json::array();
  for (const auto& r : results) {
    chunks += r.chunks;
    spans += r.spans.size();
    for (const auto& w : r.warnings) {
      warnings.push_back(w);
      err << "warning: " << w << '\n';
    }
  }
  write_lines(a.out, [&](std::ostream& o) { write_spans(o, to_span_map(results)); });
  a.common.report({{"stage", "extract"}, {"documents", docs.size()}, {"chunks", chunks}, {"spans", spans},
                   {"warnings", warnings}},
                  "extract");
  out << "extracted " << spans << " spans from " << docs.size() << " documents (" << chunks << " chunks)\n";
  return 0;
}

struct GeocodeArgs {
  CommonFlags common;
  std::string docs, spans, index, out;
};

inline int do_geocode(const GeocodeArgs& a, std::ostream& out, std::ostream& err) {
  auto s = a.common.resolve();
  auto docs = load_documents(a.docs);
  auto by_id = index_documents(docs);
  auto spans = load_spans(a.spans, &by_id);
  auto index = load_index(a.index);
  a.common.snapshot(s, "geocode");
  auto backend = a.common.backend(s);
  auto result = geocode_corpus(docs, spans, *backend, index, s.budgets, s.jobs);

  write_lines(a.out, [&](std::ostream& o) { write_selections(o, result.summary.records); });
  if (!a.common.run_dir.empty()) {
    write_lines((std::filesystem::path(a.common.run_dir) / "sessions.jsonl").string(), [&](std::ostream& o) {
      for (const auto& ts : result.sessions)
        o << json{{"doc_id", ts.doc_id}, {"span", ts.span}, {"session", ts.session}}.dump() << '\n';
    });
  }
  a.common.report({{"stage", "geocode"},
                   {"tags", result.sessions.size()},
                   {"selections", result.summary.records.size()},
                   {"failures", result.summary.failures}},
                  "geocode");
  for (const auto& f : result.summary.failures)
    err << "error: doc " << f.doc_id << " \"" << f.span.surface << "\": " << f.error << '\n';
  out << "geocoded " << result.sessions.size() << " tags, " << result.summary.records.size() << " selections, "
      << result.summary.failures.size() << " failed sessions\n";
  return result.summary.failures.empty() ? 0 : 1;
}

struct EvalArgs {
  std::string pred, gold, pred_geo, gold_geo, index, docs, continents, income, out, error_map;
};

inline int do_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<Document> docs;
  DocumentIndex by_id;
  if (!a.docs.empty()) {
    docs = load_documents(a.docs);
    by_id = index_documents(docs);
  }
  const DocumentIndex* check = a.docs.empty() ? nullptr : &by_id;
  auto pred = load_spans(a.pred, check);
  auto gold = load_spans(a.gold, check);

  std::optional<std::vector<SelectionRecord>> pred_geo;
  std::optional<GoldGeocodeMap> gold_geo;
  std::optional<GazetteerIndex> index;
  if (!a.pred_geo.empty()) pred_geo = load_selections(a.pred_geo);
  if (!a.gold_geo.empty()) gold_geo = load_gold_geocodes(a.gold_geo, check);
  if (!a.index.empty()) index = load_index(a.index);
  if ((pred_geo || gold_geo) && !(pred_geo && gold_geo && index))
    throw ValidationError("geocode evaluation needs --pred-geo, --gold-geo and --index together");

  auto continents = a.continents.empty() ? default_continents() : load_continents_csv(a.continents);
  std::optional<GroupTable> income;
  if (!a.income.empty()) income = load_income_csv(a.income);

  EvalInputs in;
  in.pred = &pred;
  in.gold = &gold;
  in.pred_geo = pred_geo ? &*pred_geo : nullptr;
  in.gold_geo = gold_geo ? &*gold_geo : nullptr;
  in.index = index ? &*index : nullptr;
  in.continents = &continents;
  in.income = income ? &*income : nullptr;
  auto report = build_report(in);
  write_lines(a.out, [&](std::ostream& o) { o << report.dump(2) << '\n'; });

  if (!a.error_map.empty()) {
    if (!pred_geo) throw ValidationError("--error-map needs geocode inputs");
    auto n = export_error_map(*pred_geo, *gold_geo, *index, a.error_map);
    out << "wrote " << n << " error-map rows\n";
  }
  const auto& ex = report["ner"]["exact"];
  out << "exact P=" << ex["precision"] << " R=" << ex["recall"] << " F1=" << ex["f1"] << '\n';
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
};

inline int do_serve(const ServeArgs& a, std::ostream& out) {
  SessionStore store(a.data_dir);
  httplib::Server server;
  mount_annotation_routes(server, store);
  out << "annotation service on http://" << a.host << ':' << a.port << '\n' << std::flush;
  if (!server.listen(a.host, a.port)) throw Error("could not listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

// -- entry point ------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Toponym extraction and geocoding pipeline", "geoloc"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "build a gazetteer index from a GeoNames dump");
  ingest_cmd->add_option("--geonames", ingest.geonames, "GeoNames TSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest.out, "index output path")->required();

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "tag toponyms with the model");
  extract_cmd->add_option("--docs", extract.docs, "documents.jsonl")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--out", extract.out, "spans.jsonl output")->required();
  extract.format_opt =
      extract_cmd->add_option("--format", extract.format, "model output format")->check(CLI::IsMember({"json", "markdown"}));
  extract.min_opt = extract_cmd->add_option("--min-chunk", extract.min_chunk, "minimum chunk length in characters");
  extract.max_opt = extract_cmd->add_option("--max-chunk", extract.max_chunk, "maximum chunk length in characters");
  extract.fewshot_opt = extract_cmd->add_option("--fewshot", extract.fewshot, "few-shot examples JSON")
                            ->check(CLI::ExistingFile);
  extract.common.add_to(*extract_cmd);

  GeocodeArgs geocode;
  auto* geocode_cmd = app.add_subcommand("geocode", "resolve extracted toponyms with the agent");
  geocode_cmd->add_option("--docs", geocode.docs)->required()->check(CLI::ExistingFile);
  geocode_cmd->add_option("--spans", geocode.spans)->required()->check(CLI::ExistingFile);
  geocode_cmd->add_option("--index", geocode.index, "saved index or raw GeoNames TSV")->required()->check(CLI::ExistingFile);
  geocode_cmd->add_option("--out", geocode.out, "selections.jsonl output")->required();
  geocode.common.add_to(*geocode_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold annotations");
  eval_cmd->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", ev.gold)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred-geo", ev.pred_geo, "selections.jsonl")->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold-geo", ev.gold_geo, "gold geocodes")->check(CLI::ExistingFile);
  eval_cmd->add_option("--index", ev.index)->check(CLI::ExistingFile);
  eval_cmd->add_option("--docs", ev.docs, "verify spans against these documents")->check(CLI::ExistingFile);
  eval_cmd->add_option("--continents", ev.continents, "country_code,continent CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--income", ev.income, "country_code,income_level CSV")->check(CLI::ExistingFile);
  eval_cmd->add_option("--error-map", ev.error_map, "CSV of per-toponym error distances");
  eval_cmd->add_option("--out", ev.out, "report.json output")->required();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "run the annotation reconciliation service");
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port)->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--data-dir", serve.data_dir, "session store directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands())
      if (sub->parsed()) failing = sub;
    err << failing->help();
    return kUsageError;
  }

  try {
    if (ingest_cmd->parsed()) return do_ingest(ingest, out);
    if (extract_cmd->parsed()) return do_extract(extract, out, err);
    if (geocode_cmd->parsed()) return do_geocode(geocode, out, err);
    if (eval_cmd->parsed()) return do_eval(ev, out);
    if (serve_cmd->parsed()) return do_serve(serve, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kUsageError;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"geoloc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace geoloc::cli
