#pragma once

// Tool-calling geolocator: one session per extracted tag. The model sees the
// tag and its context, calls search_tool / select_tool / finish_tool, and the
// loop enforces the action budget and the per-place search cap.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"
#include "geoloc/gazetteer.hpp"
#include "geoloc/llm_gateway.hpp"
#include "geoloc/normalize.hpp"
#include "geoloc/prompts.hpp"
#include "geoloc/utf8.hpp"

namespace geoloc {

inline constexpr std::string_view kBudgetExhausted = "budget exhausted";
inline constexpr std::string_view kSearchCapError = "search budget exceeded for place";
inline constexpr std::string_view kUnknownIdError = "unknown geonameid";
inline constexpr std::string_view kDuplicateSelectError = "duplicate selection for this place and geonameid";

struct AgentBudgets {
  int action_budget = 15;
  int searches_per_place = 2;
  std::size_t max_candidates = 8;
  std::size_t context_chars = 400;  // either side of the sentence
};

struct Selection {
  std::string place;
  std::int64_t geonameid = -1;
  std::string context_note;
  bool literal = true;

  bool resolvable() const { return geonameid > 0; }
  bool operator==(const Selection&) const = default;
};

struct AgentSession {
  std::string tag_surface;
  std::string context_window;
  int actions_used = 0;
  std::map<std::string, int> searches_by_place;  // keyed by normalized query
  std::vector<Selection> selections;
  bool finished = false;
  bool failed = false;
  std::optional<std::string> finish_reason;
  std::string error;                  // set when failed
  std::vector<ChatMessage> transcript;  // system, user, then assistant/tool turns

  // Tool calls actually executed (the hard budget applies to this count).
  std::size_t tool_call_count() const {
    std::size_t n = 0;
    for (const auto& m : transcript) n += m.tool_calls.size();
    return n;
  }
};

inline void to_json(json& j, const Selection& s) {
  j = json{{"place", s.place}, {"geonameid", s.geonameid}, {"context", s.context_note}, {"literal", s.literal}};
}

inline void from_json(const json& j, Selection& s) {
  s.place = detail::required<std::string>(j, "place");
  s.geonameid = detail::required<std::int64_t>(j, "geonameid");
  s.context_note = j.value("context", std::string());
  s.literal = j.value("literal", true);
}

inline void to_json(json& j, const AgentSession& s) {
  j = json{{"tag", s.tag_surface},         {"context", s.context_window},
           {"actions_used", s.actions_used}, {"searches_by_place", s.searches_by_place},
           {"selections", s.selections},     {"finished", s.finished},
           {"failed", s.failed},             {"transcript", s.transcript}};
  j["finish_reason"] = s.finish_reason ? json(*s.finish_reason) : json(nullptr);
  if (s.failed) j["error"] = s.error;
}

// The sentence holding [start, end) plus up to `chars` code points either side.
inline std::string context_window(std::string_view text, std::size_t start, std::size_t end, std::size_t chars = 400) {
  auto terminator = [&](std::size_t i) {
    char c = text[i];
    if (c == '\n') return true;
    if (c != '.' && c != '!' && c != '?') return false;
    return i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
  };
  std::size_t s = start;
  while (s > 0 && !terminator(s - 1)) --s;
  while (s < start && std::isspace(static_cast<unsigned char>(text[s]))) ++s;
  std::size_t e = end;
  while (e < text.size() && !terminator(e)) ++e;
  if (e < text.size()) ++e;
  std::size_t lo = utf8::retreat(text, s, chars);
  std::size_t hi = utf8::advance(text, e, chars);
  return std::string(text.substr(lo, hi - lo));
}

namespace detail {

inline std::string tool_error(std::string_view message) { return json{{"error", message}}.dump(); }

inline std::optional<std::int64_t> integer_arg(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
  }
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && p == s.data() + s.size()) return out;
  }
  return std::nullopt;
}

inline std::optional<bool> bool_arg(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    if (v == "true") return true;
    if (v == "false") return false;
  }
  return std::nullopt;
}

inline std::string string_arg(const json& args, const char* key) {
  auto it = args.find(key);
  return it != args.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace detail

// Executes one tool call against the session. Every call, valid or not,
// consumes one action. Returns the tool result fed back to the model.
inline std::string handle_action(AgentSession& session, const ToolCall& call, const GazetteerIndex& index,
                                 const AgentBudgets& budgets = {}) {
  if (session.finished) throw ConsistencyError("handle_action on a finished session");
  ++session.actions_used;
  const json& args = call.arguments;
  if (!args.is_object()) return detail::tool_error("arguments must be a JSON object");

  if (call.name == "search_tool") {
    auto query = detail::string_arg(args, "query");
    auto key = normalize_name(query);
    if (key.empty()) return detail::tool_error("query must be a non-empty string");
    auto& used = session.searches_by_place[key];
    if (used >= budgets.searches_per_place) return detail::tool_error(kSearchCapError);
    ++used;
    auto cc = detail::string_arg(args, "country_code");
    std::optional<std::string_view> filter;
    if (!cc.empty()) filter = cc;
    json candidates = json::array();
    for (const auto& e : index.search(query, filter, std::max<std::size_t>(1, budgets.max_candidates)))
      candidates.push_back({{"geonameid", e.geonameid},
                            {"name", e.name},
                            {"feature_code", e.feature_code},
                            {"country_code", e.country_code},
                            {"population", e.population}});
    return json{{"candidates", candidates}}.dump();
  }

  if (call.name == "select_tool") {
    auto place = detail::string_arg(args, "place");
    if (place.empty()) return detail::tool_error("place must be a non-empty string");
    auto id = args.contains("geonameid") ? detail::integer_arg(args["geonameid"]) : std::nullopt;
    if (!id) return detail::tool_error("geonameid must be an integer");
    auto literal = args.contains("literal_toponym") ? detail::bool_arg(args["literal_toponym"]) : std::nullopt;
    if (!literal) return detail::tool_error("literal_toponym must be a boolean");
    if (*id != -1 && !index.find(*id)) return detail::tool_error(kUnknownIdError);
    for (const auto& s : session.selections)
      if (s.place == place && s.geonameid == *id) return detail::tool_error(kDuplicateSelectError);
    session.selections.push_back({place, *id, detail::string_arg(args, "context"), *literal});
    json ok{{"ok", true}, {"place", place}, {"geonameid", *id}};
    if (const auto* e = index.find(*id)) ok["name"] = e->name;
    return ok.dump();
  }

  if (call.name == "finish_tool") {
    session.finished = true;
    session.finish_reason = detail::string_arg(args, "reason");
    return json{{"ok", true}}.dump();
  }

  return detail::tool_error("unknown tool \"" + call.name + "\"");
}

inline constexpr std::string_view kToolNudge =
    "Please continue by calling one of the tools: search_tool, select_tool or finish_tool.";

inline AgentSession run_session(const std::string& tag, const std::string& context, ChatBackend& backend,
                                const GazetteerIndex& index, const AgentBudgets& budgets = {}) {
  if (tag.empty()) throw ValidationError("run_session: tag is empty");
  AgentSession s;
  s.tag_surface = tag;
  s.context_window = context;
  s.transcript.push_back({Role::System, agent_system_prompt(budgets.action_budget, budgets.searches_per_place), {}, {}});
  s.transcript.push_back({Role::User, agent_user_message(tag, context), {}, {}});

  auto force_finish = [&] {
    s.finished = true;
    s.finish_reason = std::string(kBudgetExhausted);
  };

  while (!s.finished) {
    if (s.actions_used >= budgets.action_budget) {
      force_finish();
      break;
    }
    ChatExchange ex;
    try {
      ex = backend.complete(s.transcript, agent_tools());
    } catch (const Error& e) {
      // Transport failures and unscripted replays end the session; what was
      // gathered so far stays in the transcript.
      s.failed = true;
      s.finished = true;
      s.error = e.what();
      break;
    }

    ChatMessage reply{Role::Assistant, ex.response_text, {}, {}};
    if (!ex.has_tool_calls()) {
      // A turn without a tool call still spends an action, otherwise a
      // chatty model could loop forever.
      ++s.actions_used;
      s.transcript.push_back(reply);
      s.transcript.push_back({Role::User, std::string(kToolNudge), {}, {}});
      continue;
    }

    std::vector<ChatMessage> results;
    for (const auto& call : *ex.tool_calls) {
      if (s.finished) break;
      if (s.actions_used >= budgets.action_budget) {
        force_finish();
        break;
      }
      reply.tool_calls.push_back(call);
      results.push_back({Role::Tool, handle_action(s, call, index, budgets), {}, call.id});
    }
    s.transcript.push_back(std::move(reply));
    for (auto& r : results) s.transcript.push_back(std::move(r));
  }
  return s;
}

// -- summaries -------------------------------------------------------------------

struct TagSession {
  std::string doc_id;
  TagSpan span;
  AgentSession session;
};

struct SessionFailure {
  std::string doc_id;
  TagSpan span;
  std::string error;
};

struct SelectionSummary {
  std::vector<SelectionRecord> records;
  std::vector<SessionFailure> failures;
};

inline SelectionSummary summarize_selections(const std::vector<TagSession>& sessions) {
  SelectionSummary out;
  for (const auto& ts : sessions) {
    if (ts.session.failed) {
      out.failures.push_back({ts.doc_id, ts.span, ts.session.error});
      continue;
    }
    for (const auto& sel : ts.session.selections)
      out.records.push_back({ts.doc_id, ts.span, sel.place, sel.geonameid, sel.literal, sel.context_note});
  }
  return out;
}

inline void to_json(json& j, const SessionFailure& f) {
  j = json{{"doc_id", f.doc_id}, {"span", f.span}, {"error", f.error}};
}

}  // namespace geoloc
