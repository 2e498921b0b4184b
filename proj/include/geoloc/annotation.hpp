#pragma once

// Reconciliation sessions: two tag sets for one document are diffed into
// agreed spans and overlap-clustered conflicts, which annotators resolve
// (A / B / Both / Neither) before the improved gold set is exported.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"

namespace geoloc {

enum class Resolution { A, B, Both, Neither };

inline const char* to_string(Resolution r) {
  switch (r) {
    case Resolution::A: return "A";
    case Resolution::B: return "B";
    case Resolution::Both: return "Both";
    case Resolution::Neither: return "Neither";
  }
  return "?";
}

inline Resolution resolution_from_string(const std::string& s) {
  if (s == "A") return Resolution::A;
  if (s == "B") return Resolution::B;
  if (s == "Both") return Resolution::Both;
  if (s == "Neither") return Resolution::Neither;
  throw ValidationError("unknown resolution \"" + s + "\" (expected A, B, Both or Neither)");
}

struct ResolutionEvent {
  Resolution choice;
  std::string annotator;
  bool operator==(const ResolutionEvent&) const = default;
};

struct Conflict {
  int id = 0;
  std::string doc_id;
  std::size_t region_start = 0, region_end = 0;
  std::vector<TagSpan> option_a, option_b;
  std::optional<Resolution> resolution;  // latest decision
  std::optional<std::string> resolved_by;
  std::vector<ResolutionEvent> history;

  bool resolved() const { return resolution.has_value(); }
  bool operator==(const Conflict&) const = default;
};

struct Session {
  std::string id;
  std::string doc_id;
  std::string text;
  std::string kind = "diff";  // "diff" or "review"
  std::vector<Conflict> conflicts;
  std::vector<TagSpan> agreed_spans;
  long version = 0;

  bool operator==(const Session&) const = default;
};

inline void to_json(json& j, const Conflict& c) {
  j = json{{"id", c.id},
           {"doc_id", c.doc_id},
           {"region", {{"start", c.region_start}, {"end", c.region_end}}},
           {"option_a", c.option_a},
           {"option_b", c.option_b},
           {"resolution", c.resolution ? json(to_string(*c.resolution)) : json(nullptr)},
           {"resolved_by", c.resolved_by ? json(*c.resolved_by) : json(nullptr)}};
  json h = json::array();
  for (const auto& e : c.history) h.push_back({{"resolution", to_string(e.choice)}, {"annotator", e.annotator}});
  j["history"] = h;
}

inline void from_json(const json& j, Conflict& c) {
  c.id = detail::required<int>(j, "id");
  c.doc_id = detail::required<std::string>(j, "doc_id");
  const auto& region = detail::required<json>(j, "region");
  c.region_start = detail::required_offset(region, "start");
  c.region_end = detail::required_offset(region, "end");
  c.option_a = j.value("option_a", std::vector<TagSpan>{});
  c.option_b = j.value("option_b", std::vector<TagSpan>{});
  c.resolution.reset();
  c.resolved_by.reset();
  if (j.contains("resolution") && !j["resolution"].is_null())
    c.resolution = resolution_from_string(j["resolution"].get<std::string>());
  if (j.contains("resolved_by") && !j["resolved_by"].is_null()) c.resolved_by = j["resolved_by"].get<std::string>();
  c.history.clear();
  for (const auto& e : j.value("history", json::array()))
    c.history.push_back({resolution_from_string(e.at("resolution").get<std::string>()), e.at("annotator").get<std::string>()});
}

inline void to_json(json& j, const Session& s) {
  j = json{{"id", s.id},        {"doc_id", s.doc_id},       {"text", s.text},
           {"kind", s.kind},    {"conflicts", s.conflicts}, {"agreed_spans", s.agreed_spans},
           {"version", s.version}};
}

inline void from_json(const json& j, Session& s) {
  s.id = j.value("id", std::string());
  s.doc_id = detail::required<std::string>(j, "doc_id");
  s.text = detail::required<std::string>(j, "text");
  s.kind = j.value("kind", std::string("diff"));
  s.conflicts = j.value("conflicts", std::vector<Conflict>{});
  s.agreed_spans = j.value("agreed_spans", std::vector<TagSpan>{});
  s.version = j.value("version", 0L);
}

namespace detail {

inline std::vector<TagSpan> unique_sorted(const Document& doc, std::vector<TagSpan> spans) {
  for (const auto& s : spans) verify_span(doc.text, s, doc.id);
  std::sort(spans.begin(), spans.end(), by_position);
  spans.erase(std::unique(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.same_range(b); }),
              spans.end());
  return spans;
}

inline bool contains_range(const std::vector<TagSpan>& v, const TagSpan& s) {
  return std::any_of(v.begin(), v.end(), [&](const TagSpan& x) { return x.same_range(s); });
}

}  // namespace detail

inline Session create_session(const Document& doc, const std::vector<TagSpan>& tags_a,
                              const std::vector<TagSpan>& tags_b) {
  auto a = detail::unique_sorted(doc, tags_a);
  auto b = detail::unique_sorted(doc, tags_b);

  Session s;
  s.doc_id = doc.id;
  s.text = doc.text;

  struct Item {
    TagSpan span;
    bool from_a;
  };
  std::vector<Item> disputed;
  for (const auto& x : a) {
    if (detail::contains_range(b, x))
      s.agreed_spans.push_back(x);
    else
      disputed.push_back({x, true});
  }
  for (const auto& x : b)
    if (!detail::contains_range(a, x)) disputed.push_back({x, false});

  // Transitive closure of overlap via union-find.
  std::vector<std::size_t> parent(disputed.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < disputed.size(); ++i)
    for (std::size_t j = i + 1; j < disputed.size(); ++j)
      if (disputed[i].span.overlaps(disputed[j].span)) parent[find(i)] = find(j);

  std::map<std::size_t, Conflict> clusters;
  for (std::size_t i = 0; i < disputed.size(); ++i) {
    auto& c = clusters[find(i)];
    const auto& sp = disputed[i].span;
    if (c.option_a.empty() && c.option_b.empty()) {
      c.region_start = sp.start;
      c.region_end = sp.end;
    }
    c.region_start = std::min(c.region_start, sp.start);
    c.region_end = std::max(c.region_end, sp.end);
    (disputed[i].from_a ? c.option_a : c.option_b).push_back(sp);
  }
  for (auto& [_, c] : clusters) {
    c.doc_id = doc.id;
    std::sort(c.option_a.begin(), c.option_a.end(), by_position);
    std::sort(c.option_b.begin(), c.option_b.end(), by_position);
    s.conflicts.push_back(std::move(c));
  }
  std::sort(s.conflicts.begin(), s.conflicts.end(), [](const Conflict& x, const Conflict& y) {
    return std::tie(x.region_start, x.region_end) < std::tie(y.region_start, y.region_end);
  });
  for (std::size_t i = 0; i < s.conflicts.size(); ++i) s.conflicts[i].id = static_cast<int>(i + 1);
  return s;
}

// Optimistic concurrency: `expected_version` must equal the session version.
// A given annotator decides a conflict once; another annotator may revise it.
inline void resolve(Session& s, int conflict_id, Resolution choice, const std::string& annotator,
                    long expected_version) {
  if (expected_version != s.version)
    throw ConflictError("stale version " + std::to_string(expected_version) + " (session is at version " +
                        std::to_string(s.version) + ")");
  if (annotator.empty()) throw ValidationError("annotator id is required");
  auto it = std::find_if(s.conflicts.begin(), s.conflicts.end(), [&](const Conflict& c) { return c.id == conflict_id; });
  if (it == s.conflicts.end())
    throw NotFound("conflict " + std::to_string(conflict_id) + " not in session " + s.id);
  for (const auto& e : it->history)
    if (e.annotator == annotator)
      throw ConflictError("annotator " + annotator + " already resolved conflict " + std::to_string(conflict_id));
  it->history.push_back({choice, annotator});
  it->resolution = choice;
  it->resolved_by = annotator;
  ++s.version;
}

inline std::vector<int> unresolved_ids(const Session& s) {
  std::vector<int> ids;
  for (const auto& c : s.conflicts)
    if (!c.resolved()) ids.push_back(c.id);
  return ids;
}

inline std::vector<TagSpan> export_gold(const Session& s) {
  if (auto open = unresolved_ids(s); !open.empty()) throw UnresolvedConflicts(open);
  std::vector<TagSpan> out = s.agreed_spans;
  for (const auto& c : s.conflicts) {
    auto r = *c.resolution;
    if (r == Resolution::A || r == Resolution::Both) out.insert(out.end(), c.option_a.begin(), c.option_a.end());
    if (r == Resolution::B || r == Resolution::Both) out.insert(out.end(), c.option_b.begin(), c.option_b.end());
  }
  std::sort(out.begin(), out.end(), by_position);
  out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.same_range(b); }),
            out.end());
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i - 1].overlaps(out[i]))
      throw ConflictError("overlap in export: [" + std::to_string(out[i - 1].start) + "," +
                          std::to_string(out[i - 1].end) + ") and [" + std::to_string(out[i].start) + "," +
                          std::to_string(out[i].end) + "); re-resolve the conflict");
  return out;
}

inline void write_export(std::ostream& out, const Session& s) {
  for (const auto& span : export_gold(s)) out << span_record(s.doc_id, span).dump() << '\n';
}

// One conflict per span the geolocator flagged as not literal: option A keeps
// the tag, option B drops it.
inline std::vector<Conflict> flag_review_queue(const std::vector<SelectionRecord>& selections) {
  std::vector<Conflict> out;
  std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
  for (const auto& sel : selections) {
    if (sel.literal) continue;
    if (!seen.insert({sel.doc_id, sel.span.start, sel.span.end}).second) continue;
    Conflict c;
    c.doc_id = sel.doc_id;
    c.region_start = sel.span.start;
    c.region_end = sel.span.end;
    c.option_a = {sel.span};
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Conflict& x, const Conflict& y) {
    return std::tie(x.doc_id, x.region_start, x.region_end) < std::tie(y.doc_id, y.region_start, y.region_end);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i + 1);
  return out;
}

// Review session over a document's current tags: flagged spans become
// keep/drop conflicts, everything else is agreed.
inline Session create_review_session(const Document& doc, const std::vector<TagSpan>& tags,
                                     const std::vector<SelectionRecord>& selections) {
  auto spans = detail::unique_sorted(doc, tags);
  std::vector<SelectionRecord> mine;
  for (const auto& s : selections)
    if (s.doc_id == doc.id) {
      verify_span(doc.text, s.span, doc.id);
      mine.push_back(s);
    }
  Session s;
  s.doc_id = doc.id;
  s.text = doc.text;
  s.kind = "review";
  s.conflicts = flag_review_queue(mine);
  for (const auto& t : spans) {
    bool flagged = std::any_of(s.conflicts.begin(), s.conflicts.end(),
                               [&](const Conflict& c) { return c.option_a.front().same_range(t); });
    if (!flagged) s.agreed_spans.push_back(t);
  }
  return s;
}

// -- persistence -----------------------------------------------------------------------

// One JSON file per session, replaced atomically (write temp, then rename).
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      auto name = entry.path().filename().string();
      if (entry.path().extension() != ".json" || name.size() < 7 || name[0] != 's') continue;
      try {
        next_id_ = std::max(next_id_, std::stol(name.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }

  Session create(Session s) {
    std::lock_guard lock(mu_);
    s.id = "s" + std::to_string(next_id_++);
    s.version = 0;
    persist(s);
    return s;
  }

  Session get(const std::string& id) const {
    std::lock_guard lock(mu_);
    return load(id);
  }

  // Applies `fn` to the stored session and persists the result. Exceptions
  // from `fn` leave the stored copy untouched.
  template <class Fn>
  Session update(const std::string& id, Fn&& fn) {
    std::lock_guard lock(mu_);
    Session s = load(id);
    fn(s);
    persist(s);
    return s;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_of(const std::string& id) const { return dir_ / (id + ".json"); }

  static bool valid_id(const std::string& id) {
    return id.size() >= 2 && id[0] == 's' &&
           std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; });
  }

  Session load(const std::string& id) const {
    if (!valid_id(id)) throw NotFound("session " + id + " not found");
    std::ifstream in(path_of(id), std::ios::binary);
    if (!in) throw NotFound("session " + id + " not found");
    auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConsistencyError("session file for " + id + " is corrupt");
    return j.get<Session>();
  }

  void persist(const Session& s) const {
    auto final_path = path_of(s.id);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write " + tmp.string());
      out << json(s).dump(2) << '\n';
      out.flush();
      if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
  }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  long next_id_ = 1;
};

}  // namespace geoloc
