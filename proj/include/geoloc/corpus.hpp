#pragma once

// Shared span data model and the JSONL corpus formats:
//
//   documents.jsonl      {"id", "text", "lang"?, "source"?}
//   spans.jsonl          {"doc_id", "start", "end", "surface", "literal"?}
//   gold_geocodes.jsonl  span fields plus "geoname_ids": [int, ...]
//   selections.jsonl     {"doc_id", "span": {...}, "place", "geonameid",
//                         "literal", "context"}
//
// Offsets are byte offsets into the UTF-8 document text, end exclusive.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geoloc/error.hpp"

namespace geoloc {

using json = nlohmann::json;

struct Document {
  std::string id;
  std::string text;
  std::string lang = "en";
  std::optional<std::string> source;

  bool operator==(const Document&) const = default;
};

struct TagSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;
  std::optional<bool> literal;

  std::size_t length() const { return end - start; }
  bool overlaps(const TagSpan& o) const { return start < o.end && o.start < end; }
  bool same_range(const TagSpan& o) const { return start == o.start && end == o.end; }

  bool operator==(const TagSpan&) const = default;
};

inline bool by_position(const TagSpan& a, const TagSpan& b) {
  return std::tie(a.start, a.end) < std::tie(b.start, b.end);
}

struct GoldGeocode {
  TagSpan span;
  // File order is kept; the first id decides the toponym's segment.
  std::vector<std::int64_t> geoname_ids;

  bool operator==(const GoldGeocode&) const = default;
};

struct SelectionRecord {
  std::string doc_id;
  TagSpan span;
  std::string place;
  std::int64_t geonameid = -1;
  bool literal = true;
  std::string context;

  bool resolvable() const { return geonameid > 0; }
  bool operator==(const SelectionRecord&) const = default;
};

using SpanMap = std::map<std::string, std::vector<TagSpan>>;
using GoldGeocodeMap = std::map<std::string, std::vector<GoldGeocode>>;
using DocumentIndex = std::unordered_map<std::string, const Document*>;

// Throws ValidationError unless `span` is a well-formed slice of `text`.
inline void verify_span(std::string_view text, const TagSpan& span, std::string_view doc_id = {}) {
  auto where = [&] {
    std::ostringstream os;
    if (!doc_id.empty()) os << "doc " << doc_id << " ";
    os << "span [" << span.start << "," << span.end << ")";
    return os.str();
  };
  if (span.start >= span.end || span.end > text.size())
    throw ValidationError(where() + " out of bounds (text length " + std::to_string(text.size()) + ")");
  if (text.substr(span.start, span.length()) != span.surface)
    throw ValidationError(where() + " surface mismatch: expected \"" +
                          std::string(text.substr(span.start, span.length())) + "\", got \"" +
                          span.surface + "\"");
}

inline TagSpan make_span(std::string_view text, std::size_t start, std::size_t end) {
  return TagSpan{start, end, std::string(text.substr(start, end - start)), std::nullopt};
}

// -- JSON mapping ------------------------------------------------------------

namespace detail {

template <typename T>
T required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field \"") + key + "\" has the wrong type");
  }
}

inline std::size_t required_offset(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field \"") + key + "\"");
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
    throw ParseError(std::string("field \"") + key + "\" must be a non-negative integer");
  return it->get<std::size_t>();
}

}  // namespace detail

inline void to_json(json& j, const Document& d) {
  j = json{{"id", d.id}, {"text", d.text}, {"lang", d.lang}};
  if (d.source) j["source"] = *d.source;
}

inline void from_json(const json& j, Document& d) {
  d.id = detail::required<std::string>(j, "id");
  d.text = detail::required<std::string>(j, "text");
  d.lang = j.value("lang", std::string("en"));
  if (auto it = j.find("source"); it != j.end() && !it->is_null()) d.source = it->get<std::string>();
}

inline void to_json(json& j, const TagSpan& s) {
  j = json{{"start", s.start}, {"end", s.end}, {"surface", s.surface}};
  if (s.literal) j["literal"] = *s.literal;
}

inline void from_json(const json& j, TagSpan& s) {
  s.start = detail::required_offset(j, "start");
  s.end = detail::required_offset(j, "end");
  s.surface = detail::required<std::string>(j, "surface");
  s.literal.reset();
  if (auto it = j.find("literal"); it != j.end() && !it->is_null()) s.literal = it->get<bool>();
}

inline void to_json(json& j, const SelectionRecord& r) {
  j = json{{"doc_id", r.doc_id}, {"span", r.span},       {"place", r.place},
           {"geonameid", r.geonameid}, {"literal", r.literal}, {"context", r.context}};
}

inline void from_json(const json& j, SelectionRecord& r) {
  r.doc_id = detail::required<std::string>(j, "doc_id");
  r.span = detail::required<TagSpan>(j, "span");
  r.place = detail::required<std::string>(j, "place");
  r.geonameid = detail::required<std::int64_t>(j, "geonameid");
  r.literal = j.value("literal", true);
  r.context = j.value("context", std::string());
}

// -- JSONL plumbing ----------------------------------------------------------

// Calls fn(object, line_number) for each non-blank line. Parse failures and
// errors thrown by fn are rethrown as ParseError naming the line.
inline void for_each_jsonl(std::istream& in, const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw ParseError("expected a JSON object", lineno);
    try {
      fn(j, lineno);
    } catch (const ParseError& e) {
      if (e.line() != 0) throw;
      throw ParseError(e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  return out;
}

// -- documents ---------------------------------------------------------------

inline std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  for_each_jsonl(in, [&](const json& j, std::size_t) {
    auto doc = j.get<Document>();
    if (doc.id.empty()) throw ValidationError("document id is empty");
    if (doc.text.empty()) throw ValidationError("document " + doc.id + " has empty text");
    if (!seen.insert(doc.id).second) throw ValidationError("duplicate document id \"" + doc.id + "\"");
    docs.push_back(std::move(doc));
  });
  return docs;
}

inline std::vector<Document> load_documents(const std::string& path) {
  auto in = open_input(path);
  return read_documents(in);
}

inline void write_documents(std::ostream& out, const std::vector<Document>& docs) {
  for (const auto& d : docs) out << json(d).dump() << '\n';
}

inline DocumentIndex index_documents(const std::vector<Document>& docs) {
  DocumentIndex idx;
  for (const auto& d : docs) idx.emplace(d.id, &d);
  return idx;
}

// -- spans -------------------------------------------------------------------

// When `docs` is given, every span is checked against its document and an
// unknown doc_id is an error.
inline SpanMap read_spans(std::istream& in, const DocumentIndex* docs = nullptr) {
  SpanMap out;
  for_each_jsonl(in, [&](const json& j, std::size_t) {
    auto doc_id = detail::required<std::string>(j, "doc_id");
    auto span = j.get<TagSpan>();
    if (span.start >= span.end)
      throw ValidationError("doc " + doc_id + " span [" + std::to_string(span.start) + "," +
                            std::to_string(span.end) + ") is empty or reversed");
    if (docs) {
      auto it = docs->find(doc_id);
      if (it == docs->end()) throw ValidationError("unknown doc_id \"" + doc_id + "\"");
      verify_span(it->second->text, span, doc_id);
    }
    out[doc_id].push_back(std::move(span));
  });
  for (auto& [_, spans] : out) std::stable_sort(spans.begin(), spans.end(), by_position);
  return out;
}

inline SpanMap load_spans(const std::string& path, const DocumentIndex* docs = nullptr) {
  auto in = open_input(path);
  return read_spans(in, docs);
}

inline json span_record(const std::string& doc_id, const TagSpan& span) {
  json j = span;
  j["doc_id"] = doc_id;
  return j;
}

inline void write_spans(std::ostream& out, const SpanMap& spans) {
  for (const auto& [doc_id, list] : spans)
    for (const auto& s : list) out << span_record(doc_id, s).dump() << '\n';
}

inline void save_spans(const std::string& path, const SpanMap& spans) {
  auto out = open_output(path);
  write_spans(out, spans);
}

// -- gold geocodes -----------------------------------------------------------

inline GoldGeocodeMap read_gold_geocodes(std::istream& in, const DocumentIndex* docs = nullptr) {
  GoldGeocodeMap out;
  for_each_jsonl(in, [&](const json& j, std::size_t) {
    auto doc_id = detail::required<std::string>(j, "doc_id");
    GoldGeocode g;
    g.span = j.get<TagSpan>();
    auto ids = detail::required<std::vector<std::int64_t>>(j, "geoname_ids");
    if (ids.empty()) throw ValidationError("doc " + doc_id + ": geoname_ids is empty");
    for (auto id : ids) {
      if (id <= 0) throw ValidationError("doc " + doc_id + ": geoname id " + std::to_string(id) + " is not positive");
      if (std::find(g.geoname_ids.begin(), g.geoname_ids.end(), id) == g.geoname_ids.end())
        g.geoname_ids.push_back(id);
    }
    if (docs) {
      auto it = docs->find(doc_id);
      if (it == docs->end()) throw ValidationError("unknown doc_id \"" + doc_id + "\"");
      verify_span(it->second->text, g.span, doc_id);
    }
    out[doc_id].push_back(std::move(g));
  });
  for (auto& [_, list] : out)
    std::stable_sort(list.begin(), list.end(),
                     [](const GoldGeocode& a, const GoldGeocode& b) { return by_position(a.span, b.span); });
  return out;
}

inline GoldGeocodeMap load_gold_geocodes(const std::string& path, const DocumentIndex* docs = nullptr) {
  auto in = open_input(path);
  return read_gold_geocodes(in, docs);
}

inline void write_gold_geocodes(std::ostream& out, const GoldGeocodeMap& gold) {
  for (const auto& [doc_id, list] : gold)
    for (const auto& g : list) {
      auto j = span_record(doc_id, g.span);
      j["geoname_ids"] = g.geoname_ids;
      out << j.dump() << '\n';
    }
}

// -- selections --------------------------------------------------------------

inline std::vector<SelectionRecord> read_selections(std::istream& in) {
  std::vector<SelectionRecord> out;
  for_each_jsonl(in, [&](const json& j, std::size_t) { out.push_back(j.get<SelectionRecord>()); });
  return out;
}

inline std::vector<SelectionRecord> load_selections(const std::string& path) {
  auto in = open_input(path);
  return read_selections(in);
}

inline void write_selections(std::ostream& out, const std::vector<SelectionRecord>& records) {
  for (const auto& r : records) out << json(r).dump() << '\n';
}

}  // namespace geoloc
