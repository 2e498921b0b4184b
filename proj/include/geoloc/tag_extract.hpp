#pragma once

// Parsers for the two NER output formats.
//
// JSON mode: the model answers with a list of toponym strings, possibly wrapped
// in prose or a code fence. Markdown mode: the model echoes the chunk with each
// toponym wrapped as @@name##; if the echo is not verbatim, only the names are
// trusted and positions are recovered later by alignment.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "geoloc/chunker.hpp"
#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"

namespace geoloc {

inline constexpr std::string_view kTagOpen = "@@";
inline constexpr std::string_view kTagClose = "##";

enum class ExtractionKind { PositionedSpans, NameListOnly };

struct ExtractionResult {
  ExtractionKind kind = ExtractionKind::PositionedSpans;
  std::vector<TagSpan> spans;      // chunk-relative, PositionedSpans only
  std::vector<std::string> names;  // NameListOnly only
  std::vector<std::string> warnings;
};

namespace detail {

// End (exclusive) of the bracketed array starting at `open`, skipping string
// contents; npos when unbalanced.
inline std::size_t matching_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[') ++depth;
    else if (c == ']' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace detail

// First well-formed JSON array of strings found in the output. Order and
// duplicates are preserved.
inline std::vector<std::string> parse_json_tags(std::string_view raw) {
  for (std::size_t open = raw.find('['); open != std::string_view::npos; open = raw.find('[', open + 1)) {
    auto end = detail::matching_bracket(raw, open);
    if (end == std::string_view::npos) continue;
    auto parsed = nlohmann::json::parse(raw.substr(open, end - open), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) continue;
    bool all_strings = std::all_of(parsed.begin(), parsed.end(), [](const auto& v) { return v.is_string(); });
    if (!all_strings) continue;
    return parsed.get<std::vector<std::string>>();
  }
  throw ModelOutputError("no JSON array of strings in model output", std::string(raw));
}

inline ExtractionResult parse_markdown_tags(std::string_view input_chunk, std::string_view raw) {
  ExtractionResult result;
  std::string stripped;
  stripped.reserve(raw.size());
  std::vector<TagSpan> spans;
  std::vector<std::string> names;

  if (input_chunk.find(kTagOpen) != std::string_view::npos || input_chunk.find(kTagClose) != std::string_view::npos)
    result.warnings.push_back("input chunk contains delimiter characters; tag positions are best-effort");

  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.compare(i, kTagOpen.size(), kTagOpen) != 0) {
      stripped += raw[i++];
      continue;
    }
    const std::size_t body = i + kTagOpen.size();
    const auto close = raw.find(kTagClose, body);
    const auto next_open = raw.find(kTagOpen, body);
    if (close != std::string_view::npos && (next_open == std::string_view::npos || close < next_open)) {
      auto content = raw.substr(body, close - body);
      if (content.empty()) {
        result.warnings.push_back("empty tag at output offset " + std::to_string(i));
      } else {
        spans.push_back(TagSpan{stripped.size(), stripped.size() + content.size(), std::string(content), std::nullopt});
        names.emplace_back(content);
      }
      stripped += content;
      i = close + kTagClose.size();
      continue;
    }
    // Dangling or nested opener: the name runs to the next whitespace (or the
    // next delimiter, whichever comes first).
    std::size_t name_end = body;
    while (name_end < raw.size() && !detail::is_space(raw[name_end]) && name_end != close && name_end != next_open)
      ++name_end;
    result.warnings.push_back(std::string(next_open != std::string_view::npos && next_open < close
                                              ? "nested tag opener"
                                              : "unbalanced tag opener") +
                              " at output offset " + std::to_string(i));
    if (name_end > body) {
      auto name = raw.substr(body, name_end - body);
      spans.push_back(TagSpan{stripped.size(), stripped.size() + name.size(), std::string(name), std::nullopt});
      names.emplace_back(name);
    }
    i = body;
  }

  if (stripped == input_chunk) {
    result.kind = ExtractionKind::PositionedSpans;
    result.spans = std::move(spans);
  } else {
    result.kind = ExtractionKind::NameListOnly;
    result.names = std::move(names);
  }
  return result;
}

// Inverse of parse_markdown_tags for well-formed span sets; used to build
// few-shot examples and round-trip checks.
inline std::string delimit_tags(std::string_view text, const std::vector<TagSpan>& spans) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& s : spans) {
    out.append(text.substr(pos, s.start - pos));
    out.append(kTagOpen);
    out.append(text.substr(s.start, s.length()));
    out.append(kTagClose);
    pos = s.end;
  }
  out.append(text.substr(pos));
  return out;
}

inline std::vector<TagSpan> to_document_offsets(const Chunk& chunk, const std::vector<TagSpan>& spans,
                                                std::string_view doc_text) {
  std::vector<TagSpan> out;
  out.reserve(spans.size());
  const std::size_t chunk_len = chunk.end - chunk.start;
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > chunk_len)
      throw ConsistencyError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                             ") exceeds chunk of length " + std::to_string(chunk_len));
    TagSpan shifted = s;
    shifted.start += chunk.start;
    shifted.end += chunk.start;
    if (shifted.end > doc_text.size() || doc_text.substr(shifted.start, shifted.length()) != shifted.surface)
      throw ConsistencyError("span \"" + s.surface + "\" does not match document " + chunk.doc_id + " at [" +
                             std::to_string(shifted.start) + "," + std::to_string(shifted.end) + ")");
    out.push_back(std::move(shifted));
  }
  return out;
}

}  // namespace geoloc
