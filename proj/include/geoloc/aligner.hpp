#pragma once

// Recovers positions for an ordered list of toponym names and merges adjacent
// mentions that form one phrase ("Milan, Naples, and Rome").

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoloc/chunker.hpp"
#include "geoloc/corpus.hpp"
#include "geoloc/utf8.hpp"

namespace geoloc {

enum class MatchPolicy { Exact, CaseInsensitive };

struct Assignment {
  // One entry per input name; nullopt means the name was skipped.
  std::vector<std::optional<TagSpan>> spans;
  std::vector<MatchPolicy> policies;
  std::size_t matched_count = 0;

  std::vector<TagSpan> matched() const {
    std::vector<TagSpan> out;
    for (const auto& s : spans)
      if (s) out.push_back(*s);
    return out;
  }
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

struct Occurrence {
  std::size_t start;
  std::size_t end;
};

inline std::vector<Occurrence> find_all(std::string_view hay, std::string_view needle, std::size_t from) {
  std::vector<Occurrence> out;
  if (needle.empty()) return out;
  for (auto p = hay.find(needle, from); p != std::string_view::npos; p = hay.find(needle, p + 1)) {
    if (utf8::is_boundary(hay, p)) out.push_back({p, p + needle.size()});
  }
  return out;
}

// Exact occurrences; case-insensitive ones only when no exact occurrence exists.
inline std::vector<Occurrence> occurrences(std::string_view text, std::string_view lowered_text, std::string_view name,
                                           std::size_t from, MatchPolicy& policy) {
  policy = MatchPolicy::Exact;
  if (blank(name)) return {};
  auto exact = find_all(text, name, from);
  if (!exact.empty()) return exact;
  policy = MatchPolicy::CaseInsensitive;
  return find_all(lowered_text, ascii_lower(name), from);
}

}  // namespace detail

// Order-preserving, non-overlapping assignment of names to occurrences at or
// after `search_from` that matches as many names as possible. Among optimal
// assignments the one with the lexicographically smallest sequence of matched
// starts wins; remaining ties prefer matching earlier names.
inline Assignment align(std::string_view text, const std::vector<std::string>& names, std::size_t search_from = 0) {
  const std::size_t n = names.size();
  const std::string lowered = detail::ascii_lower(text);
  std::vector<std::vector<detail::Occurrence>> occ(n);
  std::vector<MatchPolicy> policy(n, MatchPolicy::Exact);
  std::vector<std::size_t> positions{search_from};
  for (std::size_t i = 0; i < n; ++i) {
    occ[i] = detail::occurrences(text, lowered, names[i], search_from, policy[i]);
    for (const auto& o : occ[i]) positions.push_back(o.end);
  }
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  const std::size_t np = positions.size();
  auto pos_index = [&](std::size_t p) {
    return static_cast<std::size_t>(std::lower_bound(positions.begin(), positions.end(), p) - positions.begin());
  };

  // count[i][p]: best number of matches for names i.. with cursor positions[p].
  // choice[i][p]: -1 to skip name i, else index into occ[i].
  std::vector<std::vector<std::size_t>> count(n + 1, std::vector<std::size_t>(np, 0));
  std::vector<std::vector<int>> choice(n + 1, std::vector<int>(np, -1));

  // Walks the chosen path from (i,p) and returns its (start, name) sequence.
  auto path = [&](std::size_t i, std::size_t p) {
    std::vector<std::pair<std::size_t, std::size_t>> seq;
    for (; i < n; ++i) {
      int c = choice[i][p];
      if (c < 0) continue;
      const auto& o = occ[i][static_cast<std::size_t>(c)];
      seq.emplace_back(o.start, i);
      p = pos_index(o.end);
    }
    return seq;
  };
  auto key_less = [](const std::vector<std::pair<std::size_t, std::size_t>>& a,
                     const std::vector<std::pair<std::size_t, std::size_t>>& b) {
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
      if (a[k].first != b[k].first) return a[k].first < b[k].first;
    for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k)
      if (a[k].second != b[k].second) return a[k].second < b[k].second;
    return a.size() < b.size();
  };

  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t p = 0; p < np; ++p) {
      std::size_t best = count[i + 1][p];
      for (const auto& o : occ[i])
        if (o.start >= positions[p]) best = std::max(best, 1 + count[i + 1][pos_index(o.end)]);
      count[i][p] = best;

      std::optional<std::vector<std::pair<std::size_t, std::size_t>>> best_seq;
      int best_choice = -1;
      if (count[i + 1][p] == best) best_seq = path(i + 1, p);
      for (std::size_t k = 0; k < occ[i].size(); ++k) {
        const auto& o = occ[i][k];
        if (o.start < positions[p]) continue;
        auto q = pos_index(o.end);
        if (1 + count[i + 1][q] != best) continue;
        auto seq = path(i + 1, q);
        seq.insert(seq.begin(), {o.start, i});
        if (!best_seq || key_less(seq, *best_seq)) {
          best_seq = std::move(seq);
          best_choice = static_cast<int>(k);
        }
      }
      choice[i][p] = best_choice;
    }
  }

  Assignment out;
  out.spans.resize(n);
  out.policies = policy;
  std::size_t p = pos_index(search_from);
  for (std::size_t i = 0; i < n; ++i) {
    int c = choice[i][p];
    if (c < 0) continue;
    const auto& o = occ[i][static_cast<std::size_t>(c)];
    out.spans[i] = make_span(text, o.start, o.end);
    ++out.matched_count;
    p = pos_index(o.end);
  }
  return out;
}

// Baseline: each name takes its first occurrence after the previous match.
inline Assignment align_greedy(std::string_view text, const std::vector<std::string>& names,
                               std::size_t search_from = 0) {
  const std::string lowered = detail::ascii_lower(text);
  Assignment out;
  out.spans.resize(names.size());
  out.policies.resize(names.size(), MatchPolicy::Exact);
  std::size_t cursor = search_from;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto occ = detail::occurrences(text, lowered, names[i], search_from, out.policies[i]);
    auto it = std::find_if(occ.begin(), occ.end(), [&](const auto& o) { return o.start >= cursor; });
    if (it == occ.end()) continue;
    out.spans[i] = make_span(text, it->start, it->end);
    ++out.matched_count;
    cursor = it->end;
  }
  return out;
}

struct MergeConfig {
  std::vector<std::string> connectors{",", "and", "&", "in", "to", "-", "\xe2\x80\x93"};
  std::size_t max_gap = 24;  // characters
};

// True when the text between two spans contains only whitespace, commas and
// connector words, and is not longer than the gap cap.
inline bool mergeable_gap(std::string_view gap, const MergeConfig& cfg) {
  if (utf8::length(gap) > cfg.max_gap) return false;
  std::size_t i = 0;
  while (i < gap.size()) {
    while (i < gap.size() && std::isspace(static_cast<unsigned char>(gap[i]))) ++i;
    std::size_t j = i;
    while (j < gap.size() && !std::isspace(static_cast<unsigned char>(gap[j]))) ++j;
    if (j == i) break;
    std::string_view token = gap.substr(i, j - i);
    if (std::find(cfg.connectors.begin(), cfg.connectors.end(), token) == cfg.connectors.end()) {
      // Commas glued to words ("and," / ",and") are fine.
      while (!token.empty() && token.front() == ',') token.remove_prefix(1);
      while (!token.empty() && token.back() == ',') token.remove_suffix(1);
      if (!token.empty()) {
        auto lowered = detail::ascii_lower(token);
        if (std::find(cfg.connectors.begin(), cfg.connectors.end(), lowered) == cfg.connectors.end()) return false;
      }
    }
    i = j;
  }
  return true;
}

inline std::vector<TagSpan> merge_adjacent(std::string_view text, const std::vector<TagSpan>& spans,
                                           const MergeConfig& cfg = {}) {
  std::vector<TagSpan> out;
  for (const auto& s : spans) {
    if (!out.empty() && out.back().end <= s.start &&
        mergeable_gap(text.substr(out.back().end, s.start - out.back().end), cfg)) {
      auto& last = out.back();
      last.end = s.end;
      last.surface = std::string(text.substr(last.start, last.end - last.start));
      if (last.literal != s.literal) last.literal.reset();
      continue;
    }
    out.push_back(s);
  }
  return out;
}

// Spans already in document offsets, one list per chunk.
inline std::vector<TagSpan> merge_across_chunks(const Document& doc, const std::vector<std::vector<TagSpan>>& per_chunk,
                                                const MergeConfig& cfg = {}) {
  std::vector<TagSpan> all;
  for (const auto& list : per_chunk) all.insert(all.end(), list.begin(), list.end());
  std::stable_sort(all.begin(), all.end(), by_position);
  return merge_adjacent(doc.text, all, cfg);
}

}  // namespace geoloc
