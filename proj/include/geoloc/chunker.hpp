#pragma once

// Splits documents into chunks whose character lengths fall inside a window.
//
// Separators are tried from most to least preferred. For the first separator
// that admits a valid regrouping of its pieces, the regrouping with the lowest
// population variance of chunk lengths wins (ties: fewer chunks, then the
// lexicographically smallest sequence of chunk starts). The separator text at
// a chunk boundary belongs to neither chunk; separators inside a chunk stay.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoloc/corpus.hpp"
#include "geoloc/utf8.hpp"

namespace geoloc {

struct Chunk {
  std::string doc_id;
  std::size_t start = 0;  // byte offsets into the document
  std::size_t end = 0;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

struct ChunkPlan {
  std::string separator;  // empty for single-chunk and fallback plans
  std::vector<Chunk> chunks;
  std::vector<std::string> gaps;  // consumed text between chunk i and i+1
  double length_variance = 0.0;   // chars^2
  bool fallback = false;

  bool operator==(const ChunkPlan&) const = default;
};

struct ChunkWindow {
  std::size_t min_len;
  std::size_t max_len;
};

inline constexpr ChunkWindow kJsonChunkWindow{1000, 2000};
inline constexpr ChunkWindow kMarkdownChunkWindow{200, 500};

inline const std::vector<std::string>& candidate_separators() {
  static const std::vector<std::string> seps{"\n\n", ". ", "\n", "\t", ", ", " "};
  return seps;
}

inline std::string reconstruct(const ChunkPlan& plan) {
  std::string out;
  for (std::size_t i = 0; i < plan.chunks.size(); ++i) {
    if (i > 0) out += plan.gaps.at(i - 1);
    out += plan.chunks[i].text;
  }
  return out;
}

namespace detail {

inline double population_variance(const std::vector<std::size_t>& lengths) {
  if (lengths.empty()) return 0.0;
  double mean = 0.0;
  for (auto l : lengths) mean += static_cast<double>(l);
  mean /= static_cast<double>(lengths.size());
  double acc = 0.0;
  for (auto l : lengths) acc += (static_cast<double>(l) - mean) * (static_cast<double>(l) - mean);
  return acc / static_cast<double>(lengths.size());
}

inline ChunkPlan assemble_plan(std::string_view text, const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
                               std::string separator, bool fallback) {
  ChunkPlan plan;
  plan.separator = std::move(separator);
  plan.fallback = fallback;
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    auto [s, e] = ranges[i];
    if (i > 0) plan.gaps.emplace_back(text.substr(ranges[i - 1].second, s - ranges[i - 1].second));
    plan.chunks.push_back(Chunk{{}, s, e, std::string(text.substr(s, e - s))});
    lengths.push_back(utf8::length(text.substr(s, e - s)));
  }
  plan.length_variance = population_variance(lengths);
  return plan;
}

inline ChunkPlan single_chunk_plan(std::string_view text) {
  if (text.empty()) return {};
  return assemble_plan(text, {{0, text.size()}}, {}, false);
}

}  // namespace detail

inline std::optional<ChunkPlan> try_separator(std::string_view text, std::string_view sep, std::size_t min_len,
                                              std::size_t max_len) {
  const auto cp = utf8::code_point_prefix(text);
  const std::size_t total_chars = cp.back();
  if (total_chars <= max_len) return detail::single_chunk_plan(text);
  if (sep.empty()) return std::nullopt;

  // Pieces between separator occurrences, as byte ranges.
  std::vector<std::size_t> piece_start{0}, piece_end;
  for (std::size_t pos = text.find(sep); pos != std::string_view::npos; pos = text.find(sep, pos + sep.size())) {
    piece_end.push_back(pos);
    piece_start.push_back(pos + sep.size());
  }
  piece_end.push_back(text.size());
  const std::size_t n = piece_start.size();
  if (n == 1) return std::nullopt;

  const std::size_t lo = std::max<std::size_t>(min_len, 1);
  auto chunk_chars = [&](std::size_t a, std::size_t b) { return cp[piece_end[b]] - cp[piece_start[a]]; };

  // A regrouping into k chunks always has total length total - (k-1)*|sep|,
  // so for fixed k the variance is minimized by minimizing the sum of squares.
  const std::size_t sep_chars = utf8::length(sep);
  std::size_t k_max = 0;
  for (std::size_t k = 1; k <= n && (k - 1) * sep_chars <= total_chars; ++k) {
    if (total_chars - (k - 1) * sep_chars >= k * lo) k_max = k;
  }
  if (k_max == 0) return std::nullopt;

  using Cost = std::int64_t;
  constexpr Cost kInf = std::numeric_limits<Cost>::max();
  // best[k][i]: minimal sum of squared lengths covering pieces i..n-1 with k chunks.
  std::vector<std::vector<Cost>> best(k_max + 1, std::vector<Cost>(n + 1, kInf));
  best[0][n] = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    for (std::size_t i = n; i-- > 0;) {
      Cost b = kInf;
      for (std::size_t j = i; j < n; ++j) {
        auto len = chunk_chars(i, j);
        if (len > max_len) break;
        if (len < lo || best[k - 1][j + 1] == kInf) continue;
        Cost c = static_cast<Cost>(len) * static_cast<Cost>(len) + best[k - 1][j + 1];
        if (c < b) b = c;
      }
      best[k][i] = b;
    }
  }

  // Compare variances exactly: var_k = (k*Q - S^2) / k^2.
  std::size_t best_k = 0;
  __int128 best_num = 0, best_den = 1;
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (best[k][0] == kInf) continue;
    __int128 s = static_cast<__int128>(total_chars - (k - 1) * sep_chars);
    __int128 num = static_cast<__int128>(k) * best[k][0] - s * s;
    __int128 den = static_cast<__int128>(k) * k;
    if (best_k == 0 || num * best_den < best_num * den) {
      best_k = k;
      best_num = num;
      best_den = den;
    }
  }
  if (best_k == 0) return std::nullopt;

  // Front-to-back reconstruction taking the earliest feasible cut yields the
  // lexicographically smallest start sequence among optimal regroupings.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t i = 0, k = best_k; k > 0; --k) {
    for (std::size_t j = i; j < n; ++j) {
      auto len = chunk_chars(i, j);
      if (len > max_len) break;
      if (len < lo || best[k - 1][j + 1] == kInf) continue;
      if (static_cast<Cost>(len) * static_cast<Cost>(len) + best[k - 1][j + 1] == best[k][i]) {
        ranges.emplace_back(piece_start[i], piece_end[j]);
        i = j + 1;
        break;
      }
    }
  }
  return detail::assemble_plan(text, ranges, std::string(sep), false);
}

// Hard split used when no separator works: cut at the last whitespace before
// each max_len boundary (the whitespace character is consumed), or exactly at
// max_len when the window holds no whitespace.
inline ChunkPlan fallback_plan(std::string_view text, std::size_t max_len) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t pos = 0;
  max_len = std::max<std::size_t>(max_len, 1);
  while (pos < text.size()) {
    std::size_t limit = utf8::advance(text, pos, max_len);
    if (limit >= text.size()) {
      ranges.emplace_back(pos, text.size());
      break;
    }
    // The character at `limit` would start the next chunk; whitespace there
    // or earlier in the window is a usable cut.
    std::size_t cut = std::string_view::npos;
    for (std::size_t i = limit + 1; i-- > pos + 1;) {
      if (i + 1 == text.size()) continue;  // a cut here would leave an empty last chunk
      char c = text[i];
      if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
        cut = i;
        break;
      }
    }
    if (cut == std::string_view::npos) {
      ranges.emplace_back(pos, limit);
      pos = limit;
    } else {
      ranges.emplace_back(pos, cut);
      pos = cut + 1;
    }
  }
  return detail::assemble_plan(text, ranges, {}, true);
}

inline ChunkPlan plan_chunks(const Document& doc, std::size_t min_len, std::size_t max_len) {
  if (min_len >= max_len) throw ValidationError("chunk window requires min_len < max_len");
  ChunkPlan plan;
  if (utf8::length(doc.text) <= max_len) {
    plan = detail::single_chunk_plan(doc.text);
  } else {
    bool found = false;
    for (const auto& sep : candidate_separators()) {
      if (auto p = try_separator(doc.text, sep, min_len, max_len)) {
        plan = std::move(*p);
        found = true;
        break;
      }
    }
    if (!found) plan = fallback_plan(doc.text, max_len);
  }
  for (auto& c : plan.chunks) c.doc_id = doc.id;
  return plan;
}

inline ChunkPlan plan_chunks(const Document& doc, ChunkWindow window) {
  return plan_chunks(doc, window.min_len, window.max_len);
}

}  // namespace geoloc
