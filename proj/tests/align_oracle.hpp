#pragma once

// Exhaustive reference for name-to-text alignment. Enumerates every
// order-preserving, non-overlapping assignment (each name either skipped or
// placed on one of its occurrences) without any dynamic programming.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace geoloc::testing {

struct OracleResult {
  std::size_t best_count = 0;
  // Per name: start offset or nullopt, for the tie-broken optimum.
  std::vector<std::optional<std::size_t>> starts;
};

inline std::vector<std::pair<std::size_t, std::size_t>> naive_occurrences(const std::string& text,
                                                                          const std::string& name) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  bool blank = std::all_of(name.begin(), name.end(), [](char c) { return std::isspace((unsigned char)c); });
  if (blank || name.size() > text.size()) return out;
  for (std::size_t i = 0; i + name.size() <= text.size(); ++i)
    if (text.compare(i, name.size(), name) == 0) out.emplace_back(i, i + name.size());
  if (!out.empty()) return out;
  auto lower = [](std::string s) {
    for (auto& c : s) c = (char)std::tolower((unsigned char)c);
    return s;
  };
  std::string lt = lower(text), ln = lower(name);
  for (std::size_t i = 0; i + ln.size() <= lt.size(); ++i)
    if (lt.compare(i, ln.size(), ln) == 0) out.emplace_back(i, i + ln.size());
  return out;
}

inline OracleResult brute_force_align(const std::string& text, const std::vector<std::string>& names,
                                      std::size_t search_from = 0) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> occ;
  for (const auto& n : names) {
    auto all = naive_occurrences(text, n);
    std::erase_if(all, [&](auto& o) { return o.first < search_from; });
    occ.push_back(all);
  }
  OracleResult best;
  std::vector<std::pair<std::size_t, std::size_t>> best_key;  // (start, name) sequence
  bool have = false;
  std::vector<std::optional<std::size_t>> cur(names.size());
  auto key_of = [&] {
    std::vector<std::pair<std::size_t, std::size_t>> k;
    for (std::size_t i = 0; i < cur.size(); ++i)
      if (cur[i]) k.emplace_back(*cur[i], i);
    return k;
  };
  auto better = [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].first != b[i].first) return a[i].first < b[i].first;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].second != b[i].second) return a[i].second < b[i].second;
    return false;
  };
  auto rec = [&](auto&& self, std::size_t i, std::size_t cursor) -> void {
    if (i == names.size()) {
      auto k = key_of();
      if (!have || better(k, best_key)) {
        have = true;
        best_key = k;
        best.best_count = k.size();
        best.starts = cur;
      }
      return;
    }
    cur[i].reset();
    self(self, i + 1, cursor);
    for (auto [s, e] : occ[i]) {
      if (s < cursor) continue;
      cur[i] = s;
      self(self, i + 1, e);
    }
    cur[i].reset();
  };
  rec(rec, 0, search_from);
  return best;
}

}  // namespace geoloc::testing
