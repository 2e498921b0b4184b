#include "geoloc/chunker.hpp"

#include <gtest/gtest.h>

#include <random>

namespace geoloc {
namespace {

std::vector<std::string> chunk_texts(const ChunkPlan& plan) {
  std::vector<std::string> out;
  for (const auto& c : plan.chunks) out.push_back(c.text);
  return out;
}

// Exhaustive oracle: every subset of piece boundaries is a candidate
// regrouping. Returns chunk (start,end) byte ranges of the winner under
// (variance, chunk count, start sequence) ordering, or nullopt.
std::optional<std::vector<std::pair<std::size_t, std::size_t>>> brute_force_regroup(const std::string& text,
                                                                                    const std::string& sep,
                                                                                    std::size_t min_len,
                                                                                    std::size_t max_len) {
  std::vector<std::size_t> starts{0}, ends;
  for (auto p = text.find(sep); p != std::string::npos; p = text.find(sep, p + sep.size())) {
    ends.push_back(p);
    starts.push_back(p + sep.size());
  }
  ends.push_back(text.size());
  const std::size_t n = starts.size();
  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> best;
  long double best_var = 0;
  for (std::uint64_t mask = 0; mask < (1ull << (n - 1)); ++mask) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t first = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool cut = i == n - 1 || (mask >> i) & 1;
      if (cut) {
        ranges.emplace_back(starts[first], ends[i]);
        first = i + 1;
      }
    }
    bool ok = true;
    long double sum = 0, sq = 0;
    for (auto [s, e] : ranges) {
      std::size_t len = e - s;  // ASCII fixtures: bytes == chars
      if (len < std::max<std::size_t>(min_len, 1) || len > max_len) ok = false;
      sum += len;
      sq += static_cast<long double>(len) * len;
    }
    if (!ok) continue;
    long double k = ranges.size();
    long double var = sq / k - (sum / k) * (sum / k);
    auto better = [&] {
      if (!best) return true;
      if (var < best_var - 1e-9L) return true;
      if (var > best_var + 1e-9L) return false;
      if (ranges.size() != best->size()) return ranges.size() < best->size();
      return ranges < *best;
    };
    if (better()) {
      best = ranges;
      best_var = var;
    }
  }
  return best;
}

TEST(CandidateSeparators, PreferenceOrder) {
  const auto& seps = candidate_separators();
  ASSERT_EQ(seps.size(), 6u);
  EXPECT_EQ(seps.front(), "\n\n");
  EXPECT_EQ(seps.back(), " ");
  EXPECT_EQ(seps, (std::vector<std::string>{"\n\n", ". ", "\n", "\t", ", ", " "}));
}

TEST(TrySeparator, ThreeEqualChunks) {
  auto plan = try_separator("aa. bb. cc", ". ", 2, 4);
  ASSERT_TRUE(plan);
  EXPECT_EQ(chunk_texts(*plan), (std::vector<std::string>{"aa", "bb", "cc"}));
  EXPECT_DOUBLE_EQ(plan->length_variance, 0.0);
  EXPECT_EQ(plan->gaps, (std::vector<std::string>{". ", ". "}));
}

TEST(TrySeparator, OversizedPieceHasNoPlan) { EXPECT_FALSE(try_separator("aaaa. bb", ". ", 2, 3)); }

TEST(TrySeparator, ShortTextIsSingleChunk) {
  for (const auto& sep : candidate_separators()) {
    auto plan = try_separator("Goma, Bukavu. Kigali", sep, 5, 100);
    ASSERT_TRUE(plan);
    ASSERT_EQ(plan->chunks.size(), 1u);
    EXPECT_EQ(plan->chunks[0].text, "Goma, Bukavu. Kigali");
  }
}

TEST(TrySeparator, NoOccurrenceOfLongTextHasNoPlan) { EXPECT_FALSE(try_separator("abcdefgh", ", ", 1, 4)); }

TEST(TrySeparator, PrefersLowerVarianceOverGreedyFill) {
  // Greedy fill would give "a a a" + "a"; the balanced split is "a a" + "a a".
  auto plan = try_separator("a a a a", " ", 1, 5);
  ASSERT_TRUE(plan);
  EXPECT_EQ(chunk_texts(*plan), (std::vector<std::string>{"a a", "a a"}));
}

TEST(TrySeparator, TieBrokenByEarliestStarts) {
  // "abc de fgh" with min 3: {"abc de","fgh"} and {"abc","de fgh"} tie on
  // variance and count; the second has the smaller start sequence (0,4).
  auto plan = try_separator("abc de fgh", " ", 3, 6);
  ASSERT_TRUE(plan);
  EXPECT_EQ(chunk_texts(*plan), (std::vector<std::string>{"abc", "de fgh"}));
}

TEST(TrySeparator, CountsCharactersNotBytes) {
  // Each piece is 2 characters but 4 bytes.
  auto plan = try_separator("\xc3\xa9\xc3\xa9 \xc3\xa9\xc3\xa9", " ", 2, 3);
  ASSERT_TRUE(plan);
  EXPECT_EQ(plan->chunks.size(), 2u);
}

TEST(TrySeparator, MatchesExhaustiveOracle) {
  std::mt19937 rng(1234);
  const std::string alphabet = "ab .,\n\t";
  int compared = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text;
    std::size_t len = 4 + rng() % 28;
    for (std::size_t i = 0; i < len; ++i) text += alphabet[rng() % alphabet.size()];
    std::size_t min_len = rng() % 6, max_len = min_len + 1 + rng() % 10;
    for (const auto& sep : candidate_separators()) {
      std::size_t pieces = 1;
      for (auto p = text.find(sep); p != std::string::npos; p = text.find(sep, p + sep.size())) ++pieces;
      if (pieces > 14) continue;
      auto got = try_separator(text, sep, min_len, max_len);
      if (text.size() <= max_len) {
        ASSERT_TRUE(got);
        ASSERT_EQ(got->chunks.size(), 1u);
        continue;
      }
      auto want = brute_force_regroup(text, sep, min_len, max_len);
      ASSERT_EQ(got.has_value(), want.has_value()) << "text=" << text << " sep=" << sep;
      if (!got) continue;
      std::vector<std::pair<std::size_t, std::size_t>> ranges;
      for (const auto& c : got->chunks) ranges.emplace_back(c.start, c.end);
      ASSERT_EQ(ranges, *want) << "text=" << text << " sep=" << sep << " min=" << min_len << " max=" << max_len;
      ++compared;
    }
  }
  EXPECT_GT(compared, 500);
}

TEST(PlanChunks, DoubleLineBreakPreferred) {
  Document doc{"d", "A.\n\nB.\n\nC.", "en", std::nullopt};
  auto plan = plan_chunks(doc, 1, 3);
  EXPECT_EQ(plan.separator, "\n\n");
  EXPECT_FALSE(plan.fallback);
  EXPECT_EQ(chunk_texts(plan), (std::vector<std::string>{"A.", "B.", "C."}));
  for (const auto& c : plan.chunks) EXPECT_EQ(c.doc_id, "d");
}

TEST(PlanChunks, ShortDocumentSingleChunk) {
  Document doc{"d", std::string(120, 'x'), "en", std::nullopt};
  auto plan = plan_chunks(doc, 200, 500);
  ASSERT_EQ(plan.chunks.size(), 1u);
  EXPECT_EQ(plan.chunks[0].text, doc.text);
  EXPECT_FALSE(plan.fallback);
}

TEST(PlanChunks, FallbackHardSplit) {
  Document doc{"d", std::string(600, 'x'), "en", std::nullopt};
  auto plan = plan_chunks(doc, 200, 500);
  EXPECT_TRUE(plan.fallback);
  ASSERT_EQ(plan.chunks.size(), 2u);
  for (const auto& c : plan.chunks) EXPECT_LE(c.text.size(), 500u);
  EXPECT_EQ(reconstruct(plan), doc.text);
}

TEST(PlanChunks, FallbackCutsAtLastWhitespace) {
  // Separators exist but "yyyy..." pieces exceed max, so every separator fails.
  std::string text = std::string(8, 'y') + " " + std::string(3, 'z') + " " + std::string(14, 'w');
  Document doc{"d", text, "en", std::nullopt};
  auto plan = plan_chunks(doc, 5, 13);
  EXPECT_TRUE(plan.fallback);
  EXPECT_EQ(chunk_texts(plan),
            (std::vector<std::string>{std::string(8, 'y') + " zzz", std::string(13, 'w'), "w"}));
  EXPECT_EQ(reconstruct(plan), text);
}

TEST(PlanChunks, FallsThroughToLaterSeparator) {
  // No "\n\n", ". " piece too long; "\n" works.
  Document doc{"d", "aaaa\nbbbb\ncccc", "en", std::nullopt};
  auto plan = plan_chunks(doc, 3, 9);
  EXPECT_EQ(plan.separator, "\n");
  EXPECT_EQ(reconstruct(plan), doc.text);
}

TEST(PlanChunks, RejectsInvertedWindow) {
  Document doc{"d", "abc", "en", std::nullopt};
  EXPECT_THROW(plan_chunks(doc, 5, 5), ValidationError);
}

TEST(PlanChunks, DefaultWindows) {
  EXPECT_EQ(kMarkdownChunkWindow.min_len, 200u);
  EXPECT_EQ(kMarkdownChunkWindow.max_len, 500u);
  EXPECT_EQ(kJsonChunkWindow.min_len, 1000u);
  EXPECT_EQ(kJsonChunkWindow.max_len, 2000u);
}

TEST(PlanChunks, FallbackNeverSplitsCodePoints) {
  std::string text;
  for (int i = 0; i < 300; ++i) text += "\xc3\xa9";  // 300 chars, 600 bytes
  Document doc{"d", text, "en", std::nullopt};
  auto plan = plan_chunks(doc, 50, 120);
  EXPECT_TRUE(plan.fallback);
  for (const auto& c : plan.chunks) {
    EXPECT_TRUE(utf8::is_boundary(text, c.start));
    EXPECT_LE(utf8::length(c.text), 120u);
  }
  EXPECT_EQ(reconstruct(plan), text);
}

}  // namespace
}  // namespace geoloc
