#include "geoloc/aligner.hpp"

#include <gtest/gtest.h>

#include <random>

#include "align_oracle.hpp"

namespace geoloc {
namespace {

const std::string kGomaText =
    "After evacuating from Goma, aid convoys moved through Bukavu, continued to Kigali, and ultimately returned to "
    "Goma";

TEST(Align, GomaBukavuKigali) {
  auto a = align(kGomaText, {"Goma", "Goma", "Bukavu", "Kigali"});
  EXPECT_EQ(a.matched_count, 3u);
  ASSERT_TRUE(a.spans[0]);
  EXPECT_EQ(a.spans[0]->start, kGomaText.find("Goma"));
  EXPECT_FALSE(a.spans[1]);
  ASSERT_TRUE(a.spans[2]);
  EXPECT_EQ(a.spans[2]->surface, "Bukavu");
  ASSERT_TRUE(a.spans[3]);
  EXPECT_EQ(a.spans[3]->surface, "Kigali");

  EXPECT_EQ(align_greedy(kGomaText, {"Goma", "Goma", "Bukavu", "Kigali"}).matched_count, 2u);
  auto oracle = testing::brute_force_align(kGomaText, {"Goma", "Goma", "Bukavu", "Kigali"});
  EXPECT_EQ(oracle.best_count, 3u);
}

TEST(Align, UniqueOccurrence) {
  auto a = align("Goma is calm.", {"Goma"});
  ASSERT_EQ(a.matched_count, 1u);
  EXPECT_EQ(a.spans[0]->start, 0u);
  EXPECT_EQ(a.spans[0]->end, 4u);
  EXPECT_EQ(a.policies[0], MatchPolicy::Exact);
}

TEST(Align, NoOccurrenceSkipped) {
  auto a = align("Kigali", {"Goma"});
  EXPECT_EQ(a.matched_count, 0u);
  EXPECT_FALSE(a.spans[0]);
}

TEST(Align, CaseInsensitiveRetryOnlyWithoutExact) {
  auto a = align("Flooding in GOMA and goma", {"Goma"});
  ASSERT_EQ(a.matched_count, 1u);
  EXPECT_EQ(a.policies[0], MatchPolicy::CaseInsensitive);
  EXPECT_EQ(a.spans[0]->surface, "GOMA");

  auto b = align("GOMA then Goma", {"Goma"});
  EXPECT_EQ(b.policies[0], MatchPolicy::Exact);
  EXPECT_EQ(b.spans[0]->start, 10u);
}

TEST(Align, BlankNamesSkipped) {
  auto a = align("a b c", {" ", "", "b"});
  EXPECT_EQ(a.matched_count, 1u);
  EXPECT_FALSE(a.spans[0]);
  EXPECT_FALSE(a.spans[1]);
}

TEST(Align, RespectsSearchFrom) {
  auto a = align("Goma Goma", {"Goma"}, 1);
  ASSERT_EQ(a.matched_count, 1u);
  EXPECT_EQ(a.spans[0]->start, 5u);
}

TEST(Align, MisorderedListRecoversMore) {
  // Greedy anchors "Rome" at the end and loses the other two.
  std::string text = "Milan, then Naples, then Rome";
  auto dp = align(text, {"Rome", "Milan", "Naples"});
  EXPECT_EQ(dp.matched_count, 2u);
  EXPECT_EQ(align_greedy(text, {"Rome", "Milan", "Naples"}).matched_count, 1u);
}

TEST(Align, MatchesBruteForceOnRandomInstances) {
  std::mt19937 rng(2024);
  const std::vector<std::string> pool{"a", "ab", "ba", "abc", "cc", "B"};
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    std::size_t len = 1 + rng() % 30;
    for (std::size_t i = 0; i < len; ++i) text += "abc"[rng() % 3];
    std::vector<std::string> names;
    std::size_t k = rng() % 5;
    for (std::size_t i = 0; i < k; ++i) names.push_back(pool[rng() % pool.size()]);
    auto got = align(text, names);
    auto want = testing::brute_force_align(text, names);
    ASSERT_EQ(got.matched_count, want.best_count) << text;
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::optional<std::size_t> s;
      if (got.spans[i]) s = got.spans[i]->start;
      ASSERT_EQ(s, want.starts[i]) << text << " name " << i;
    }
    EXPECT_GE(got.matched_count, align_greedy(text, names).matched_count);
  }
}

TEST(Align, AssignedSpansOrderedAndDisjoint) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int i = 0; i < 40; ++i) text += "ab "[rng() % 3];
    std::vector<std::string> names{"ab", "a", "b a", "ab"};
    auto a = align(text, names);
    std::size_t cursor = 0;
    for (const auto& s : a.spans) {
      if (!s) continue;
      EXPECT_GE(s->start, cursor);
      EXPECT_EQ(text.substr(s->start, s->length()), s->surface);
      cursor = s->end;
    }
  }
}

std::vector<TagSpan> spans_for(const std::string& text, const std::vector<std::string>& names) {
  return align(text, names).matched();
}

TEST(MergeAdjacent, ListPhrase) {
  std::string text = "Floods hit Milan, Naples, and Rome yesterday";
  auto merged = merge_adjacent(text, spans_for(text, {"Milan", "Naples", "Rome"}));
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].surface, "Milan, Naples, and Rome");
}

TEST(MergeAdjacent, LexiconMissKeepsApart) {
  std::string text = "Goma fell while Kigali watched";
  auto merged = merge_adjacent(text, spans_for(text, {"Goma", "Kigali"}));
  EXPECT_EQ(merged.size(), 2u);
}

TEST(MergeAdjacent, SingleSpanUnchanged) {
  std::string text = "Goma is calm.";
  auto spans = spans_for(text, {"Goma"});
  EXPECT_EQ(merge_adjacent(text, spans), spans);
}

TEST(MergeAdjacent, ConnectorsAndGapCap) {
  std::string text = "Rosario in Santa Fe province";
  auto merged = merge_adjacent(text, spans_for(text, {"Rosario", "Santa Fe province"}));
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].surface, text);

  std::string road = "Buenos Aires\xe2\x80\x93Mar del Plata";
  EXPECT_EQ(merge_adjacent(road, spans_for(road, {"Buenos Aires", "Mar del Plata"})).size(), 1u);

  std::string wide = "Goma ,          ,           , Kigali";  // gap > 24 chars
  EXPECT_EQ(merge_adjacent(wide, spans_for(wide, {"Goma", "Kigali"})).size(), 2u);

  MergeConfig strict;
  strict.connectors = {","};
  std::string t2 = "Goma and Kigali";
  EXPECT_EQ(merge_adjacent(t2, spans_for(t2, {"Goma", "Kigali"}), strict).size(), 2u);
}

TEST(MergeAdjacent, IdempotentAndOnlyAddsGapText) {
  std::mt19937 rng(11);
  const std::vector<std::string> words{"Goma", "and", ",", "in", "the", "Kigali", "to", "x"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    std::vector<TagSpan> spans;
    for (int i = 0; i < 12; ++i) {
      const auto& w = words[rng() % words.size()];
      if (!text.empty()) text += (rng() % 2) ? " " : "";
      std::size_t s = text.size();
      text += w;
      if ((w == "Goma" || w == "Kigali") && rng() % 4) spans.push_back(make_span(text, s, text.size()));
    }
    auto once = merge_adjacent(text, spans);
    EXPECT_EQ(merge_adjacent(text, once), once);
    // Every original span is covered by exactly one merged span, and every
    // merged span starts and ends on original span boundaries.
    for (const auto& s : spans) {
      auto n = std::count_if(once.begin(), once.end(), [&](const auto& m) { return m.start <= s.start && s.end <= m.end; });
      EXPECT_EQ(n, 1);
    }
    for (const auto& m : once) {
      EXPECT_TRUE(std::any_of(spans.begin(), spans.end(), [&](const auto& s) { return s.start == m.start; }));
      EXPECT_TRUE(std::any_of(spans.begin(), spans.end(), [&](const auto& s) { return s.end == m.end; }));
    }
  }
}

TEST(MergeAcrossChunks, BoundarySplitPhraseUnifies) {
  Document doc{"d", "Relief reached Milan, Naples and Rome by road.", "en", std::nullopt};
  // Chunk A = "Relief reached Milan," chunk B = "Naples and Rome by road." with " " consumed.
  std::size_t b_start = doc.text.find("Naples");
  std::vector<TagSpan> a{make_span(doc.text, doc.text.find("Milan"), doc.text.find("Milan") + 5)};
  std::vector<TagSpan> b{make_span(doc.text, b_start, b_start + 6),
                         make_span(doc.text, doc.text.find("Rome"), doc.text.find("Rome") + 4)};
  auto merged = merge_across_chunks(doc, {a, b});
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].surface, "Milan, Naples and Rome");
}

TEST(MergeAcrossChunks, SingleChunkSameAsMergeAdjacent) {
  Document doc{"d", "Goma and Bukavu, then silence, then Kigali", "en", std::nullopt};
  auto spans = spans_for(doc.text, {"Goma", "Bukavu", "Kigali"});
  EXPECT_EQ(merge_across_chunks(doc, {spans}), merge_adjacent(doc.text, spans));
}

TEST(MergeAcrossChunks, Empty) {
  Document doc{"d", "nothing", "en", std::nullopt};
  EXPECT_TRUE(merge_across_chunks(doc, {}).empty());
  EXPECT_TRUE(merge_across_chunks(doc, {{}, {}}).empty());
}

}  // namespace
}  // namespace geoloc
