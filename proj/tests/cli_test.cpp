#include "geoloc/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "test_util.hpp"

namespace geoloc {
namespace {

const std::string kFixtures = GEOLOC_FIXTURE_DIR;
const std::string kE2E = kFixtures + "/e2e";
const std::string kGazetteer = kFixtures + "/gazetteer_10.tsv";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run geoloc_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

using testing::read_file;

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(geoloc_cli({}).code, 2);
  EXPECT_EQ(geoloc_cli({"frobnicate"}).code, 2);
  auto r = geoloc_cli({"eval", "--pred", kE2E + "/gold_spans.jsonl", "--gold", kE2E + "/gold_spans.jsonl", "--out",
                       "/dev/null", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl"}).code, 2);  // --out missing
  EXPECT_EQ(geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl", "--out", "x", "--format", "xml"}).code, 2);
  auto help = geoloc_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("geocode"), std::string::npos);
}

TEST(Cli, IngestReportsEntryCount) {
  testing::TempDir tmp;
  std::istringstream all(read_file(kGazetteer));
  std::string rows, line;
  for (int i = 0; i < 3 && std::getline(all, line); ++i) rows += line + "\n";
  auto tsv = tmp.write("three.tsv", rows);
  auto r = geoloc_cli({"ingest", "--geonames", tsv, "--out", tmp.file("index.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "indexed 3 entries\n");
  EXPECT_EQ(load_index(tmp.file("index.jsonl")).size(), 3u);
}

TEST(Cli, EvalIdentityIsPerfect) {
  testing::TempDir tmp;
  auto gold = kE2E + "/gold_spans.jsonl";
  auto r = geoloc_cli({"eval", "--pred", gold, "--gold", gold, "--docs", kE2E + "/documents.jsonl", "--out",
                       tmp.file("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = json::parse(read_file(tmp.file("report.json")));
  for (const char* mode : {"exact", "partial"})
    for (const char* k : {"precision", "recall", "f1"}) EXPECT_EQ(report["ner"][mode][k], 1.0) << mode << k;
}

TEST(Cli, EvalGeocodeFlagsMustComeTogether) {
  testing::TempDir tmp;
  auto gold = kE2E + "/gold_spans.jsonl";
  auto r = geoloc_cli({"eval", "--pred", gold, "--gold", gold, "--gold-geo", kE2E + "/gold_geocodes.jsonl", "--out",
                       tmp.file("r.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--pred-geo"), std::string::npos);
}

std::vector<std::string> extract_args(const std::string& out) {
  return {"extract", "--docs", kE2E + "/documents.jsonl", "--format", "json", "--out", out,
          "--replay", kE2E + "/extract_transcript.jsonl"};
}

TEST(Cli, ExtractReplayIsByteIdentical) {
  testing::TempDir tmp;
  auto a = geoloc_cli(extract_args(tmp.file("a.jsonl")));
  ASSERT_EQ(a.code, 0) << a.err;
  auto args = extract_args(tmp.file("b.jsonl"));
  args.insert(args.end(), {"--jobs", "3"});
  ASSERT_EQ(geoloc_cli(args).code, 0);
  auto first = read_file(tmp.file("a.jsonl"));
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, read_file(tmp.file("b.jsonl")));
  EXPECT_NE(first.find(R"("surface":"Goma and Bukavu")"), std::string::npos);
}

TEST(Cli, FullReplayPipelineWithRunDirectory) {
  testing::TempDir tmp;
  ASSERT_EQ(geoloc_cli({"ingest", "--geonames", kGazetteer, "--out", tmp.file("index.jsonl")}).code, 0);
  ASSERT_EQ(geoloc_cli(extract_args(tmp.file("spans.jsonl"))).code, 0);
  std::string selections[2];
  for (int i = 0; i < 2; ++i) {
    auto out = tmp.file("sel" + std::to_string(i) + ".jsonl");
    auto r = geoloc_cli({"geocode", "--docs", kE2E + "/documents.jsonl", "--spans", tmp.file("spans.jsonl"), "--index",
                         tmp.file("index.jsonl"), "--out", out, "--replay", kE2E + "/geocode_transcript.jsonl",
                         "--run-dir", tmp.file("run"), "--jobs", i ? "4" : "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    selections[i] = read_file(out);
  }
  EXPECT_EQ(selections[0], selections[1]);
  auto sels = load_selections(tmp.file("sel0.jsonl"));
  ASSERT_EQ(sels.size(), 10u);
  EXPECT_EQ(sels[8].place, "Kalehe");
  EXPECT_EQ(sels[8].geonameid, -1);

  auto report = json::parse(read_file(tmp.file("run/geocode_report.json")));
  EXPECT_EQ(report["tags"], 8);
  EXPECT_TRUE(report["failures"].empty());
  EXPECT_TRUE(std::filesystem::exists(tmp.file("run/geocode_config.json")));
  EXPECT_TRUE(std::filesystem::exists(tmp.file("run/sessions.jsonl")));

  auto ev = geoloc_cli({"eval", "--pred", tmp.file("spans.jsonl"), "--gold", kE2E + "/gold_spans.jsonl", "--pred-geo",
                        tmp.file("sel0.jsonl"), "--gold-geo", kE2E + "/gold_geocodes.jsonl", "--index",
                        tmp.file("index.jsonl"), "--out", tmp.file("report.json"), "--error-map", tmp.file("err.csv")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  auto r = json::parse(read_file(tmp.file("report.json")));
  EXPECT_EQ(r["ner"]["exact"]["tp"], 6);
  EXPECT_EQ(r["geocoding"]["exact"]["correct"], 6);
  EXPECT_EQ(read_file(tmp.file("err.csv")).rfind("doc_id,surface,gold_lat,gold_lon,error_km\n", 0), 0u);
}

TEST(Cli, MissingTranscriptEntriesFailTheStage) {
  testing::TempDir tmp;
  auto empty = tmp.write("empty.jsonl", "");
  auto r = geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl", "--out", tmp.file("s.jsonl"), "--replay", empty});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unscripted request"), std::string::npos);

  auto g = geoloc_cli({"geocode", "--docs", kE2E + "/documents.jsonl", "--spans", kE2E + "/gold_spans.jsonl", "--index",
                       kGazetteer, "--out", tmp.file("sel.jsonl"), "--replay", empty, "--run-dir", tmp.file("run")});
  EXPECT_EQ(g.code, 1);
  EXPECT_EQ(read_file(tmp.file("sel.jsonl")), "");
  auto report = json::parse(read_file(tmp.file("run/geocode_report.json")));
  EXPECT_EQ(report["failures"].size(), 9u);
}

TEST(Cli, MissingApiKeyIsAStageError) {
  testing::TempDir tmp;
  unsetenv("GEOLOC_TEST_UNSET_KEY");
  auto r = geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl", "--out", tmp.file("s.jsonl"), "--api-key-env",
                       "GEOLOC_TEST_UNSET_KEY"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("GEOLOC_TEST_UNSET_KEY"), std::string::npos);
}

TEST(Cli, SettingsPrecedenceFlagsThenEnvThenFile) {
  testing::TempDir tmp;
  auto cfg = tmp.write("cfg.json", R"({"model": {"model_id": "from-file", "max_retries": 1,
                                       "endpoint_url": "http://file.invalid/v1"}, "jobs": 2, "max_chunk": 1500})");
  setenv("GEOLOC_MODEL_ID", "from-env", 1);
  setenv("GEOLOC_MAX_RETRIES", "4", 1);
  setenv("OPENAI_API_KEY", "sk-should-not-leak", 1);
  auto args = extract_args(tmp.file("s.jsonl"));
  args.insert(args.end(), {"--config", cfg, "--max-retries", "5", "--run-dir", tmp.file("run")});
  auto r = geoloc_cli(args);
  unsetenv("GEOLOC_MODEL_ID");
  unsetenv("GEOLOC_MAX_RETRIES");
  unsetenv("OPENAI_API_KEY");
  ASSERT_EQ(r.code, 0) << r.err;
  auto raw = read_file(tmp.file("run/extract_config.json"));
  auto snap = json::parse(raw);
  EXPECT_EQ(snap["model"]["model_id"], "from-env");
  EXPECT_EQ(snap["model"]["max_retries"], 5);
  EXPECT_EQ(snap["model"]["endpoint_url"], "http://file.invalid/v1");
  EXPECT_EQ(snap["jobs"], 2);
  EXPECT_EQ(snap["max_chunk"], 1500);
  EXPECT_EQ(raw.find("sk-should-not-leak"), std::string::npos);
}

TEST(Cli, BadEnvironmentValueIsReported) {
  setenv("GEOLOC_JOBS", "many", 1);
  testing::TempDir tmp;
  auto r = geoloc_cli(extract_args(tmp.file("s.jsonl")));
  unsetenv("GEOLOC_JOBS");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("GEOLOC_JOBS"), std::string::npos);
}

// Records against a local chat-completions stand-in, then replays the
// transcript with the server gone.
TEST(Cli, RecordThenReplayReproducesOutput) {
  httplib::Server server;
  int calls = 0;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    auto body = json::parse(req.body);
    std::string chunk = body["messages"].back()["content"];
    json names = json::array();
    for (const char* n : {"Goma", "Nairobi", "Darfur"})
      if (chunk.find(n) != std::string::npos) names.push_back(n);
    json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", names.dump()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  testing::TempDir tmp;
  setenv("GEOLOC_TEST_KEY", "test-key", 1);
  auto rec = geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl", "--out", tmp.file("live.jsonl"),
                         "--endpoint-url", "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                         "--api-key-env", "GEOLOC_TEST_KEY", "--record", tmp.file("t.jsonl")});
  unsetenv("GEOLOC_TEST_KEY");
  server.stop();
  t.join();
  ASSERT_EQ(rec.code, 0) << rec.err;
  EXPECT_EQ(calls, 3);

  auto rep = geoloc_cli({"extract", "--docs", kE2E + "/documents.jsonl", "--out", tmp.file("replayed.jsonl"),
                         "--replay", tmp.file("t.jsonl")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(read_file(tmp.file("live.jsonl")), read_file(tmp.file("replayed.jsonl")));
  EXPECT_NE(read_file(tmp.file("live.jsonl")).find("Nairobi"), std::string::npos);
}

}  // namespace
}  // namespace geoloc
