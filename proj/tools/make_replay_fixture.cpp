// Regenerates tests/fixtures/e2e: three short documents, gold annotations, and
// the two model transcripts (NER, then agent) that `--replay` runs consume.
// The "model" here is a script: it answers the NER prompt from a fixed table
// and drives the agent through search -> select -> finish for each place in
// the tag. Rerun after any prompt change, since the transcripts are keyed by
// request fingerprint.
//
//   make_replay_fixture <gazetteer.tsv> <out_dir>

#include <filesystem>
#include <iostream>

#include "geoloc/pipeline.hpp"

using namespace geoloc;

namespace {

const std::vector<std::pair<Document, std::string>> kDocs = {
    {{"d1",
      "Heavy rains displaced families in Goma and Bukavu on Tuesday. Relief agencies based in Kigali "
      "coordinated the response with Rwanda's disaster ministry.",
      "en", std::nullopt},
     R"(["Goma", "Bukavu", "Kigali", "Rwanda"])"},
    {{"d2",
      "Clashes in North Darfur pushed thousands toward camps elsewhere in Darfur. Separately, a boat "
      "carrying 40 people capsized in the Mediterranean Sea.",
      "en", std::nullopt},
     "Locations found:\n```json\n[\"North Darfur\", \"Darfur\", \"Mediterranean Sea\"]\n```"},
    {{"d3", "Volunteers left Nairobi on Monday with supplies for families sheltering near Kalehe and Goma.", "en",
      std::nullopt},
     R"(["Nairobi", "Kalehe", "Goma"])"},
};

std::vector<std::string> split_places(const std::string& surface) {
  std::vector<std::string> out;
  std::string rest = surface;
  for (const std::string sep : {", and ", " and ", ", ", " & "}) {
    std::size_t p;
    while ((p = rest.find(sep)) != std::string::npos) {
      out.push_back(rest.substr(0, p));
      rest = rest.substr(p + sep.size());
    }
  }
  out.push_back(rest);
  return out;
}

ChatExchange tool_turn(std::string name, json args, std::size_t step) {
  ChatExchange ex;
  ex.model_id = "scripted";
  ex.tool_calls = std::vector<ToolCall>{{"call_" + std::to_string(step), std::move(name), std::move(args)}};
  return ex;
}

ChatExchange script(const std::vector<ChatMessage>& messages, const std::vector<ToolSchema>& tools) {
  if (tools.empty()) {  // NER request: last message is the chunk
    for (const auto& [doc, reply] : kDocs)
      if (doc.text.find(messages.back().content) != std::string::npos) {
        ChatExchange ex;
        ex.model_id = "scripted";
        ex.response_text = reply;
        return ex;
      }
    throw Error("script has no reply for chunk");
  }
  const auto& user = messages.at(1).content;
  auto place_line = user.substr(std::string("PLACE: ").size(), user.find('\n') - std::string("PLACE: ").size());
  auto places = split_places(place_line);
  std::size_t step = 0;
  for (const auto& m : messages) step += m.role == Role::Tool;
  if (step >= 2 * places.size()) return tool_turn("finish_tool", {{"reason", "all places resolved"}}, step);
  const auto& place = places[step / 2];
  if (step % 2 == 0) return tool_turn("search_tool", {{"query", place}}, step);
  auto result = json::parse(messages.back().content);
  std::int64_t id = -1;
  std::string note = "no gazetteer candidate";
  if (!result["candidates"].empty()) {
    id = result["candidates"][0]["geonameid"];
    note = "first candidate matches the name";
  }
  return tool_turn("select_tool", {{"place", place}, {"geonameid", id}, {"context", note}, {"literal_toponym", true}},
                   step);
}

TagSpan find_span(const Document& d, const std::string& s, std::size_t from = 0) {
  auto p = d.text.find(s, from);
  if (p == std::string::npos) throw Error("fixture text lacks " + s);
  return make_span(d.text, p, p + s.size());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: make_replay_fixture <gazetteer.tsv> <out_dir>\n";
    return 2;
  }
  const std::filesystem::path out = argv[2];
  std::filesystem::create_directories(out);
  auto index = ingest_geonames(std::string(argv[1]));

  std::vector<Document> docs;
  for (const auto& [d, _] : kDocs) docs.push_back(d);
  {
    auto f = open_output((out / "documents.jsonl").string());
    write_documents(f, docs);
  }

  auto scripted = std::make_shared<FunctionBackend>(script);
  std::filesystem::remove(out / "extract_transcript.jsonl");
  std::filesystem::remove(out / "geocode_transcript.jsonl");
  SpanMap spans;
  {
    RecordingBackend rec(scripted, (out / "extract_transcript.jsonl").string());
    spans = to_span_map(extract_corpus(docs, rec, extract_options(OutputFormat::JsonList)));
  }
  {
    RecordingBackend rec(scripted, (out / "geocode_transcript.jsonl").string());
    auto r = geocode_corpus(docs, spans, rec, index);
    if (!r.summary.failures.empty()) throw Error("scripted geocoding failed: " + r.summary.failures[0].error);
  }

  // Gold tags keep list members separate, so partial and exact scores differ.
  const auto& d1 = docs[0];
  const auto& d2 = docs[1];
  const auto& d3 = docs[2];
  auto north = find_span(d2, "North Darfur");
  std::vector<GoldGeocode> gold_d1{{find_span(d1, "Goma"), {203717}},
                                   {find_span(d1, "Bukavu"), {217831}},
                                   {find_span(d1, "Kigali"), {202061}},
                                   {find_span(d1, "Rwanda"), {49518}}};
  std::vector<GoldGeocode> gold_d2{{north, {408664}},
                                   {find_span(d2, "Darfur", north.end), {408660}},
                                   {find_span(d2, "Mediterranean Sea"), {363196}}};
  std::vector<GoldGeocode> gold_d3{{find_span(d3, "Nairobi"), {184745}}, {find_span(d3, "Goma"), {203717}}};
  GoldGeocodeMap gold{{"d1", gold_d1}, {"d2", gold_d2}, {"d3", gold_d3}};
  SpanMap gold_spans;
  for (const auto& [id, list] : gold)
    for (const auto& g : list) gold_spans[id].push_back(g.span);
  save_spans((out / "gold_spans.jsonl").string(), gold_spans);
  {
    auto f = open_output((out / "gold_geocodes.jsonl").string());
    write_gold_geocodes(f, gold);
  }
  std::cout << "wrote fixture to " << out.string() << '\n';
  return 0;
}
