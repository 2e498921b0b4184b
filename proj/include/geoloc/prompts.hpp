#pragma once

// Prompt assets for the tagger and the geolocator agent.
//
// The few-shot pair shipped here is a stand-in written for this repository;
// swap it through PromptBundle (or `extract --fewshot file.json`) to use your
// own examples.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"
#include "geoloc/llm_gateway.hpp"
#include "geoloc/tag_extract.hpp"

namespace geoloc {

enum class OutputFormat { JsonList, MarkdownTagged };

inline const char* to_string(OutputFormat f) { return f == OutputFormat::JsonList ? "json" : "markdown"; }

inline OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::JsonList;
  if (s == "markdown" || s == "md") return OutputFormat::MarkdownTagged;
  throw ValidationError("unknown output format \"" + s + "\" (expected json or markdown)");
}

inline const std::string& ner_rules_text() {
  static const std::string text = R"(You are a Named Entity Recognition (NER) system specialized in extracting
**literal toponyms** (geographic location names) from texts about natural
disasters and accidents.
Your task is to identify and return **only the explicit literal mentions of
physical locations** (toponyms), avoiding any associative uses.
Each time the user gives you a text you simply answer each occurence of an
explicit literal toponym avoiding associative toponyms.

Key constraints:
- Extract only literal toponyms, defined as:
  - Proper names of places (e.g., "Cambridge", "Germany")
  - Noun modifiers of places (e.g., "Paris pub")
  - Adjectival modifiers with geographic meaning (e.g., "southern Spanish
  city")

- Do NOT extract associative toponyms, including:
  - Metonymic references (e.g., "She used to play for Cambridge")
  - Demonyms (e.g., "a Jamaican")
  - Homonyms (e.g., "I asked Paris to help")
  - Languages (e.g., "in Spanish")
  - Noun/adjectival modifiers not referring to a physical place (e.g.,
  "Spanish ham")
  - Embedded uses (e.g., "US Supreme Court", "US Dollar")
  - Toponyms in URLs

Extraction Rules:
1. Preserve literal mentions exactly as they appear; no rephrasing or
normalization.
2. Preserve order: output the locations in the same order as in the input.
3. Do not remove duplicates.
4. Include:
   - Geographical regions (e.g., "Patagonia", "coastal Germany")
   - Roads, borders, and composite names (e.g., "Buenos Aires–Mar del Plata
   road")
   - Temporary places like refugee camps
   - Institutions only if they imply a geographic location (e.g., "Cambridge
   University" implies "Cambridge")
5. Prefer the most specific geographic level available (e.g., "Buenos Aires
province" over "Buenos Aires").
6. Include articles if they are part of the place name.
7. Include **cardinal directions** (e.g., "southern Spain").
8. **Do not merge** multiple toponyms unless they jointly modify a noun
immediately after (e.g., "South Dakota, New York and Michigan states" → merge all three).
9. If multiple locations are listed and are connected by commas, “and”, or
“in” within a single continuous phrase, keep them together as one literal
toponym exactly as written, even if they contain multiple place names.
10. Merge nested location phrases with possessive or relational structure.)";
  return text;
}

inline std::string format_instruction(OutputFormat f) {
  if (f == OutputFormat::JsonList)
    return "Output format: answer with a plain JSON list of location strings, for example "
           "[\"Milan\", \"Naples\", \"Rome\"]. Copy every literal toponym verbatim, in order of appearance. "
           "Answer [] when there are none. Do not write anything else.";
  const std::string open(kTagOpen), close(kTagClose);
  return "Output format: reproduce the full input text exactly, character for character, and wrap each "
         "literal toponym as " +
         open + "toponym" + close + " (opening delimiter " + open + ", closing delimiter " + close +
         "). Do not change, add or drop any other character.";
}

struct FewShotExample {
  std::string input;
  std::string output;
};

struct PromptBundle {
  std::string system_text;
  std::vector<FewShotExample> fewshot_examples;
  OutputFormat output_format = OutputFormat::JsonList;
};

namespace detail {

inline const std::string& stand_in_example_text() {
  static const std::string s =
      "Heavy rains flooded Beira and the Buzi district of Sofala province on Tuesday. The Mozambican "
      "government said aid would reach Nhamatanda, Dondo and Chimoio by Friday, and the World Bank "
      "pledged support.";
  return s;
}

inline const std::vector<std::string>& stand_in_example_names() {
  static const std::vector<std::string> names{"Beira", "Buzi district of Sofala province",
                                              "Nhamatanda, Dondo and Chimoio"};
  return names;
}

}  // namespace detail

inline FewShotExample default_fewshot(OutputFormat f) {
  const auto& text = detail::stand_in_example_text();
  const auto& names = detail::stand_in_example_names();
  if (f == OutputFormat::JsonList) return {text, json(names).dump()};
  std::vector<TagSpan> spans;
  std::size_t from = 0;
  for (const auto& n : names) {
    auto p = text.find(n, from);
    spans.push_back(make_span(text, p, p + n.size()));
    from = p + n.size();
  }
  return {text, delimit_tags(text, spans)};
}

inline PromptBundle default_bundle(OutputFormat f) {
  return {ner_rules_text() + "\n\n" + format_instruction(f), {default_fewshot(f)}, f};
}

// {"json": [{"input":..., "output":...}], "markdown": [...]} ; missing keys
// keep the default example for that format.
inline PromptBundle bundle_with_fewshot_file(OutputFormat f, const std::string& path) {
  auto bundle = default_bundle(f);
  auto in = open_input(path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("few-shot file " + path + " is not a JSON object");
  if (auto it = j.find(to_string(f)); it != j.end()) {
    bundle.fewshot_examples.clear();
    for (const auto& e : *it)
      bundle.fewshot_examples.push_back({detail::required<std::string>(e, "input"),
                                         detail::required<std::string>(e, "output")});
  }
  return bundle;
}

inline std::vector<ChatMessage> build_ner_prompt(const std::string& chunk_text, const PromptBundle& bundle) {
  if (chunk_text.empty()) throw ValidationError("build_ner_prompt: chunk text is empty");
  if (bundle.system_text.empty()) throw ValidationError("build_ner_prompt: system text is empty");
  std::vector<ChatMessage> msgs{{Role::System, bundle.system_text, {}, {}}};
  for (const auto& ex : bundle.fewshot_examples) {
    msgs.push_back({Role::User, ex.input, {}, {}});
    msgs.push_back({Role::Assistant, ex.output, {}, {}});
  }
  msgs.push_back({Role::User, chunk_text, {}, {}});
  return msgs;
}

inline std::vector<ChatMessage> build_ner_prompt(const std::string& chunk_text, OutputFormat f) {
  return build_ner_prompt(chunk_text, default_bundle(f));
}

// -- geolocator agent ------------------------------------------------------------

inline const std::string& agent_system_text() {
  static const std::string text = R"(## Task & Tools

You work as a **geolocator**. A location (PLACE) and its **context**
will be provided. Your goal is to maximize 100 mile accuracy. Use the
**tools**
1) `search_tool` candidates in GeoNames database. You can pass an
ISO country code when the context hints at it (e.g., 'AR', 'BR', 'MZ'),
2) For each **definite** location, call **`select_tool`** (you may
call it multiple times) for select the best matching entry. Be precise
and prefer cities/settlements over vague regions when the
context points to them,
3) When you are done, call **`finish_tool`** exactly once to
return **all selections together**.

## Considerations

- If PLACE is ambiguous, refine with `search_tool` (try alternate spellings
from context).
- When PLACE is a country name, you MUST select the sovereign state entry
(feature_code PCL*).
- If a PCL* candidate is not returned on the first search, try alternate
spellings or exonyms/endonyms and search again.
- If the context indicates a country explicitly, include it in searches.
- Prefer inhabited places (feature classes `P*`) when context refers to
education, health, local news, municipal services, etc.
- If the text clearly references a **province/state/county** instead of a
city, select that administrative division.
- Avoid false positives from homonyms in other countries; check language,
nearby mentions, and timezone cues in context.
- If no good candidate appears, perform another `search_tool` with a better
query (e.g., remove accents, try shorter stems).
- If PLACE matches a sovereign state (country name), prefer the country
entry (feature_code = 'PCLI') rather than a city.
- Do not call `select_tool` twice for the same geonameid or the same place.
- You must cover every sublocation enumerated in PLACE; do not call
finish_tool until each is either selected or explicitly marked with
select_tool(geonameid=-1, ...).
- You only have {ACTIONS} actions to use.
- Whether relevant or not, try to locate all toponyms, only the ones not in
geonames should be left without selection.
- Prefer shorter searches and do not insist too much on one location, you
have limited action, prioritize selection before searching.
- Do at most **only {SEARCHES}** searches per place.
- Do not extract implicit location from within the context or not explicitly
named or directly associated to the place string
- If the toponym is "<X> in <Y>" extract just <X> unless <X> is not in
geonames, then extract <Y>
- Do **not** add extra locations not related to the place input

## Non-literal (associative) toponyms

Examples of non-literal toponyms:
* Metonymy: She used to play for **Cambridge**.
* Homonym: I asked **Paris** to help me.
* Demonym: I spoke to a **Jamaican** on the bus.
* Language: She spoked **Spanish**.
* Noum modifier: That **Paris** souvenir is interesting.
* Adjectival modifier: I ate some **Spanish** ham yesterday.
* Embedded associative: **US** Supreme Court has 9 justices.
You should mark those kind of toponyms as not literal.)";
  return text;
}

inline std::string agent_system_prompt(int action_budget = 15, int searches_per_place = 2) {
  static const char* kWords[] = {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"};
  std::string s = agent_system_text();
  auto put = [&](const std::string& key, const std::string& value) {
    for (auto p = s.find(key); p != std::string::npos; p = s.find(key, p + value.size())) s.replace(p, key.size(), value);
  };
  put("{ACTIONS}", std::to_string(action_budget));
  put("{SEARCHES}", searches_per_place >= 0 && searches_per_place < 10 ? kWords[searches_per_place]
                                                                       : std::to_string(searches_per_place));
  return s;
}

inline std::string agent_user_message(const std::string& place, const std::string& context) {
  return "PLACE: " + place + "\nCONTEXT: " + context;
}

inline const std::vector<ToolSchema>& agent_tools() {
  static const std::vector<ToolSchema> tools{
      {"search_tool", "Search GeoNames for entries matching a place name, optionally restricted to a country.",
       json::parse(R"({"type":"object","properties":{
          "query":{"type":"string","description":"place name to look up"},
          "country_code":{"type":"string","description":"optional ISO 3166-1 alpha-2 country code"}},
          "required":["query"]})")},
      {"select_tool", "Select the GeoNames entry for one location in PLACE, or geonameid -1 when none fits.",
       json::parse(R"({"type":"object","properties":{
          "place":{"type":"string","description":"the (sub)location being resolved"},
          "geonameid":{"type":"integer","description":"chosen GeoNames id, or -1"},
          "context":{"type":"string","description":"short justification"},
          "literal_toponym":{"type":"boolean","description":"false for associative uses"}},
          "required":["place","geonameid","context","literal_toponym"]})")},
      {"finish_tool", "Finish the task once every location has been handled.",
       json::parse(R"({"type":"object","properties":{
          "reason":{"type":"string"}},"required":["reason"]})")},
  };
  return tools;
}

}  // namespace geoloc
