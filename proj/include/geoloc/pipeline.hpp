#pragma once

// Stage drivers shared by the CLI and the end-to-end tests: NER extraction
// over a corpus and agent geocoding over extracted spans. Both run documents
// in parallel and return results ordered by doc id.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "geoloc/aligner.hpp"
#include "geoloc/chunker.hpp"
#include "geoloc/corpus.hpp"
#include "geoloc/geo_agent.hpp"
#include "geoloc/llm_gateway.hpp"
#include "geoloc/prompts.hpp"
#include "geoloc/tag_extract.hpp"

namespace geoloc {

// Runs fn(0..n-1) on up to `jobs` threads. If any call throws, the exception
// from the lowest index is rethrown once all workers are done.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// -- extraction ------------------------------------------------------------

struct ExtractOptions {
  OutputFormat format = OutputFormat::JsonList;
  ChunkWindow window = kJsonChunkWindow;
  PromptBundle bundle = default_bundle(OutputFormat::JsonList);
  MergeConfig merge;
  int jobs = 1;
};

inline ExtractOptions extract_options(OutputFormat f) {
  ExtractOptions o;
  o.format = f;
  o.window = f == OutputFormat::JsonList ? kJsonChunkWindow : kMarkdownChunkWindow;
  o.bundle = default_bundle(f);
  return o;
}

struct DocExtraction {
  std::string doc_id;
  std::vector<TagSpan> spans;
  std::size_t chunks = 0;
  std::vector<std::string> warnings;
};

// Chunk-relative spans for one model reply. Malformed output is a warning,
// not an error: the chunk simply contributes no tags.
inline std::vector<TagSpan> spans_from_reply(const Chunk& chunk, const std::string& reply, OutputFormat format,
                                             std::vector<std::string>& warnings) {
  const std::string where = "doc " + chunk.doc_id + " chunk@" + std::to_string(chunk.start) + ": ";
  std::vector<std::string> names;
  if (format == OutputFormat::MarkdownTagged) {
    auto r = parse_markdown_tags(chunk.text, reply);
    for (auto& w : r.warnings) warnings.push_back(where + w);
    if (r.kind == ExtractionKind::PositionedSpans) return r.spans;
    warnings.push_back(where + "tagged output does not reproduce the chunk; aligning names instead");
    names = std::move(r.names);
  } else {
    try {
      names = parse_json_tags(reply);
    } catch (const ModelOutputError& e) {
      warnings.push_back(where + e.what());
      return {};
    }
  }
  auto a = align(chunk.text, names);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (!a.spans[i]) warnings.push_back(where + "name \"" + names[i] + "\" not found in chunk");
  return a.matched();
}

inline DocExtraction extract_document(const Document& doc, ChatBackend& backend, const ExtractOptions& opts) {
  DocExtraction out;
  out.doc_id = doc.id;
  if (doc.text.empty()) return out;
  auto plan = plan_chunks(doc, opts.window);
  out.chunks = plan.chunks.size();
  std::vector<std::vector<TagSpan>> per_chunk;
  for (const auto& chunk : plan.chunks) {
    if (detail::blank(chunk.text)) {
      per_chunk.emplace_back();
      continue;
    }
    auto ex = backend.complete(build_ner_prompt(chunk.text, opts.bundle), {});
    auto local = spans_from_reply(chunk, ex.response_text, opts.format, out.warnings);
    per_chunk.push_back(to_document_offsets(chunk, local, doc.text));
  }
  out.spans = merge_across_chunks(doc, per_chunk, opts.merge);
  return out;
}

inline std::vector<DocExtraction> extract_corpus(std::vector<Document> docs, ChatBackend& backend,
                                                 const ExtractOptions& opts) {
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<DocExtraction> out(docs.size());
  parallel_for(docs.size(), opts.jobs, [&](std::size_t i) { out[i] = extract_document(docs[i], backend, opts); });
  return out;
}

inline SpanMap to_span_map(const std::vector<DocExtraction>& results) {
  SpanMap m;
  for (const auto& r : results)
    if (!r.spans.empty()) m[r.doc_id] = r.spans;
  return m;
}

// -- geocoding ---------------------------------------------------------------

struct GeocodeResult {
  std::vector<TagSession> sessions;  // doc id, then span position
  SelectionSummary summary;
};

inline GeocodeResult geocode_corpus(const std::vector<Document>& docs, const SpanMap& spans, ChatBackend& backend,
                                    const GazetteerIndex& index, const AgentBudgets& budgets = {}, int jobs = 1) {
  auto by_id = index_documents(docs);
  std::vector<TagSession> work;
  for (const auto& [doc_id, list] : spans) {  // std::map: already ordered by id
    auto it = by_id.find(doc_id);
    if (it == by_id.end()) throw ValidationError("spans reference unknown doc_id \"" + doc_id + "\"");
    for (const auto& s : list) {
      verify_span(it->second->text, s, doc_id);
      work.push_back({doc_id, s, {}});
    }
  }
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    auto& w = work[i];
    const auto& text = by_id.at(w.doc_id)->text;
    w.session = run_session(w.span.surface, context_window(text, w.span.start, w.span.end, budgets.context_chars),
                            backend, index, budgets);
  });
  GeocodeResult r;
  r.summary = summarize_selections(work);
  r.sessions = std::move(work);
  return r;
}

}  // namespace geoloc
