#pragma once

// Extraction and geocoding metrics: exact/partial P/R/F1, per-segment
// FNR/FDR and error@161km with max-min gaps, and a per-toponym error table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"
#include "geoloc/gazetteer.hpp"
#include "geoloc/regions.hpp"

namespace geoloc {

inline constexpr std::string_view kUnknownGroup = "Unknown";
inline constexpr double kKm161 = 161.0;

struct MatchCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const MatchCounts&) const = default;
};

struct PRF {
  double precision = 1.0, recall = 1.0, f1 = 1.0;
};

enum class MatchMode { Exact, Partial };

inline PRF prf(const MatchCounts& c) {
  PRF out;
  out.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  out.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double s = out.precision + out.recall;
  out.f1 = s == 0 ? 0.0 : 2 * out.precision * out.recall / s;
  return out;
}

namespace detail {

inline std::vector<TagSpan> sorted_spans(std::vector<TagSpan> v) {
  std::sort(v.begin(), v.end(), by_position);
  return v;
}

// For each pred, the index of one gold it is credited to (nullopt when none).
// Exact: identical offsets, one-to-one. Partial: first overlapping gold.
inline std::vector<std::optional<std::size_t>> credit(const std::vector<TagSpan>& pred,
                                                      const std::vector<TagSpan>& gold, MatchMode mode) {
  std::vector<std::optional<std::size_t>> out(pred.size());
  if (mode == MatchMode::Exact) {
    std::vector<bool> used(gold.size(), false);
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t g = 0; g < gold.size(); ++g)
        if (!used[g] && gold[g].same_range(pred[i])) {
          used[g] = true;
          out[i] = g;
          break;
        }
  } else {
    for (std::size_t i = 0; i < pred.size(); ++i)
      for (std::size_t g = 0; g < gold.size(); ++g)
        if (gold[g].overlaps(pred[i])) {
          out[i] = g;
          break;
        }
  }
  return out;
}

// Whether each gold is found by some pred under the mode.
inline std::vector<bool> gold_found(const std::vector<TagSpan>& pred, const std::vector<TagSpan>& gold, MatchMode mode) {
  std::vector<bool> found(gold.size(), false);
  if (mode == MatchMode::Exact) {
    for (const auto& c : credit(pred, gold, mode))
      if (c) found[*c] = true;
  } else {
    for (std::size_t g = 0; g < gold.size(); ++g)
      found[g] = std::any_of(pred.begin(), pred.end(), [&](const TagSpan& p) { return p.overlaps(gold[g]); });
  }
  return found;
}

}  // namespace detail

inline MatchCounts match_spans(const std::vector<TagSpan>& pred_in, const std::vector<TagSpan>& gold_in, MatchMode mode) {
  auto pred = detail::sorted_spans(pred_in);
  auto gold = detail::sorted_spans(gold_in);
  MatchCounts c;
  for (const auto& cr : detail::credit(pred, gold, mode)) (cr ? c.tp : c.fp) += 1;
  for (bool f : detail::gold_found(pred, gold, mode)) c.fn += !f;
  return c;
}

inline MatchCounts match_exact(const std::vector<TagSpan>& pred, const std::vector<TagSpan>& gold) {
  return match_spans(pred, gold, MatchMode::Exact);
}

inline MatchCounts match_partial(const std::vector<TagSpan>& pred, const std::vector<TagSpan>& gold) {
  return match_spans(pred, gold, MatchMode::Partial);
}

// Corpus level: documents missing from one side count as empty there.
inline MatchCounts match_corpus(const SpanMap& pred, const SpanMap& gold, MatchMode mode) {
  static const std::vector<TagSpan> kNone;
  std::set<std::string> ids;
  for (const auto& [id, _] : pred) ids.insert(id);
  for (const auto& [id, _] : gold) ids.insert(id);
  MatchCounts total;
  for (const auto& id : ids) {
    auto p = pred.find(id);
    auto g = gold.find(id);
    total += match_spans(p == pred.end() ? kNone : p->second, g == gold.end() ? kNone : g->second, mode);
  }
  return total;
}

// -- segmented rates ---------------------------------------------------------------

enum class RateMetric { FNR, FDR, Error161 };

inline const char* to_string(RateMetric m) {
  switch (m) {
    case RateMetric::FNR: return "FNR";
    case RateMetric::FDR: return "FDR";
    case RateMetric::Error161: return "Error161";
  }
  return "?";
}

struct RateCount {
  std::size_t errors = 0;
  std::size_t total = 0;
};

struct SegmentedRates {
  RateMetric metric = RateMetric::FNR;
  std::map<std::string, double> rates;     // groups that take part in delta
  std::map<std::string, double> excluded;  // Unknown / Other
  std::map<std::string, RateCount> counts; // raw numerators/denominators, all groups
  double delta = 0.0;
};

inline bool excluded_group(const std::string& g) { return g == kUnknownGroup || g == kOtherGroup; }

inline double max_min_gap(const std::map<std::string, double>& rates) {
  if (rates.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(rates.begin(), rates.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; });
  return hi->second - lo->second;
}

inline SegmentedRates from_rates(RateMetric metric, const std::map<std::string, double>& rates) {
  SegmentedRates out;
  out.metric = metric;
  for (const auto& [g, r] : rates) {
    if (r < 0.0 || r > 1.0 || std::isnan(r)) throw ValidationError("rate for group " + g + " outside [0,1]");
    (excluded_group(g) ? out.excluded : out.rates)[g] = r;
  }
  out.delta = max_min_gap(out.rates);
  return out;
}

// Groups with a zero denominator have no rate and stay out of the gap.
inline SegmentedRates from_counts(RateMetric metric, const std::map<std::string, RateCount>& counts) {
  SegmentedRates out;
  out.metric = metric;
  out.counts = counts;
  for (const auto& [g, c] : counts) {
    if (c.total == 0) continue;
    double r = static_cast<double>(c.errors) / static_cast<double>(c.total);
    (excluded_group(g) ? out.excluded : out.rates)[g] = r;
  }
  out.delta = max_min_gap(out.rates);
  return out;
}

using SpanSegmenter = std::function<std::string(const std::string& doc_id, const TagSpan& span)>;

// FNR: over gold spans, grouped by the gold's segment. FDR: over predictions;
// a credited prediction takes the segment of its gold, an uncredited one the
// segment given by `segment_of_pred`.
inline SegmentedRates segment_rates(const SpanMap& pred, const SpanMap& gold, const SpanSegmenter& segment_of_gold,
                                    const SpanSegmenter& segment_of_pred, RateMetric metric,
                                    MatchMode mode = MatchMode::Partial) {
  if (metric == RateMetric::Error161) throw ValidationError("segment_rates computes FNR or FDR only");
  static const std::vector<TagSpan> kNone;
  std::set<std::string> ids;
  for (const auto& [id, _] : pred) ids.insert(id);
  for (const auto& [id, _] : gold) ids.insert(id);
  std::map<std::string, RateCount> counts;
  for (const auto& id : ids) {
    auto pi = pred.find(id);
    auto gi = gold.find(id);
    auto p = detail::sorted_spans(pi == pred.end() ? kNone : pi->second);
    auto g = detail::sorted_spans(gi == gold.end() ? kNone : gi->second);
    if (metric == RateMetric::FNR) {
      auto found = detail::gold_found(p, g, mode);
      for (std::size_t k = 0; k < g.size(); ++k) {
        auto& c = counts[segment_of_gold(id, g[k])];
        ++c.total;
        c.errors += !found[k];
      }
    } else {
      auto cr = detail::credit(p, g, mode);
      for (std::size_t k = 0; k < p.size(); ++k) {
        auto& c = counts[cr[k] ? segment_of_gold(id, g[*cr[k]]) : segment_of_pred(id, p[k])];
        ++c.total;
        c.errors += !cr[k];
      }
    }
  }
  return from_counts(metric, counts);
}

// -- geocoding ---------------------------------------------------------------------

struct GeoAccuracy {
  double exact_precision = 1.0, exact_recall = 1.0;
  double km161_precision = 1.0, km161_recall = 1.0;
  double country_precision = 1.0, country_recall = 1.0;
  std::size_t predicted = 0;  // distinct predicted toponyms
  std::size_t gold = 0;
  std::size_t exact_correct = 0, km161_correct = 0, country_correct = 0;
};

// One row per gold toponym that received a prediction.
struct GeoErrorRow {
  std::string doc_id;
  TagSpan span;
  std::int64_t predicted_id = -1;
  double gold_lat = 0, gold_lon = 0;
  std::optional<double> error_km;  // empty when the prediction is unresolvable
  bool exact = false, km161 = false, country = false;
};

struct GeocodeEvaluation {
  GeoAccuracy accuracy;
  std::vector<GeoErrorRow> rows;
  std::vector<const GoldGeocode*> unpredicted;  // gold toponyms without a prediction
};

namespace detail {

struct SpanKey {
  std::string doc_id;
  std::size_t start, end;
  auto operator<=>(const SpanKey&) const = default;
};

inline double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

// The prediction for a toponym is the first selection whose span has the same
// offsets. Predictions that match no gold toponym count as incorrect in the
// precision denominators.
inline GeocodeEvaluation evaluate_geocodes(const std::vector<SelectionRecord>& selections,
                                           const GoldGeocodeMap& gold, const GazetteerIndex& index) {
  std::map<detail::SpanKey, const SelectionRecord*> first_pred;
  for (const auto& s : selections) first_pred.emplace(detail::SpanKey{s.doc_id, s.span.start, s.span.end}, &s);

  GeocodeEvaluation ev;
  auto& acc = ev.accuracy;
  acc.predicted = first_pred.size();
  for (const auto& [doc_id, list] : gold) {
    for (const auto& g : list) {
      ++acc.gold;
      std::vector<const GeoEntry*> gold_entries;
      for (auto id : g.geoname_ids) {
        const auto* e = index.find(id);
        if (!e)
          throw ValidationError("gold geonameid " + std::to_string(id) + " (doc " + doc_id + ") not in gazetteer");
        gold_entries.push_back(e);
      }
      auto it = first_pred.find({doc_id, g.span.start, g.span.end});
      if (it == first_pred.end()) {
        ev.unpredicted.push_back(&g);
        continue;
      }
      const SelectionRecord& sel = *it->second;
      GeoErrorRow row;
      row.doc_id = doc_id;
      row.span = g.span;
      row.predicted_id = sel.geonameid;
      row.gold_lat = gold_entries.front()->lat;
      row.gold_lon = gold_entries.front()->lon;
      const GeoEntry* p = sel.resolvable() ? index.find(sel.geonameid) : nullptr;
      if (sel.resolvable() && !p)
        throw ValidationError("predicted geonameid " + std::to_string(sel.geonameid) + " not in gazetteer");
      if (p) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto* e : gold_entries) {
          double d = haversine_km(p->point(), e->point());
          if (d < best) {
            best = d;
            row.gold_lat = e->lat;
            row.gold_lon = e->lon;
          }
        }
        row.error_km = best;
        row.exact = std::find(g.geoname_ids.begin(), g.geoname_ids.end(), p->geonameid) != g.geoname_ids.end();
        row.km161 = best <= kKm161;
        row.country = !p->country_code.empty() && std::any_of(gold_entries.begin(), gold_entries.end(), [&](auto* e) {
                        return e->country_code == p->country_code;
                      });
      }
      acc.exact_correct += row.exact;
      acc.km161_correct += row.km161;
      acc.country_correct += row.country;
      ev.rows.push_back(std::move(row));
    }
  }
  acc.exact_precision = detail::safe_ratio(acc.exact_correct, acc.predicted);
  acc.exact_recall = detail::safe_ratio(acc.exact_correct, acc.gold);
  acc.km161_precision = detail::safe_ratio(acc.km161_correct, acc.predicted);
  acc.km161_recall = detail::safe_ratio(acc.km161_correct, acc.gold);
  acc.country_precision = detail::safe_ratio(acc.country_correct, acc.predicted);
  acc.country_recall = detail::safe_ratio(acc.country_correct, acc.gold);
  return ev;
}

inline GeoAccuracy geocode_accuracy(const std::vector<SelectionRecord>& selections, const GoldGeocodeMap& gold,
                                    const GazetteerIndex& index) {
  return evaluate_geocodes(selections, gold, index).accuracy;
}

// Segment of a gold toponym: group of the country of its first gold id.
inline std::string gold_segment(const GoldGeocode& g, const GazetteerIndex& index, const GroupTable& groups) {
  if (g.geoname_ids.empty()) return std::string(kUnknownGroup);
  const auto* e = index.find(g.geoname_ids.front());
  if (!e) return std::string(kUnknownGroup);
  return groups.group_of(e->country_code).value_or(std::string(kUnknownGroup));
}

// Error@161km per segment: golds without a 161 km-correct prediction count
// as errors, including those never predicted.
inline SegmentedRates error161_rates(const GeocodeEvaluation& ev, const GoldGeocodeMap& gold,
                                     const GazetteerIndex& index, const GroupTable& groups) {
  std::map<detail::SpanKey, bool> correct;
  for (const auto& r : ev.rows) correct[{r.doc_id, r.span.start, r.span.end}] = r.km161;
  std::map<std::string, RateCount> counts;
  for (const auto& [doc_id, list] : gold)
    for (const auto& g : list) {
      auto& c = counts[gold_segment(g, index, groups)];
      ++c.total;
      auto it = correct.find({doc_id, g.span.start, g.span.end});
      c.errors += !(it != correct.end() && it->second);
    }
  return from_counts(RateMetric::Error161, counts);
}

// -- error map ---------------------------------------------------------------------

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::size_t write_error_map(std::ostream& out, const GeocodeEvaluation& ev) {
  out << "doc_id,surface,gold_lat,gold_lon,error_km\n";
  char buf[64];
  for (const auto& r : ev.rows) {
    out << csv_field(r.doc_id) << ',' << csv_field(r.span.surface) << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,", r.gold_lat, r.gold_lon);
    out << buf;
    if (r.error_km) {
      std::snprintf(buf, sizeof buf, "%.3f", *r.error_km);
      out << buf;
    }
    out << '\n';
  }
  return ev.rows.size();
}

inline std::size_t export_error_map(const std::vector<SelectionRecord>& selections, const GoldGeocodeMap& gold,
                                    const GazetteerIndex& index, const std::string& path) {
  auto ev = evaluate_geocodes(selections, gold, index);
  auto out = open_output(path);
  return write_error_map(out, ev);
}

// -- report ----------------------------------------------------------------------------

inline json to_report(const MatchCounts& c) {
  auto p = prf(c);
  return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline json to_report(const SegmentedRates& s) {
  json counts = json::object();
  for (const auto& [g, c] : s.counts) counts[g] = {{"errors", c.errors}, {"total", c.total}};
  return json{{"metric", to_string(s.metric)}, {"rates", s.rates},       {"delta", s.delta},
              {"excluded", s.excluded},        {"counts", counts}};
}

inline json to_report(const GeoAccuracy& a) {
  return json{{"exact", {{"precision", a.exact_precision}, {"recall", a.exact_recall}, {"correct", a.exact_correct}}},
              {"km161", {{"precision", a.km161_precision}, {"recall", a.km161_recall}, {"correct", a.km161_correct}}},
              {"country",
               {{"precision", a.country_precision}, {"recall", a.country_recall}, {"correct", a.country_correct}}},
              {"predicted", a.predicted},
              {"gold", a.gold}};
}

struct EvalInputs {
  const SpanMap* pred = nullptr;
  const SpanMap* gold = nullptr;
  const std::vector<SelectionRecord>* pred_geo = nullptr;
  const GoldGeocodeMap* gold_geo = nullptr;
  const GazetteerIndex* index = nullptr;
  const GroupTable* continents = nullptr;
  const GroupTable* income = nullptr;
};

// Span segmenters used for FNR/FDR: a gold span gets its segment from the
// gold geocodes, a prediction from its (first) selection.
inline std::pair<SpanSegmenter, SpanSegmenter> make_segmenters(const EvalInputs& in, const GroupTable& groups) {
  auto gold_country = std::make_shared<std::map<detail::SpanKey, std::string>>();
  auto pred_country = std::make_shared<std::map<detail::SpanKey, std::string>>();
  if (in.index && in.gold_geo)
    for (const auto& [doc, list] : *in.gold_geo)
      for (const auto& g : list)
        if (!g.geoname_ids.empty())
          if (const auto* e = in.index->find(g.geoname_ids.front()))
            gold_country->emplace(detail::SpanKey{doc, g.span.start, g.span.end}, e->country_code);
  if (in.index && in.pred_geo)
    for (const auto& s : *in.pred_geo)
      if (const auto* e = s.resolvable() ? in.index->find(s.geonameid) : nullptr)
        pred_country->emplace(detail::SpanKey{s.doc_id, s.span.start, s.span.end}, e->country_code);
  auto lookup = [&groups](std::shared_ptr<std::map<detail::SpanKey, std::string>> table) {
    return [table, &groups](const std::string& doc, const TagSpan& span) -> std::string {
      auto it = table->find({doc, span.start, span.end});
      if (it == table->end()) return std::string(kUnknownGroup);
      return groups.group_of(it->second).value_or(std::string(kUnknownGroup));
    };
  };
  return {lookup(gold_country), lookup(pred_country)};
}

inline json build_report(const EvalInputs& in) {
  if (!in.pred || !in.gold) throw ValidationError("build_report needs predicted and gold spans");
  json report;
  report["ner"] = {{"exact", to_report(match_corpus(*in.pred, *in.gold, MatchMode::Exact))},
                   {"partial", to_report(match_corpus(*in.pred, *in.gold, MatchMode::Partial))}};

  std::vector<std::pair<std::string, const GroupTable*>> segmentations;
  if (in.continents) segmentations.emplace_back("continent", in.continents);
  if (in.income) segmentations.emplace_back("income", in.income);

  json fairness = json::object();
  for (const auto& [name, table] : segmentations) {
    auto [seg_gold, seg_pred] = make_segmenters(in, *table);
    fairness[name] = {
        {"FNR", to_report(segment_rates(*in.pred, *in.gold, seg_gold, seg_pred, RateMetric::FNR))},
        {"FDR", to_report(segment_rates(*in.pred, *in.gold, seg_gold, seg_pred, RateMetric::FDR))}};
  }
  report["ner"]["fairness"] = fairness;

  if (in.pred_geo && in.gold_geo && in.index) {
    auto ev = evaluate_geocodes(*in.pred_geo, *in.gold_geo, *in.index);
    json geo = to_report(ev.accuracy);
    json err = json::object();
    for (const auto& [name, table] : segmentations)
      err[name] = to_report(error161_rates(ev, *in.gold_geo, *in.index, *table));
    geo["error161"] = err;
    report["geocoding"] = geo;
  }
  return report;
}

}  // namespace geoloc
