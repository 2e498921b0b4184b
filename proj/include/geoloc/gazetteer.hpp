#pragma once

// In-process GeoNames index: ingestion of the 19-column dump, ranked name
// search with optional country filter, and great-circle distance.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"
#include "geoloc/normalize.hpp"

namespace geoloc {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusKm = 6371.0;

inline double haversine_km(GeoPoint a, GeoPoint b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

struct GeoEntry {
  std::int64_t geonameid = 0;
  std::string name;
  std::string ascii_name;
  std::vector<std::string> alternate_names;
  double lat = 0.0;
  double lon = 0.0;
  char feature_class = ' ';
  std::string feature_code;
  std::string country_code;
  std::int64_t population = 0;

  GeoPoint point() const { return {lat, lon}; }
  bool is_sovereign() const { return feature_code.rfind("PCL", 0) == 0; }
  bool operator==(const GeoEntry&) const = default;
};

inline void to_json(json& j, const GeoEntry& e) {
  j = json{{"geonameid", e.geonameid},
           {"name", e.name},
           {"ascii_name", e.ascii_name},
           {"alternate_names", e.alternate_names},
           {"lat", e.lat},
           {"lon", e.lon},
           {"feature_class", std::string(1, e.feature_class)},
           {"feature_code", e.feature_code},
           {"country_code", e.country_code},
           {"population", e.population}};
}

inline void from_json(const json& j, GeoEntry& e) {
  e.geonameid = detail::required<std::int64_t>(j, "geonameid");
  e.name = detail::required<std::string>(j, "name");
  e.ascii_name = j.value("ascii_name", e.name);
  e.alternate_names = j.value("alternate_names", std::vector<std::string>{});
  e.lat = detail::required<double>(j, "lat");
  e.lon = detail::required<double>(j, "lon");
  auto fc = j.value("feature_class", std::string(" "));
  e.feature_class = fc.empty() ? ' ' : fc[0];
  e.feature_code = j.value("feature_code", std::string());
  e.country_code = j.value("country_code", std::string());
  e.population = j.value("population", std::int64_t{0});
}

inline void validate_entry(const GeoEntry& e) {
  if (e.geonameid <= 0) throw ValidationError("geonameid must be positive");
  if (!(e.lat >= -90.0 && e.lat <= 90.0)) throw ValidationError("latitude out of range");
  if (!(e.lon >= -180.0 && e.lon <= 180.0)) throw ValidationError("longitude out of range");
}

enum class MatchTier { ExactPrimary = 0, ExactAlternate = 1, Prefix = 2 };

class GazetteerIndex {
 public:
  GazetteerIndex() = default;

  explicit GazetteerIndex(std::vector<GeoEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.geonameid < b.geonameid; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      validate_entry(e);
      if (!by_id_.emplace(e.geonameid, i).second)
        throw ValidationError("duplicate geonameid " + std::to_string(e.geonameid));
      add_key(normalize_name(e.name), i, true);
      add_key(normalize_name(e.ascii_name), i, true);
      for (const auto& alt : e.alternate_names) add_key(normalize_name(alt), i, false);
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<GeoEntry>& entries() const { return entries_; }

  const GeoEntry* find(std::int64_t id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

  const GeoEntry& get(std::int64_t id) const {
    if (const auto* e = find(id)) return *e;
    throw NotFound("geonameid " + std::to_string(id) + " not in gazetteer");
  }

  // Ranked by match tier, then sovereign entries when the query names a
  // country, then feature class P > A > other, population descending and
  // geonameid ascending.
  std::vector<GeoEntry> search(std::string_view query, std::optional<std::string_view> country_code = std::nullopt,
                               std::size_t limit = 10) const {
    if (limit == 0) throw ValidationError("search limit must be at least 1");
    const std::string key = normalize_name(query);
    if (key.empty()) throw ValidationError("search query is empty");

    std::unordered_map<std::size_t, MatchTier> hits;
    auto note = [&](std::size_t idx, MatchTier tier) {
      auto [it, inserted] = hits.emplace(idx, tier);
      if (!inserted && tier < it->second) it->second = tier;
    };
    if (auto it = names_.find(key); it != names_.end()) {
      for (const auto& p : it->second) note(p.entry, p.primary ? MatchTier::ExactPrimary : MatchTier::ExactAlternate);
    } else {
      for (auto it2 = names_.lower_bound(key); it2 != names_.end() && it2->first.compare(0, key.size(), key) == 0; ++it2)
        for (const auto& p : it2->second) note(p.entry, MatchTier::Prefix);
    }

    bool names_country = std::any_of(hits.begin(), hits.end(), [&](const auto& h) {
      return h.second != MatchTier::Prefix && entries_[h.first].is_sovereign();
    });

    std::string want_country = country_code ? upper(*country_code) : std::string();
    using Key = std::tuple<int, int, int, std::int64_t, std::int64_t>;
    std::vector<std::pair<Key, std::size_t>> ranked;
    for (const auto& [idx, tier] : hits) {
      const auto& e = entries_[idx];
      if (country_code && upper(e.country_code) != want_country) continue;
      int sovereign = names_country && tier != MatchTier::Prefix && e.is_sovereign() ? 0 : 1;
      int cls = e.feature_class == 'P' ? 0 : e.feature_class == 'A' ? 1 : 2;
      ranked.push_back({Key{static_cast<int>(tier), sovereign, cls, -e.population, e.geonameid}, idx});
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<GeoEntry> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < limit; ++i) out.push_back(entries_[ranked[i].second]);
    return out;
  }

 private:
  struct Posting {
    std::size_t entry;
    bool primary;
  };

  static std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
  }

  void add_key(std::string key, std::size_t idx, bool primary) {
    if (key.empty()) return;
    auto& list = names_[std::move(key)];
    // Keys of one entry are added consecutively, so a repeat is always last.
    if (!list.empty() && list.back().entry == idx) {
      list.back().primary = list.back().primary || primary;
      return;
    }
    list.push_back({idx, primary});
  }

  std::vector<GeoEntry> entries_;
  std::unordered_map<std::int64_t, std::size_t> by_id_;
  std::map<std::string, std::vector<Posting>> names_;
};

// -- GeoNames dump ingestion -------------------------------------------------

struct IngestReport {
  std::size_t rows = 0;     // entries accepted
  std::size_t skipped = 0;  // malformed rows
  std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

inline std::optional<GeoEntry> parse_geonames_row(std::string_view line, std::string& why) {
  auto cols = split(line, '\t');
  if (cols.size() != 19) {
    why = "expected 19 columns, found " + std::to_string(cols.size());
    return std::nullopt;
  }
  GeoEntry e;
  if (!parse_number(cols[0], e.geonameid) || e.geonameid <= 0) {
    why = "bad geonameid";
    return std::nullopt;
  }
  e.name = std::string(cols[1]);
  e.ascii_name = cols[2].empty() ? e.name : std::string(cols[2]);
  if (!cols[3].empty())
    for (auto alt : split(cols[3], ','))
      if (!alt.empty()) e.alternate_names.emplace_back(alt);
  if (!parse_number(cols[4], e.lat) || !parse_number(cols[5], e.lon) || e.lat < -90 || e.lat > 90 || e.lon < -180 ||
      e.lon > 180) {
    why = "bad coordinates";
    return std::nullopt;
  }
  e.feature_class = cols[6].empty() ? ' ' : cols[6][0];
  e.feature_code = std::string(cols[7]);
  e.country_code = std::string(cols[8]);
  if (!cols[14].empty() && !parse_number(cols[14], e.population)) {
    why = "bad population";
    return std::nullopt;
  }
  if (e.name.empty()) {
    why = "empty name";
    return std::nullopt;
  }
  return e;
}

}  // namespace detail

inline GazetteerIndex ingest_geonames(std::istream& in, IngestReport* report = nullptr) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;
  std::vector<GeoEntry> entries;
  std::unordered_map<std::int64_t, bool> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string why;
    auto e = detail::parse_geonames_row(line, why);
    if (e && !seen.emplace(e->geonameid, true).second) {
      why = "duplicate geonameid " + std::to_string(e->geonameid);
      e.reset();
    }
    if (!e) {
      ++rep.skipped;
      rep.warnings.push_back("line " + std::to_string(lineno) + ": " + why);
      continue;
    }
    entries.push_back(std::move(*e));
  }
  rep.rows = entries.size();
  return GazetteerIndex(std::move(entries));
}

inline GazetteerIndex ingest_geonames(const std::string& tsv_path, IngestReport* report = nullptr) {
  auto in = open_input(tsv_path);
  return ingest_geonames(in, report);
}

// Saved index: a header line followed by one GeoEntry object per line.
inline void save_index(const GazetteerIndex& index, const std::string& path) {
  auto out = open_output(path);
  out << json{{"format", "geoloc-gazetteer"}, {"version", 1}, {"entries", index.size()}}.dump() << '\n';
  for (const auto& e : index.entries()) out << json(e).dump() << '\n';
}

inline GazetteerIndex load_index(const std::string& path) {
  auto in = open_input(path);
  std::string first;
  if (!std::getline(in, first)) throw ParseError("empty index file " + path);
  auto header = json::parse(first, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("format", "") != "geoloc-gazetteer") {
    // Not a saved index: treat as a raw GeoNames dump.
    in.clear();
    in.seekg(0);
    return ingest_geonames(in);
  }
  std::vector<GeoEntry> entries;
  for_each_jsonl(in, [&](const json& j, std::size_t) { entries.push_back(j.get<GeoEntry>()); });
  if (entries.size() != header.value("entries", entries.size()))
    throw ParseError("index header announces " + header["entries"].dump() + " entries, found " +
                     std::to_string(entries.size()));
  return GazetteerIndex(std::move(entries));
}

}  // namespace geoloc
