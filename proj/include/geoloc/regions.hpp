#pragma once

// Country -> segment tables used by the fairness metrics: continent (bundled,
// collapsed to Africa / Asia / Europe / Americas / Other) and World Bank income
// level (user supplied CSV).

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "geoloc/corpus.hpp"
#include "geoloc/error.hpp"

namespace geoloc {

inline constexpr std::string_view kOtherGroup = "Other";

class GroupTable {
 public:
  GroupTable() = default;

  void set(std::string_view country_code, std::string group) { groups_[key(country_code)] = std::move(group); }

  std::optional<std::string> group_of(std::string_view country_code) const {
    auto it = groups_.find(key(country_code));
    if (it == groups_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return groups_.size(); }
  bool empty() const { return groups_.empty(); }

 private:
  static std::string key(std::string_view cc) {
    std::string k(cc);
    for (auto& c : k) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return k;
  }
  std::unordered_map<std::string, std::string> groups_;
};

// GeoNames continent codes per ISO 3166-1 alpha-2 country.
inline GroupTable default_continents() {
  static constexpr std::string_view kTable[][2] = {
      {"AF", "DZ AO BJ BW BF BI CV CM CF TD KM CG CD CI DJ EG GQ ER SZ ET GA GM GH GN GW KE LS LR LY MG MW ML MR MU YT "
             "MA MZ NA NE NG RE RW SH ST SN SC SL SO ZA SS SD TZ TG TN UG EH ZM ZW"},
      {"AS", "AF AM AZ BH BD BT BN KH CN GE HK IN ID IR IQ IL JP JO KZ KW KG LA LB MO MY MV MN MM NP KP OM PK PS PH QA "
             "SA SG KR LK SY TW TJ TH TL TR TM AE UZ VN YE IO CC CX"},
      {"EU", "AX AL AD AT BY BE BA BG HR CY CZ DK EE FO FI FR DE GI GR GG HU IS IE IM IT JE XK LV LI LT LU MT MD MC ME "
             "NL MK NO PL PT RO RU SM RS SK SI ES SJ SE CH UA GB VA"},
      {"NA", "AI AG AW BS BB BZ BM BQ VG CA KY CR CU CW DM DO SV GL GD GP GT HT HN JM MQ MX MS NI PA PR BL KN LC MF PM "
             "VC SX TT TC US VI"},
      {"SA", "AR BO BR CL CO EC FK GF GY PY PE SR UY VE"},
      {"OC", "AS AU CK FJ PF GU KI MH FM NR NC NZ NU NF MP PW PG PN WS SB TK TO TV UM VU WF"},
      {"AN", "AQ BV GS HM TF"},
  };
  auto group_for = [](std::string_view code) -> std::string {
    if (code == "AF") return "Africa";
    if (code == "AS") return "Asia";
    if (code == "EU") return "Europe";
    if (code == "NA" || code == "SA") return "Americas";
    return std::string(kOtherGroup);
  };
  GroupTable table;
  for (const auto& row : kTable) {
    std::string_view list = row[1];
    for (std::size_t i = 0; i + 2 <= list.size(); i += 3) table.set(list.substr(i, 2), group_for(row[0]));
  }
  return table;
}

inline const std::set<std::string>& income_levels() {
  static const std::set<std::string> levels{"low", "lower-middle", "upper-middle", "high"};
  return levels;
}

// CSV "country_code,group" with an optional header row. When `allowed` is
// given, every group must be one of its values.
inline GroupTable read_group_csv(std::istream& in, const std::set<std::string>* allowed = nullptr) {
  GroupTable table;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected country_code,group", lineno);
    auto code = trim(std::string_view(line).substr(0, comma));
    auto group = trim(std::string_view(line).substr(comma + 1));
    if (lineno == 1 && code == "country_code") continue;
    if (code.size() != 2) throw ParseError("country code \"" + code + "\" is not ISO alpha-2", lineno);
    if (allowed && !allowed->count(group)) throw ParseError("unknown group \"" + group + "\"", lineno);
    table.set(code, group);
  }
  return table;
}

inline GroupTable load_continents_csv(const std::string& path) {
  auto in = open_input(path);
  return read_group_csv(in);
}

inline GroupTable load_income_csv(const std::string& path) {
  auto in = open_input(path);
  return read_group_csv(in, &income_levels());
}

}  // namespace geoloc
