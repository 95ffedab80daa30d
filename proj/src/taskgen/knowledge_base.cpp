// SPDX-License-Identifier: Apache-2.0
#include "taskgen/knowledge_base.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "common/error.hpp"

namespace truthlens::taskgen {

extern const char* const kBundledCitiesCsv;

namespace {

std::vector<std::string> parse_csv_line(std::string_view line, std::string_view source, size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) fail(ErrorCode::kFormat, fmt::format("{}:{}: unterminated quote", source, lineno));
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<CityEntry> entries) : entries_(std::move(entries)) {
  require(!entries_.empty(), "knowledge base is empty");
  for (const auto& e : entries_) {
    require(!e.city.empty() && !e.country.empty(), "knowledge base entry with empty city or country");
    const auto [it, inserted] = by_city_.emplace(e.city, e.country);
    require(inserted, fmt::format("duplicate city '{}' in knowledge base", e.city));
    by_country_[e.country].push_back(e.city);
  }
  for (const auto& [country, cities] : by_country_) {
    require(cities.size() >= 2,
            fmt::format("country '{}' has fewer than two cities in knowledge base", country));
    countries_.push_back(country);
  }
}

KnowledgeBase KnowledgeBase::from_csv(std::istream& in, std::string_view source) {
  std::string line;
  size_t lineno = 0;
  std::vector<CityEntry> entries;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = parse_csv_line(line, source, lineno);
    if (!header_seen) {
      if (fields.size() != 2 || trim(fields[0]) != "city" || trim(fields[1]) != "country")
        fail(ErrorCode::kFormat, fmt::format("{}: expected header 'city,country'", source));
      header_seen = true;
      continue;
    }
    if (fields.size() != 2)
      fail(ErrorCode::kFormat, fmt::format("{}:{}: expected 2 fields, got {}", source, lineno, fields.size()));
    entries.push_back({trim(fields[0]), trim(fields[1])});
  }
  if (!header_seen) fail(ErrorCode::kFormat, fmt::format("{}: missing header", source));
  return KnowledgeBase(std::move(entries));
}

KnowledgeBase KnowledgeBase::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open knowledge base '{}'", path.string()));
  return from_csv(in, path.string());
}

const KnowledgeBase& KnowledgeBase::bundled() {
  static const KnowledgeBase kb = [] {
    std::istringstream in(kBundledCitiesCsv);
    return from_csv(in, "bundled cities.csv");
  }();
  return kb;
}

const std::vector<std::string>& KnowledgeBase::cities_in(std::string_view country) const {
  const auto it = by_country_.find(country);
  if (it == by_country_.end()) fail(ErrorCode::kInvalidArgument, fmt::format("unknown country '{}'", country));
  return it->second;
}

std::optional<std::string_view> KnowledgeBase::country_of(std::string_view city) const {
  const auto it = by_city_.find(city);
  if (it == by_city_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::string country_phrase(std::string_view country) {
  static constexpr std::array<std::string_view, 8> kWithArticle{
      "Netherlands", "Philippines", "Czech Republic", "Dominican Republic",
      "Central African Republic", "Maldives", "Bahamas", "Gambia"};
  const bool article = country.starts_with("United ") ||
                       std::find(kWithArticle.begin(), kWithArticle.end(), country) != kWithArticle.end();
  return article ? "the " + std::string(country) : std::string(country);
}

}  // namespace truthlens::taskgen
