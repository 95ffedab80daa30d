// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace truthlens::taskgen {

struct CityEntry {
  std::string city;
  std::string country;
};

/// City -> country ground truth behind the factual tasks.
///
/// Invariants (checked on construction): non-empty, city names unique,
/// every country has at least two cities.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::vector<CityEntry> entries);

  /// Parses CSV with header "city,country". Quoted fields ("a, b") and
  /// doubled quotes are accepted; a UTF-8 BOM is skipped.
  static KnowledgeBase from_csv(std::istream& in, std::string_view source = "<stream>");
  static KnowledgeBase load_csv(const std::filesystem::path& path);
  static const KnowledgeBase& bundled();

  size_t size() const { return entries_.size(); }
  const std::vector<CityEntry>& entries() const { return entries_; }

  /// Sorted, unique.
  const std::vector<std::string>& countries() const { return countries_; }
  const std::vector<std::string>& cities_in(std::string_view country) const;
  std::optional<std::string_view> country_of(std::string_view city) const;

 private:
  std::vector<CityEntry> entries_;
  std::vector<std::string> countries_;
  std::map<std::string, std::vector<std::string>, std::less<>> by_country_;
  std::map<std::string, std::string, std::less<>> by_city_;
};

/// Country name as it reads inside a sentence ("the United States").
std::string country_phrase(std::string_view country);

}  // namespace truthlens::taskgen
