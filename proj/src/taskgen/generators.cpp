// SPDX-License-Identifier: Apache-2.0
#include "taskgen/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "taskgen/arith.hpp"

namespace truthlens::taskgen {
namespace {

using nlohmann::json;

// Stream salts keep tasks sharing a seed from drawing identical sequences.
constexpr uint64_t kSaltF0 = 0xF0;
constexpr uint64_t kSaltF1 = 0xF1;
constexpr uint64_t kSaltF2 = 0xF2;
constexpr uint64_t kSaltExactK = 0xE0;
constexpr uint64_t kSaltF5 = 0xF5;
constexpr uint64_t kSaltArith = 0xA0;
constexpr uint64_t kSaltSplit = 0x5B;

void check_even(size_t n) { require(n % 2 == 0, fmt::format("dataset size must be even (got {})", n)); }

LabeledStatement make(std::string_view task, std::string statement, bool label, json meta) {
  LabeledStatement s;
  s.task = std::string(task);
  meta["statement"] = statement;
  s.text = std::move(statement);
  s.label = label;
  s.meta = std::move(meta);
  return s;
}

void finalize(Dataset& items, Rng& rng) {
  rng.shuffle(items);
  for (size_t i = 0; i < items.size(); ++i) items[i].id = static_cast<int64_t>(i);
}

// Cycles through a fresh permutation of all cities, so no city repeats
// before every other city has been used.
class CityCycler {
 public:
  CityCycler(const KnowledgeBase& kb, Rng& rng) : kb_(kb), rng_(rng) {}

  const CityEntry& next() {
    if (pos_ == order_.size()) {
      order_.resize(kb_.size());
      std::iota(order_.begin(), order_.end(), size_t{0});
      rng_.shuffle(order_);
      pos_ = 0;
    }
    return kb_.entries()[order_[pos_++]];
  }

 private:
  const KnowledgeBase& kb_;
  Rng& rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

const std::string& wrong_country(const KnowledgeBase& kb, std::string_view right, Rng& rng) {
  const auto& countries = kb.countries();
  for (;;) {
    const auto& c = countries[rng.uniform_index(countries.size())];
    if (c != right) return c;
  }
}

void require_two_countries(const KnowledgeBase& kb) {
  require(kb.countries().size() >= 2,
          "knowledge base has a single country; false statements cannot be constructed");
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// Draws `count` distinct items from `pool`.
std::vector<std::string> draw_distinct(const std::vector<std::string>& pool, size_t count, Rng& rng) {
  std::vector<size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.uniform_index(pool.size() - i)]);
  std::vector<std::string> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(pool[idx[i]]);
  return out;
}

std::vector<std::string> cities_outside(const KnowledgeBase& kb, std::initializer_list<std::string_view> countries) {
  std::vector<std::string> out;
  for (const auto& e : kb.entries())
    if (std::find(countries.begin(), countries.end(), e.country) == countries.end()) out.push_back(e.city);
  return out;
}

std::string exact_k_text(int k, std::string_view country, const std::vector<std::string>& cities) {
  return fmt::format("Exactly {} of the following cities are in {}: {}.", k, country_phrase(country),
                     join(cities, ", "));
}

const json& field(const LabeledStatement& s, std::string_view key) {
  const auto it = s.meta.find(key);
  if (it == s.meta.end())
    fail(ErrorCode::kInvalidArgument, fmt::format("statement {} ({}): meta missing field '{}'", s.id, s.task, key));
  return *it;
}

std::string_view lookup(const KnowledgeBase& kb, const std::string& city) {
  const auto c = kb.country_of(city);
  if (!c) fail(ErrorCode::kInvalidArgument, fmt::format("city '{}' is not in the knowledge base", city));
  return *c;
}

int count_in(const KnowledgeBase& kb, const json& cities, std::string_view country) {
  int m = 0;
  for (const auto& c : cities)
    if (lookup(kb, c.get<std::string>()) == country) ++m;
  return m;
}

}  // namespace

Dataset gen_f0(const KnowledgeBase& kb, size_t n, uint64_t seed) {
  check_even(n);
  require_two_countries(kb);
  Rng rng(seed, kSaltF0);
  CityCycler true_cities(kb, rng);
  CityCycler false_cities(kb, rng);
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n / 2; ++i) {
    const auto& e = true_cities.next();
    items.push_back(make("F0", fmt::format("The city of {} is in {}.", e.city, country_phrase(e.country)), true,
                         {{"city", e.city}, {"country", e.country}}));
  }
  for (size_t i = 0; i < n / 2; ++i) {
    const auto& e = false_cities.next();
    const auto& wrong = wrong_country(kb, e.country, rng);
    items.push_back(make("F0", fmt::format("The city of {} is in {}.", e.city, country_phrase(wrong)), false,
                         {{"city", e.city}, {"country", wrong}}));
  }
  finalize(items, rng);
  return items;
}

Dataset gen_f1(const KnowledgeBase& kb, size_t n, uint64_t seed) {
  check_even(n);
  require_two_countries(kb);
  Rng rng(seed, kSaltF1);
  CityCycler true_cities(kb, rng);
  CityCycler false_cities(kb, rng);
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n / 2; ++i) {
    const auto& e = true_cities.next();
    const auto& wrong = wrong_country(kb, e.country, rng);
    items.push_back(make("F1", fmt::format("The city of {} is not in {}.", e.city, country_phrase(wrong)), true,
                         {{"city", e.city}, {"country", wrong}}));
  }
  for (size_t i = 0; i < n / 2; ++i) {
    const auto& e = false_cities.next();
    items.push_back(make("F1", fmt::format("The city of {} is not in {}.", e.city, country_phrase(e.country)),
                         false, {{"city", e.city}, {"country", e.country}}));
  }
  finalize(items, rng);
  return items;
}

Dataset gen_f2(const KnowledgeBase& kb, size_t n, uint64_t seed) {
  check_even(n);
  require_two_countries(kb);
  Rng rng(seed, kSaltF2);
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const bool label = i < n / 2;
    // false rows: (F,T), (T,F), (F,F)
    const size_t row = label ? 0 : (i - n / 2) % 3;
    const bool first_ok = label || row == 1;
    const bool second_ok = label || row == 0;
    const auto& a = kb.entries()[rng.uniform_index(kb.size())];
    const CityEntry* b = &a;
    while (b->city == a.city) b = &kb.entries()[rng.uniform_index(kb.size())];
    const std::string y1 = first_ok ? a.country : wrong_country(kb, a.country, rng);
    const std::string y2 = second_ok ? b->country : wrong_country(kb, b->country, rng);
    items.push_back(make("F2",
                         fmt::format("It is the case both that the city of {} is in {} and the city of {} is in {}.",
                                     a.city, country_phrase(y1), b->city, country_phrase(y2)),
                         label, {{"cities", {a.city, b->city}}, {"countries", {y1, y2}}}));
  }
  finalize(items, rng);
  return items;
}

Dataset gen_exact_k(const KnowledgeBase& kb, size_t n, int list_len, uint64_t seed) {
  check_even(n);
  require(list_len >= 2 && list_len <= 5, fmt::format("list_len must be in 2..5 (got {})", list_len));
  require(static_cast<size_t>(list_len) <= kb.size(),
          fmt::format("list_len {} exceeds knowledge base size {}", list_len, kb.size()));
  require_two_countries(kb);
  std::string task_id;
  switch (list_len) {
    case 2: task_id = "F3"; break;
    case 3: task_id = "F4-N3"; break;
    case 4: task_id = "F4-N4"; break;
    default: task_id = "F4"; break;
  }
  Rng rng(seed, kSaltExactK + static_cast<uint64_t>(list_len));
  const auto& countries = kb.countries();
  const int values = list_len + 1;
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const bool label = i < n / 2;
    // The stated k runs through one cycle over all n items, so per-k counts
    // are within one of uniform overall and within each class.
    const int k = static_cast<int>(i % static_cast<size_t>(values));
    int m = k;
    if (!label) {
      m = static_cast<int>(rng.uniform_index(values - 1));
      if (m >= k) ++m;
    }
    // Country with at least m cities and enough cities elsewhere.
    std::vector<const std::string*> feasible;
    for (const auto& c : countries) {
      const size_t inside = kb.cities_in(c).size();
      if (inside >= static_cast<size_t>(m) && kb.size() - inside >= static_cast<size_t>(list_len - m))
        feasible.push_back(&c);
    }
    require(!feasible.empty(), fmt::format("no country in the knowledge base supports {} of {} cities", m, list_len));
    const std::string& country = *feasible[rng.uniform_index(feasible.size())];
    auto cities = draw_distinct(kb.cities_in(country), static_cast<size_t>(m), rng);
    auto others = draw_distinct(cities_outside(kb, {country}), static_cast<size_t>(list_len - m), rng);
    cities.insert(cities.end(), others.begin(), others.end());
    rng.shuffle(cities);
    json meta{{"cities", cities}, {"country", country}, {"k", k}, {"m", m}, {"list_len", list_len}};
    items.push_back(make(task_id, exact_k_text(k, country, cities), label, std::move(meta)));
  }
  finalize(items, rng);
  return items;
}

Dataset gen_exact_k1_k2(const KnowledgeBase& kb, size_t n, uint64_t seed) {
  check_even(n);
  constexpr int kListLen = 6;
  require(kb.countries().size() >= 2, "F5 needs at least two countries in the knowledge base");
  require(kb.size() >= static_cast<size_t>(kListLen), "F5 needs at least six cities in the knowledge base");
  Rng rng(seed, kSaltF5);
  const auto& countries = kb.countries();
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const bool label = i < n / 2;
    const size_t a = rng.uniform_index(countries.size());
    size_t b = rng.uniform_index(countries.size() - 1);
    if (b >= a) ++b;
    const std::string& c1 = countries[a];
    const std::string& c2 = countries[b];
    const auto& in1 = kb.cities_in(c1);
    const auto& in2 = kb.cities_in(c2);
    const auto outside = cities_outside(kb, {c1, c2});
    std::vector<std::pair<int, int>> pairs;
    for (int m1 = 0; m1 <= kListLen; ++m1)
      for (int m2 = 0; m1 + m2 <= kListLen; ++m2)
        if (static_cast<size_t>(m1) <= in1.size() && static_cast<size_t>(m2) <= in2.size() &&
            static_cast<size_t>(kListLen - m1 - m2) <= outside.size())
          pairs.emplace_back(m1, m2);
    require(!pairs.empty(), "knowledge base cannot fill a six-city list for two countries");
    const auto [m1, m2] = pairs[rng.uniform_index(pairs.size())];
    int k1 = m1;
    int k2 = m2;
    if (!label) {
      auto perturb = [&rng](int m) {
        int v = static_cast<int>(rng.uniform_index(kListLen));
        return v >= m ? v + 1 : v;
      };
      // first only, second only, or both; equally likely
      const uint64_t mode = rng.uniform_index(3);
      if (mode != 1) k1 = perturb(m1);
      if (mode != 0) k2 = perturb(m2);
    }
    auto cities = draw_distinct(in1, static_cast<size_t>(m1), rng);
    auto c2_cities = draw_distinct(in2, static_cast<size_t>(m2), rng);
    auto rest = draw_distinct(outside, static_cast<size_t>(kListLen - m1 - m2), rng);
    cities.insert(cities.end(), c2_cities.begin(), c2_cities.end());
    cities.insert(cities.end(), rest.begin(), rest.end());
    rng.shuffle(cities);
    json meta{{"cities", cities}, {"countries", {c1, c2}}, {"k", {k1, k2}}, {"m", {m1, m2}}};
    items.push_back(make("F5",
                         fmt::format("Exactly {} of the following cities are in {} and {} in {}: {}.", k1,
                                     country_phrase(c1), k2, country_phrase(c2), join(cities, ", ")),
                         label, std::move(meta)));
  }
  finalize(items, rng);
  return items;
}

Dataset gen_arith(int n_ops, size_t n, uint64_t seed) {
  check_even(n);
  require(n_ops >= 1 && n_ops <= 3, fmt::format("n_ops must be 1, 2 or 3 (got {})", n_ops));
  const std::string task_id = fmt::format("A{}", n_ops);
  Rng rng(seed, kSaltArith + static_cast<uint64_t>(n_ops));
  Dataset items;
  items.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const bool label = i < n / 2;
    const auto expr = arith::sample_exact(n_ops, rng);
    const int64_t result = *arith::evaluate(*expr);
    int64_t offset = 0;
    if (!label) {
      offset = rng.uniform_int(1, 10);
      if (rng.uniform_index(2) == 0) offset = -offset;
    }
    const int64_t stated = result + offset;
    const std::string rendered = arith::render(*expr);
    json meta{{"expr", rendered}, {"stated", stated}, {"result", result}, {"offset", offset}, {"n_ops", n_ops}};
    items.push_back(make(task_id, fmt::format("{} = {}", rendered, stated), label, std::move(meta)));
  }
  finalize(items, rng);
  return items;
}

Dataset generate(Task task, const KnowledgeBase& kb, size_t n, uint64_t seed) {
  switch (task) {
    case Task::kF0: return gen_f0(kb, n, seed);
    case Task::kF1: return gen_f1(kb, n, seed);
    case Task::kF2: return gen_f2(kb, n, seed);
    case Task::kF3: return gen_exact_k(kb, n, 2, seed);
    case Task::kF4: return gen_exact_k(kb, n, 5, seed);
    case Task::kF5: return gen_exact_k1_k2(kb, n, seed);
    case Task::kA1: return gen_arith(1, n, seed);
    case Task::kA2: return gen_arith(2, n, seed);
    case Task::kA3: return gen_arith(3, n, seed);
    case Task::kF4N3: return gen_exact_k(kb, n, 3, seed);
    case Task::kF4N4: return gen_exact_k(kb, n, 4, seed);
  }
  fail(ErrorCode::kInternal, "unhandled task");
}

bool oracle_label(const LabeledStatement& s, const KnowledgeBase& kb) {
  const auto task = parse_task(s.task);
  if (!task) fail(ErrorCode::kInvalidArgument, fmt::format("statement {}: unknown task '{}'", s.id, s.task));
  try {
    switch (*task) {
      case Task::kF0:
        return lookup(kb, field(s, "city").get<std::string>()) == field(s, "country").get<std::string>();
      case Task::kF1:
        return lookup(kb, field(s, "city").get<std::string>()) != field(s, "country").get<std::string>();
      case Task::kF2: {
        const auto& cities = field(s, "cities");
        const auto& stated = field(s, "countries");
        require(cities.size() == 2 && stated.size() == 2, "F2 meta needs two cities and two countries");
        return lookup(kb, cities[0].get<std::string>()) == stated[0].get<std::string>() &&
               lookup(kb, cities[1].get<std::string>()) == stated[1].get<std::string>();
      }
      case Task::kF3:
      case Task::kF4:
      case Task::kF4N3:
      case Task::kF4N4:
        return count_in(kb, field(s, "cities"), field(s, "country").get<std::string>()) ==
               field(s, "k").get<int>();
      case Task::kF5: {
        const auto& cities = field(s, "cities");
        const auto& stated = field(s, "countries");
        const auto& k = field(s, "k");
        require(stated.size() == 2 && k.size() == 2, "F5 meta needs two countries and two counts");
        return count_in(kb, cities, stated[0].get<std::string>()) == k[0].get<int>() &&
               count_in(kb, cities, stated[1].get<std::string>()) == k[1].get<int>();
      }
      case Task::kA1:
      case Task::kA2:
      case Task::kA3:
        return arith::parse_and_evaluate(field(s, "expr").get<std::string>()) == field(s, "stated").get<int64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, fmt::format("statement {}: malformed meta: {}", s.id, e.what()));
  }
  fail(ErrorCode::kInternal, "unhandled task");
}

std::pair<Dataset, Dataset> split_dataset(Dataset& dataset, double train_fraction, uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  const size_t n = dataset.size();
  std::vector<size_t> pos;
  std::vector<size_t> neg;
  for (size_t i = 0; i < n; ++i) (dataset[i].label ? pos : neg).push_back(i);
  Rng rng(seed, kSaltSplit);
  rng.shuffle(pos);
  rng.shuffle(neg);
  const auto n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(n)));
  size_t train_pos = n == 0 ? 0 : static_cast<size_t>(std::llround(double(n_train) * double(pos.size()) / double(n)));
  train_pos = std::min(train_pos, pos.size());
  size_t train_neg = std::min(n_train - train_pos, neg.size());
  train_pos = std::min(n_train - train_neg, pos.size());
  for (auto& s : dataset) s.split = Split::kTest;
  for (size_t i = 0; i < train_pos; ++i) dataset[pos[i]].split = Split::kTrain;
  for (size_t i = 0; i < train_neg; ++i) dataset[neg[i]].split = Split::kTrain;
  std::pair<Dataset, Dataset> out;
  for (const auto& s : dataset) (s.split == Split::kTrain ? out.first : out.second).push_back(s);
  return out;
}

void apply_prompt(Dataset& dataset, const PromptTemplate& prompt) {
  for (auto& s : dataset) {
    const auto it = s.meta.find("statement");
    const std::string statement = it != s.meta.end() ? it->get<std::string>() : s.text;
    s.text = apply_prompt(prompt, statement);
    s.prompt = std::string(prompt.id);
  }
}

}  // namespace truthlens::taskgen
