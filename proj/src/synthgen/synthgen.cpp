// SPDX-License-Identifier: Apache-2.0
#include "synthgen/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "taskgen/dataset_io.hpp"
#include "taskgen/generators.hpp"

namespace truthlens::synthgen {
namespace {

constexpr uint64_t kSaltLabels = 0x1ab3;
constexpr uint64_t kSaltNoise = 0x4015e;
constexpr uint64_t kSaltDirections = 0xd12;

double parse_number(std::string_view text, std::string_view context) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    fail(ErrorCode::kInvalidArgument, fmt::format("invalid number '{}' in schedule '{}'", text, context));
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void orthonormalize_against(std::vector<double>& v, std::initializer_list<const std::vector<double>*> basis) {
  // Two passes of Gram-Schmidt keep orthogonality at round-off level.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto* b : basis) {
      const double c = dot(v, *b);
      for (size_t i = 0; i < v.size(); ++i) v[i] -= c * (*b)[i];
    }
  const double norm = std::sqrt(dot(v, v));
  require(norm > 1e-12, "direction is degenerate");
  for (auto& x : v) x /= norm;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (const char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

std::string_view polarity_name(PolarityMode m) {
  switch (m) {
    case PolarityMode::kAffirmative: return "affirmative";
    case PolarityMode::kNegated: return "negated";
    case PolarityMode::kMixed: return "mixed";
  }
  return "affirmative";
}

PolarityMode parse_polarity(std::string_view s) {
  if (s == "affirmative" || s == "aff") return PolarityMode::kAffirmative;
  if (s == "negated" || s == "neg") return PolarityMode::kNegated;
  if (s == "mixed") return PolarityMode::kMixed;
  fail(ErrorCode::kInvalidArgument, fmt::format("unknown polarity mode '{}'", s));
}

}  // namespace

Schedule Schedule::constant(double v) {
  Schedule s;
  s.kind_ = Kind::kConstant;
  s.values_ = {v};
  return s;
}

Schedule Schedule::values(std::vector<double> v) {
  require(!v.empty(), "schedule list is empty");
  Schedule s;
  s.kind_ = Kind::kValues;
  s.values_ = std::move(v);
  return s;
}

Schedule Schedule::step(uint32_t at, double before, double after) {
  Schedule s;
  s.kind_ = Kind::kStep;
  s.values_ = {before, after};
  s.step_at_ = at;
  return s;
}

Schedule Schedule::linear(double first, double last) {
  Schedule s;
  s.kind_ = Kind::kLinear;
  s.values_ = {first, last};
  return s;
}

Schedule Schedule::parse(std::string_view text) {
  if (text.starts_with("step:")) {
    const auto parts = split(text.substr(5), ':');
    if (parts.size() != 3)
      fail(ErrorCode::kInvalidArgument, fmt::format("step schedule '{}' needs step:LAYER:BEFORE:AFTER", text));
    const double at = parse_number(parts[0], text);
    require(at >= 0 && at == std::floor(at), fmt::format("step layer in '{}' must be a non-negative integer", text));
    return step(static_cast<uint32_t>(at), parse_number(parts[1], text), parse_number(parts[2], text));
  }
  if (text.starts_with("linear:")) {
    const auto parts = split(text.substr(7), ':');
    if (parts.size() != 2)
      fail(ErrorCode::kInvalidArgument, fmt::format("linear schedule '{}' needs linear:FIRST:LAST", text));
    return linear(parse_number(parts[0], text), parse_number(parts[1], text));
  }
  const auto parts = split(text, ',');
  if (parts.size() == 1) return constant(parse_number(parts[0], text));
  std::vector<double> v;
  for (const auto p : parts) v.push_back(parse_number(p, text));
  return values(std::move(v));
}

Schedule Schedule::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (j.is_string()) return parse(j.get<std::string>());
  if (j.is_array()) return values(j.get<std::vector<double>>());
  fail(ErrorCode::kInvalidArgument, "schedule must be a number, list or string");
}

double Schedule::at(uint32_t layer, uint32_t layers) const {
  switch (kind_) {
    case Kind::kConstant: return values_[0];
    case Kind::kValues: return values_.at(layer);
    case Kind::kStep: return layer < step_at_ ? values_[0] : values_[1];
    case Kind::kLinear: {
      if (layers <= 1) return values_[0];
      const double t = double(layer) / double(layers - 1);
      return values_[0] + t * (values_[1] - values_[0]);
    }
  }
  return 0.0;
}

void Schedule::validate(uint32_t layers, std::string_view name) const {
  if (kind_ == Kind::kValues && values_.size() != layers)
    fail(ErrorCode::kInvalidArgument,
         fmt::format("{} schedule lists {} values for {} layers", name, values_.size(), layers));
  for (const double v : values_)
    require(std::isfinite(v), fmt::format("{} schedule has a non-finite value", name));
}

std::string Schedule::to_string() const {
  switch (kind_) {
    case Kind::kConstant: return fmt::format("{}", values_[0]);
    case Kind::kValues: return fmt::format("{}", fmt::join(values_, ","));
    case Kind::kStep: return fmt::format("step:{}:{}:{}", step_at_, values_[0], values_[1]);
    case Kind::kLinear: return fmt::format("linear:{}:{}", values_[0], values_[1]);
  }
  return {};
}

void SyntheticSpec::validate() const {
  require(d >= 3, "synthetic width d must be at least 3");
  require(n >= 4 && n % 2 == 0, "synthetic n must be even and at least 4");
  require(layers >= 1, "synthetic stack needs at least one layer");
  require(layers <= UINT16_MAX, "too many layers for the activation format");
  require(std::isfinite(noise) && noise > 0.0, "noise scale must be positive");
  require(truth_sign == 1 || truth_sign == -1, "truth sign must be +1 or -1");
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  require(valid_name(task), fmt::format("task name '{}' must be alphanumeric, '-' or '_'", task));
  require(valid_name(prompt), fmt::format("prompt name '{}' must be alphanumeric, '-' or '_'", prompt));
  truth_sep.validate(layers, "truth separation");
  polarity_sep.validate(layers, "polarity separation");
  angle.validate(layers, "rotation angle");
  for (uint32_t l = 0; l < layers; ++l) {
    require(truth_sep.at(l, layers) >= 0.0, "truth separation must be non-negative");
    require(polarity_sep.at(l, layers) >= 0.0, "polarity separation must be non-negative");
  }
  if (!truth_dir.empty() || !polarity_dir.empty()) {
    require(truth_dir.size() == d && polarity_dir.size() == d, "explicit directions must both have length d");
    require(std::abs(std::sqrt(dot(truth_dir, truth_dir)) - 1.0) <= 1e-8, "truth direction is not unit length");
    require(std::abs(std::sqrt(dot(polarity_dir, polarity_dir)) - 1.0) <= 1e-8,
            "polarity direction is not unit length");
    require(std::abs(dot(truth_dir, polarity_dir)) <= 1e-8, "truth and polarity directions are not orthogonal");
  }
}

nlohmann::ordered_json SyntheticSpec::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = d;
  j["n"] = n;
  j["layers"] = layers;
  j["truth_sep"] = truth_sep.to_string();
  j["polarity_sep"] = polarity_sep.to_string();
  j["angle"] = angle.to_string();
  j["noise"] = noise;
  j["seed"] = seed;
  j["direction_seed"] = direction_seed;
  j["truth_sign"] = truth_sign;
  j["polarity"] = polarity_name(polarity);
  j["task"] = task;
  j["prompt"] = prompt;
  j["model"] = model;
  j["train_fraction"] = train_fraction;
  if (!truth_dir.empty()) {
    j["truth_dir"] = truth_dir;
    j["polarity_dir"] = polarity_dir;
  }
  return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  require(j.is_object(), "synthetic spec must be a JSON object");
  static const std::vector<std::string> known = {
      "d",    "n",        "layers",         "truth_sep",  "polarity_sep", "angle", "noise", "seed", "direction_seed",
      "truth_sign", "polarity", "task", "prompt", "model", "train_fraction", "truth_dir", "polarity_dir"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      fail(ErrorCode::kInvalidArgument, fmt::format("unknown synthetic spec field '{}'", key));
  SyntheticSpec s;
  try {
    if (j.contains("d")) s.d = j.at("d").get<uint32_t>();
    if (j.contains("n")) s.n = j.at("n").get<uint32_t>();
    if (j.contains("layers")) s.layers = j.at("layers").get<uint32_t>();
    if (j.contains("truth_sep")) s.truth_sep = Schedule::from_json(j.at("truth_sep"));
    if (j.contains("polarity_sep")) s.polarity_sep = Schedule::from_json(j.at("polarity_sep"));
    if (j.contains("angle")) s.angle = Schedule::from_json(j.at("angle"));
    if (j.contains("noise")) s.noise = j.at("noise").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<uint64_t>();
    if (j.contains("direction_seed")) s.direction_seed = j.at("direction_seed").get<uint64_t>();
    if (j.contains("truth_sign")) s.truth_sign = j.at("truth_sign").get<int>();
    if (j.contains("polarity")) s.polarity = parse_polarity(j.at("polarity").get<std::string>());
    if (j.contains("task")) s.task = j.at("task").get<std::string>();
    if (j.contains("prompt")) s.prompt = j.at("prompt").get<std::string>();
    if (j.contains("model")) s.model = j.at("model").get<std::string>();
    if (j.contains("train_fraction")) s.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("truth_dir")) s.truth_dir = j.at("truth_dir").get<std::vector<double>>();
    if (j.contains("polarity_dir")) s.polarity_dir = j.at("polarity_dir").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, fmt::format("malformed synthetic spec: {}", e.what()));
  }
  s.validate();
  return s;
}

Directions make_directions(const SyntheticSpec& spec) {
  Rng rng(spec.direction_seed, kSaltDirections);
  auto gaussian = [&] {
    std::vector<double> v(spec.d);
    for (auto& x : v) x = rng.normal();
    return v;
  };
  Directions dirs;
  if (spec.truth_dir.empty()) {
    dirs.truth = gaussian();
    orthonormalize_against(dirs.truth, {});
    dirs.polarity = gaussian();
    orthonormalize_against(dirs.polarity, {&dirs.truth});
  } else {
    dirs.truth = spec.truth_dir;
    dirs.polarity = spec.polarity_dir;
  }
  dirs.rotation = gaussian();
  orthonormalize_against(dirs.rotation, {&dirs.truth, &dirs.polarity});
  return dirs;
}

SyntheticStack gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticStack out;
  out.spec = spec;
  out.directions = make_directions(spec);
  const size_t n = spec.n;
  const size_t d = spec.d;

  // Balanced truth labels; in mixed mode each truth class is split evenly
  // between polarities.
  Rng label_rng(spec.seed, kSaltLabels);
  std::vector<std::pair<uint8_t, int8_t>> cells;
  for (uint8_t label : {uint8_t{1}, uint8_t{0}})
    for (size_t k = 0; k < n / 2; ++k) {
      int8_t p = 1;
      if (spec.polarity == PolarityMode::kNegated) p = -1;
      if (spec.polarity == PolarityMode::kMixed) p = k % 2 == 0 ? 1 : -1;
      cells.emplace_back(label, p);
    }
  label_rng.shuffle(cells);

  out.labels.resize(n);
  out.polarity.resize(n);
  out.statements.resize(n);
  for (size_t i = 0; i < n; ++i) {
    out.labels[i] = cells[i].first;
    out.polarity[i] = cells[i].second;
    auto& s = out.statements[i];
    s.id = static_cast<int64_t>(i);
    s.task = spec.task;
    s.text = fmt::format("synthetic #{}", i);
    s.label = cells[i].first != 0;
    s.prompt = spec.prompt;
    s.meta = nlohmann::json::object();
    s.meta["statement"] = s.text;
    s.meta["polarity"] = cells[i].second > 0 ? "affirmative" : "negated";
    s.meta["truth_sign"] = spec.truth_sign;
  }
  taskgen::split_dataset(out.statements, spec.train_fraction, spec.seed);

  std::vector<int64_t> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = static_cast<int64_t>(i);
  const auto& dirs = out.directions;
  out.batches.reserve(spec.layers);
  for (uint32_t layer = 0; layer < spec.layers; ++layer) {
    const double s_g = spec.truth_sep.at(layer, spec.layers);
    const double s_p = spec.polarity_sep.at(layer, spec.layers);
    const double theta = spec.angle.at(layer, spec.layers);
    std::vector<double> truth_axis(d);
    for (size_t j = 0; j < d; ++j)
      truth_axis[j] = std::cos(theta) * dirs.truth[j] + std::sin(theta) * dirs.rotation[j];

    tensorio::ActivationBatch b;
    b.layer = layer;
    b.n = n;
    b.d = d;
    b.task = spec.task;
    b.prompt = spec.prompt;
    b.model = spec.model;
    b.example_ids = ids;
    b.data.resize(n * d);
    Rng noise_rng(spec.seed, kSaltNoise + layer);
    for (size_t i = 0; i < n; ++i) {
      const double y = spec.truth_sign * (out.labels[i] ? 1.0 : -1.0);
      const double p = out.polarity[i];
      float* row = b.data.data() + i * d;
      for (size_t j = 0; j < d; ++j)
        row[j] = static_cast<float>(spec.noise * noise_rng.normal() + y * s_g * truth_axis[j] +
                                    p * y * s_p * dirs.polarity[j]);
    }
    out.batches.push_back(std::move(b));
  }
  return out;
}

std::vector<std::filesystem::path> emit(const SyntheticStack& stack, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> written;
  const auto manifest = dir / taskgen::dataset_file_name(stack.spec.task, stack.spec.prompt);
  taskgen::write_jsonl(stack.statements, manifest);
  written.push_back(manifest);
  for (const auto& b : stack.batches) {
    const auto path = dir / tensorio::activation_file_name(b.task, b.prompt, b.layer);
    tensorio::write_activations(b, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace truthlens::synthgen
