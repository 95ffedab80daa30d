// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "taskgen/statement.hpp"
#include "tensorio/activation_file.hpp"

namespace truthlens::synthgen {

/// A per-layer scalar. Textual forms:
///   "4"              constant
///   "0,0,1,2"        one value per layer
///   "step:10:0:4"    0 below layer 10, 4 from layer 10 on
///   "linear:a:b"     a at layer 0 to b at the last layer
class Schedule {
 public:
  Schedule() = default;
  static Schedule constant(double v);
  static Schedule values(std::vector<double> v);
  static Schedule step(uint32_t at, double before, double after);
  static Schedule linear(double first, double last);
  static Schedule parse(std::string_view text);
  static Schedule from_json(const nlohmann::json& j);

  double at(uint32_t layer, uint32_t layers) const;
  /// Throws when a list has the wrong length or any value is not finite.
  void validate(uint32_t layers, std::string_view name) const;
  std::string to_string() const;

 private:
  enum class Kind { kConstant, kValues, kStep, kLinear };
  Kind kind_ = Kind::kConstant;
  std::vector<double> values_{0.0};
  uint32_t step_at_ = 0;
};

enum class PolarityMode { kAffirmative, kNegated, kMixed };

struct SyntheticSpec {
  uint32_t d = 64;
  uint32_t n = 1000;
  uint32_t layers = 1;
  Schedule truth_sep = Schedule::constant(4.0);     ///< s_G(l)
  Schedule polarity_sep = Schedule::constant(0.0);  ///< s_p(l)
  Schedule angle = Schedule::constant(0.0);         ///< theta(l), radians
  double noise = 1.0;                               ///< sigma_n
  uint64_t seed = 0;                                ///< labels, polarity flags, noise
  uint64_t direction_seed = 0;                      ///< u_G, u_p, u_r
  /// -1 plants the task anti-aligned: true rows sit at -s_G u_G.
  int truth_sign = 1;
  PolarityMode polarity = PolarityMode::kAffirmative;
  std::string task = "S0";
  std::string prompt = "no-prompt";
  std::string model = "synthetic";
  double train_fraction = 0.7;
  /// Optional explicit directions; derived from direction_seed when empty.
  std::vector<double> truth_dir;
  std::vector<double> polarity_dir;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

/// Orthonormal u_G, u_p and the rotation partner u_r (u_G rotates within
/// span(u_G, u_r)).
struct Directions {
  std::vector<double> truth;
  std::vector<double> polarity;
  std::vector<double> rotation;
};
Directions make_directions(const SyntheticSpec& spec);

struct SyntheticStack {
  SyntheticSpec spec;
  Directions directions;
  /// Manifest in id order; text "synthetic #id", meta {polarity, truth_sign}.
  taskgen::Dataset statements;
  std::vector<uint8_t> labels;   ///< 1 = true
  std::vector<int8_t> polarity;  ///< +1 affirmative, -1 negated
  std::vector<tensorio::ActivationBatch> batches;  ///< one per layer
};

/// Row i at layer l:
///   sigma_n g + y s_G(l) R(l) u_G + p y s_p(l) u_p
/// with y = truth_sign * (+1 true / -1 false), p the polarity sign, g unit
/// Gaussian noise drawn independently per layer and R(l) the rotation by
/// theta(l) in span(u_G, u_r). Exactly n/2 true rows.
SyntheticStack gen_synthetic(const SyntheticSpec& spec);

/// Writes "{task}.{prompt}.jsonl" and one activation file per layer into dir.
/// Returns the written paths, manifest first.
std::vector<std::filesystem::path> emit(const SyntheticStack& stack, const std::filesystem::path& dir);

}  // namespace truthlens::synthgen
