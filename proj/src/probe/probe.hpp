// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tensorio/activation_file.hpp"

namespace truthlens::probe {

/// Optimiser settings. Defaults are the reference training recipe:
/// full-batch Adam, lr 1e-3, weight decay 0.1, 1000 steps.
struct ProbeHyper {
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  uint32_t steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ProbeHyper from_json(const nlohmann::json& j);
  /// Stable across runs and platforms; used in probe cache keys.
  uint64_t hash() const;

  bool operator==(const ProbeHyper&) const = default;
};

/// Row-major dense matrix in double precision.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(size_t i) const { return {values.data() + i * cols, cols}; }
};

struct Centered {
  std::vector<double> mean;
  Matrix x;
};

/// Subtracts the column mean of the selected rows (all rows when `rows` is
/// empty). Accumulates in double.
Centered center(const tensorio::ActivationBatch& batch, std::span<const size_t> rows = {});

/// A trained truth direction. w and mu are float32 so a saved probe scores
/// bit-identically to the in-memory one.
struct ProbeModel {
  std::vector<float> w;
  std::vector<float> mu;
  uint32_t layer = 0;
  std::string task;
  std::string prompt;
  ProbeHyper hyper;
  uint64_t seed = 0;
  /// Identifies the training data (ids, shape, values); empty if unknown.
  std::string fingerprint;

  size_t dim() const { return w.size(); }
  bool operator==(const ProbeModel&) const = default;
};

/// Mean binary cross-entropy of sigmoid(x w) against labels, plus
/// (l2 / 2) * ||w||^2.
double objective(std::span<const double> w, const Matrix& x, std::span<const uint8_t> labels, double l2);

/// Analytic gradient of `objective`.
std::vector<double> gradient(std::span<const double> w, const Matrix& x, std::span<const uint8_t> labels,
                             double l2);

/// Full-batch Adam from w = 0. Weight decay enters the gradient as an L2
/// term (g += weight_decay * w), as in torch.optim.Adam. If `loss_trace` is
/// non-null it receives the objective before every step.
std::vector<double> fit_direction(const Matrix& x, std::span<const uint8_t> labels, const ProbeHyper& hyper,
                                  std::vector<double>* loss_trace = nullptr);

/// Trains on centered data; the returned model carries the centering mean.
/// Throws Error(kInvalidArgument) for single-class labels or a label count
/// that does not match the rows.
ProbeModel train_probe(const Centered& train, std::span<const uint8_t> labels, const ProbeHyper& hyper,
                       uint64_t seed);

/// w . (h - mu) per selected row (all rows when `rows` is empty), using the
/// model's own mean.
std::vector<double> logits(const ProbeModel& model, const tensorio::ActivationBatch& batch,
                           std::span<const size_t> rows = {});

/// sigmoid(logits). Probabilities saturate to exactly 1 in double for
/// logits above ~37, so ranking metrics should be computed on logits.
std::vector<double> score(const ProbeModel& model, const tensorio::ActivationBatch& batch,
                          std::span<const size_t> rows = {});

double sigmoid(double z);

void save_probe(const ProbeModel& model, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

std::string probe_to_json(const ProbeModel& model);
ProbeModel probe_from_json(std::string_view text);

}  // namespace truthlens::probe
