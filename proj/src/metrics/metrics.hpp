// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "probe/probe.hpp"
#include "tensorio/activation_file.hpp"

namespace truthlens::metrics {

/// Area under the ROC curve in Mann-Whitney form: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
/// Exact: the pair count is accumulated in integers before the final division.
double auroc(std::span<const double> scores, std::span<const uint8_t> labels);

double cosine(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const float> a, std::span<const float> b);

/// Rows of a batch with their labels. An empty `rows` selects every row, in
/// which case labels must have batch.n entries.
struct LabeledRows {
  const tensorio::ActivationBatch* batch = nullptr;
  std::span<const uint8_t> labels;
  std::span<const size_t> rows;

  size_t size() const { return rows.empty() ? batch->n : rows.size(); }
  size_t row(size_t i) const { return rows.empty() ? i : rows[i]; }
};

struct VarianceRatioResult {
  uint32_t layer = 0;
  /// +infinity when the within-class variance is zero (see `degenerate`).
  double ratio = 0.0;
  bool degenerate = false;
  std::vector<double> mean_true;
  std::vector<double> mean_false;
  std::vector<double> mean_all;
};

/// Between- to within-class variance ratio
///   R = (msd(mu_true, mu) + msd(mu_false, mu)) / (var_true + var_false)
/// where msd is the mean over dimensions of squared differences and each
/// class variance is the per-dimension population variance averaged over
/// dimensions. Requires two examples per class.
VarianceRatioResult variance_ratio(const LabeledRows& data);

struct PolarityDecomposition {
  uint32_t layer = 0;
  std::vector<double> t_general;   ///< unit; probe trained on affirmative + negated
  std::vector<double> t_polarity;  ///< unit; probe trained on affirmative only
  double frac_general = 0.0;
  double frac_polarity = 0.0;
  /// Truth-related scatter was zero; both fractions are reported as 0.
  bool degenerate = false;
};

/// Truth-related scatter of the union: truth-class scatter computed within
/// each polarity stratum and pooled with stratum weights,
///   S = sum_p pi_p sum_y pi_{y|p} (mu_{y,p} - mu_p)(mu_{y,p} - mu_p)^T.
/// frac_X = t_X^T S t_X / trace(S), so each fraction lies in [0, 1].
/// Fractions are measured on (eval_aff, eval_neg) when given, else on the
/// training rows.
PolarityDecomposition polarity_decompose(const LabeledRows& aff, const LabeledRows& neg,
                                         const probe::ProbeHyper& hyper, uint64_t seed,
                                         const LabeledRows* eval_aff = nullptr,
                                         const LabeledRows* eval_neg = nullptr);

/// t^T S t and trace(S) for the truth-related scatter above, without forming S.
struct ScatterFraction {
  double explained = 0.0;
  double total = 0.0;
};
ScatterFraction truth_scatter_fraction(std::span<const double> unit_direction, const LabeledRows& aff,
                                       const LabeledRows& neg);

struct Projection2D {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> w_hat;
  std::vector<double> v_hat;  ///< zero vector when degenerate
  bool degenerate = false;    ///< residuals carry no variance; y is all zero
  int iterations = 0;
};

struct PowerIterationOptions {
  double tolerance = 1e-8;
  int max_iterations = 1000;
};

/// x_i = w_hat . (h_i - mu); y_i = v_hat . r_i where r_i is the part of
/// h_i - mu orthogonal to w_hat and v_hat is the top principal direction of
/// the pooled residuals (covariance about their mean), found by power
/// iteration and kept orthogonal to w_hat.
Projection2D project_2d(const tensorio::ActivationBatch& batch, const probe::ProbeModel& model,
                        std::span<const size_t> rows = {}, const PowerIterationOptions& options = {});

enum class MatrixKind { kAuroc, kCosine };

/// Rectangular grid of AUROC (train task x eval task) or cosine (layer x
/// layer) values.
struct EvalMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<double> values;  // row-major
  MatrixKind kind = MatrixKind::kAuroc;
  std::string axes;            // e.g. "train_task/eval_task"

  size_t rows() const { return row_labels.size(); }
  size_t cols() const { return col_labels.size(); }
  double at(size_t r, size_t c) const { return values[r * cols() + c]; }
  double& at(size_t r, size_t c) { return values[r * cols() + c]; }

  /// Header row "{axes},col...", then one row per label; values "%.8f".
  std::string to_csv() const;
};

/// Entry (i, j) is the AUROC of probe i on evaluation set j (scored on
/// logits). All probes and batches must share a layer; prompts must match
/// when set.
EvalMatrix cross_task_matrix(std::span<const probe::ProbeModel> probes, std::span<const LabeledRows> evals,
                             std::span<const std::string> eval_names);

/// Pairwise cosine of probe directions; symmetric with unit diagonal.
EvalMatrix probe_similarity_heatmap(std::span<const probe::ProbeModel> probes);

}  // namespace truthlens::metrics
