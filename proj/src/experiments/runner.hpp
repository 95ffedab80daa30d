// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "experiments/plan.hpp"
#include "metrics/metrics.hpp"
#include "probe/probe.hpp"
#include "taskgen/statement.hpp"
#include "tensorio/activation_file.hpp"

namespace truthlens::experiments {

/// One activation file joined with its manifest: labels and splits per row.
struct TaskView {
  std::string task;
  std::string prompt;
  tensorio::ActivationBatch batch;
  std::vector<uint8_t> labels;  ///< per batch row
  std::vector<size_t> train_rows;
  std::vector<size_t> test_rows;
  std::vector<uint8_t> train_labels;
  std::vector<uint8_t> test_labels;

  metrics::LabeledRows train() const { return {&batch, train_labels, train_rows}; }
  metrics::LabeledRows test() const { return {&batch, test_labels, test_rows}; }
};

/// Files written by one operation, relative to the output directory.
struct Artifact {
  std::string operation;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::vector<std::string> tables;
  std::vector<std::string> plots;

  nlohmann::ordered_json to_json() const;
};

/// Runs fn(0..count-1) on `jobs` threads. The exception of the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(size_t count, unsigned jobs, const std::function<void(size_t)>& fn);

class Workspace {
 public:
  explicit Workspace(ExperimentPlan plan);

  const ExperimentPlan& plan() const { return plan_; }
  const std::filesystem::path& out() const { return plan_.out; }

  std::filesystem::path activation_path(const std::string& task, const std::string& prompt, uint32_t layer) const;
  std::filesystem::path manifest_path(const std::string& task, const std::string& prompt) const;
  std::filesystem::path probe_path(const std::string& task, const std::string& prompt, uint32_t layer) const;

  /// Layers with an activation file on disk, ascending.
  std::vector<uint32_t> available_layers(const std::string& task, const std::string& prompt) const;

  /// The plan's layers, or for "all" the layers present for every pair.
  std::vector<uint32_t> resolve_layers(const std::vector<std::pair<std::string, std::string>>& pairs) const;

  /// Fails fast with Error(kMissingInput) listing every absent manifest,
  /// activation file or sidecar, and Error(kInvalidArgument) for a layer
  /// beyond the last one on disk.
  void check_inputs(const std::vector<std::pair<std::string, std::string>>& pairs,
                    const std::vector<uint32_t>& layers) const;

  TaskView load(const std::string& task, const std::string& prompt, uint32_t layer) const;

  /// Loads the cached probe when its fingerprint matches the training rows,
  /// otherwise trains and stores it.
  probe::ProbeModel probe_for(const TaskView& view) const;

  /// Writes text under out(), creating directories; returns the relative path.
  std::string write_output(const std::string& relative, const std::string& text) const;

 private:
  const taskgen::Dataset& manifest(const std::string& task, const std::string& prompt) const;

  ExperimentPlan plan_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<std::string, std::string>, taskgen::Dataset> manifests_;
};

/// Hash of the training rows, ids and labels a probe is fitted on.
std::string training_fingerprint(const TaskView& view);

struct SweepPoint {
  std::string task;
  std::string prompt;
  uint32_t layer;
  double auroc;
};
struct GeneralizationPoint {
  std::string source;
  std::string target;
  std::string prompt;
  uint32_t layer;
  double auroc;
};
struct TransferPoint {
  uint32_t layer;
  double own;
  double transfer;
};
struct PolarityPoint {
  std::string prompt;
  uint32_t layer;
  double frac_general;
  double frac_polarity;
  bool degenerate;
};
struct ProjectionSet {
  std::string task;
  std::string prompt;
  uint32_t layer;
  std::vector<int64_t> ids;
  std::vector<uint8_t> labels;
  metrics::Projection2D projection;
};

template <typename T>
struct Result {
  std::vector<T> items;
  Artifact artifact;
};

/// In-domain test AUROC per (task, prompt, layer).
/// tables/layer_sweep.csv, plots/layer_sweep.{prompt}.svg
Result<SweepPoint> layer_sweep(Workspace& ws);

/// Source probe evaluated on every plan task's test split at the same layer.
/// tables/generalization.{source}.{prompt}.csv
Result<GeneralizationPoint> generalization_sweep(Workspace& ws, const std::string& source);

/// Probe trained under one prompt, evaluated on its own test split and on
/// the same statements' test split under another prompt.
/// tables/transfer.{task}.{source}.{target}.csv
Result<TransferPoint> prompt_transfer(Workspace& ws, const std::string& task, const std::string& source_prompt,
                                      const std::string& target_prompt);

/// K x K cross-task AUROC at one layer, one matrix per prompt.
/// tables/matrix.{prompt}.layer{NN}.csv
Result<metrics::EvalMatrix> full_matrix(Workspace& ws, uint32_t layer);

/// frac_G / frac_p per layer for the plan's affirmative/negated task pair;
/// probes fitted on train splits, fractions measured on test splits.
/// tables/polarity.{prompt}.csv
Result<PolarityPoint> polarity_sweep(Workspace& ws);

/// Test-split projections onto (w_hat, v_hat) per task using its own probe.
/// tables/projection.{task}.{prompt}.layer{NN}.csv
Result<ProjectionSet> projection_report(Workspace& ws, uint32_t layer);

/// Probe-direction cosine between every pair of layers for one task.
/// tables/similarity.{task}.{prompt}.csv
Result<metrics::EvalMatrix> probe_similarity(Workspace& ws, const std::string& task, const std::string& prompt);

/// Writes {out}/index.json: the plan snapshot plus entries sorted by
/// (operation, params). With merge, entries already in the index are kept
/// unless an incoming entry has the same key.
void emit_report(const Workspace& ws, const std::vector<Artifact>& artifacts, bool merge);

/// Runs every operation in the plan and writes a fresh index.
std::vector<Artifact> run_plan(Workspace& ws);

}  // namespace truthlens::experiments
