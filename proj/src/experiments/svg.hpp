// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metrics/metrics.hpp"

namespace truthlens::experiments::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Fixed y range; when lo >= hi the range is fitted to the data.
  double y_lo = 0.0;
  double y_hi = 1.0;
};

std::string line_plot(const Axes& axes, const std::vector<Series>& series);

/// Cell colour from white (0) to dark blue (1) for AUROC, diverging for cosine.
std::string heatmap(const std::string& title, const metrics::EvalMatrix& matrix);

struct ScatterPanel {
  std::string title;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<uint8_t> labels;
};

/// Panels laid out on a grid, true points blue and false points red.
std::string scatter_grid(const std::string& title, const std::vector<ScatterPanel>& panels);

}  // namespace truthlens::experiments::svg
