// SPDX-License-Identifier: Apache-2.0
#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace truthlens::metrics {
namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  require(a.size() == b.size(), fmt::format("cosine: length mismatch ({} vs {})", a.size(), b.size()));
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * double(b[i]);
    aa += double(a[i]) * double(a[i]);
    bb += double(b[i]) * double(b[i]);
  }
  require(aa > 0.0 && bb > 0.0, "cosine of a zero vector is undefined");
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

void check_labeled(const LabeledRows& data, std::string_view what) {
  require(data.batch != nullptr, fmt::format("{}: missing batch", what));
  require(data.labels.size() == data.size(),
          fmt::format("{}: {} labels for {} rows", what, data.labels.size(), data.size()));
}

// Centers the union of several labeled row sets on their joint mean.
probe::Centered stack_center(std::initializer_list<const LabeledRows*> parts, std::vector<uint8_t>& labels) {
  const size_t d = (*parts.begin())->batch->d;
  size_t total = 0;
  for (const auto* p : parts) {
    require(p->batch->d == d, "stacked batches differ in width");
    total += p->size();
  }
  require(total > 0, "cannot center an empty selection");
  probe::Centered out;
  out.mean.assign(d, 0.0);
  for (const auto* p : parts)
    for (size_t i = 0; i < p->size(); ++i) {
      const auto h = p->batch->row(p->row(i));
      for (size_t j = 0; j < d; ++j) out.mean[j] += h[j];
    }
  for (auto& m : out.mean) m /= static_cast<double>(total);
  out.x.rows = total;
  out.x.cols = d;
  out.x.values.resize(total * d);
  labels.clear();
  size_t r = 0;
  for (const auto* p : parts)
    for (size_t i = 0; i < p->size(); ++i, ++r) {
      const auto h = p->batch->row(p->row(i));
      for (size_t j = 0; j < d; ++j) out.x.values[r * d + j] = double(h[j]) - out.mean[j];
      labels.push_back(p->labels[i]);
    }
  return out;
}

std::vector<double> normalized(std::vector<double> v) {
  double n = 0.0;
  for (const double x : v) n += x * x;
  n = std::sqrt(n);
  require(n > 0.0, "probe direction has zero norm");
  for (auto& x : v) x /= n;
  return v;
}

// Accumulates the weighted truth-class contrast of one polarity stratum.
void stratum_scatter(const LabeledRows& data, double stratum_weight, std::span<const double> t,
                     ScatterFraction& acc) {
  const size_t d = data.batch->d;
  std::vector<double> mean(d, 0.0), mean_pos(d, 0.0), mean_neg(d, 0.0);
  size_t n_pos = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto h = data.batch->row(data.row(i));
    auto& target = data.labels[i] ? mean_pos : mean_neg;
    for (size_t j = 0; j < d; ++j) target[j] += h[j];
    n_pos += data.labels[i] != 0;
  }
  const size_t n = data.size();
  const size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, "polarity stratum needs both truth classes");
  for (size_t j = 0; j < d; ++j) {
    mean[j] = (mean_pos[j] + mean_neg[j]) / double(n);
    mean_pos[j] /= double(n_pos);
    mean_neg[j] /= double(n_neg);
  }
  for (const auto& [class_mean, count] : {std::pair{&mean_pos, n_pos}, std::pair{&mean_neg, n_neg}}) {
    const double w = stratum_weight * double(count) / double(n);
    double proj = 0.0, sq = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double delta = (*class_mean)[j] - mean[j];
      proj += t[j] * delta;
      sq += delta * delta;
    }
    acc.explained += w * proj * proj;
    acc.total += w * sq;
  }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const uint8_t> labels) {
  require(scores.size() == labels.size(),
          fmt::format("auroc: {} scores for {} labels", scores.size(), labels.size()));
  for (const double s : scores) require(!std::isnan(s), "auroc: NaN score");
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U, from doubled mid-ranks.
  int64_t rank_sum_x2 = 0;
  int64_t n_pos = 0;
  size_t start = 0;
  while (start < n) {
    size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const auto doubled_midrank = static_cast<int64_t>(start + end + 1);
    for (size_t k = start; k < end; ++k)
      if (labels[order[k]]) {
        rank_sum_x2 += doubled_midrank;
        ++n_pos;
      }
    start = end;
  }
  const int64_t n_neg = static_cast<int64_t>(n) - n_pos;
  require(n_pos > 0 && n_neg > 0, "auroc needs both classes present");
  const int64_t u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
  return static_cast<double>(u_x2) / static_cast<double>(2 * n_pos * n_neg);
}

double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }
double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }

VarianceRatioResult variance_ratio(const LabeledRows& data) {
  check_labeled(data, "variance_ratio");
  const size_t d = data.batch->d;
  VarianceRatioResult out;
  out.layer = data.batch->layer;
  out.mean_true.assign(d, 0.0);
  out.mean_false.assign(d, 0.0);
  out.mean_all.assign(d, 0.0);
  size_t n_true = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto h = data.batch->row(data.row(i));
    auto& m = data.labels[i] ? out.mean_true : out.mean_false;
    for (size_t j = 0; j < d; ++j) m[j] += h[j];
    n_true += data.labels[i] != 0;
  }
  const size_t n = data.size();
  const size_t n_false = n - n_true;
  require(n_true >= 2 && n_false >= 2, "variance_ratio needs at least two examples per class");
  for (size_t j = 0; j < d; ++j) {
    out.mean_all[j] = (out.mean_true[j] + out.mean_false[j]) / double(n);
    out.mean_true[j] /= double(n_true);
    out.mean_false[j] /= double(n_false);
  }
  double between = 0.0;
  for (size_t j = 0; j < d; ++j) {
    const double a = out.mean_true[j] - out.mean_all[j];
    const double b = out.mean_false[j] - out.mean_all[j];
    between += a * a + b * b;
  }
  between /= double(d);
  double ss_true = 0.0, ss_false = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto h = data.batch->row(data.row(i));
    const auto& m = data.labels[i] ? out.mean_true : out.mean_false;
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double delta = h[j] - m[j];
      acc += delta * delta;
    }
    (data.labels[i] ? ss_true : ss_false) += acc;
  }
  const double within = ss_true / double(n_true * d) + ss_false / double(n_false * d);
  if (within <= 0.0) {
    out.degenerate = true;
    out.ratio = std::numeric_limits<double>::infinity();
  } else {
    out.ratio = between / within;
  }
  return out;
}

ScatterFraction truth_scatter_fraction(std::span<const double> t, const LabeledRows& aff, const LabeledRows& neg) {
  check_labeled(aff, "affirmative set");
  check_labeled(neg, "negated set");
  require(t.size() == aff.batch->d && t.size() == neg.batch->d, "direction width does not match batches");
  const double total = double(aff.size() + neg.size());
  ScatterFraction acc;
  stratum_scatter(aff, double(aff.size()) / total, t, acc);
  stratum_scatter(neg, double(neg.size()) / total, t, acc);
  return acc;
}

PolarityDecomposition polarity_decompose(const LabeledRows& aff, const LabeledRows& neg,
                                         const probe::ProbeHyper& hyper, uint64_t /*seed*/,
                                         const LabeledRows* eval_aff, const LabeledRows* eval_neg) {
  check_labeled(aff, "affirmative set");
  check_labeled(neg, "negated set");
  require(aff.batch->layer == neg.batch->layer,
          fmt::format("polarity sets come from different layers ({} vs {})", aff.batch->layer, neg.batch->layer));
  require(aff.batch->d == neg.batch->d, "polarity sets differ in width");
  require(aff.batch->prompt.empty() || neg.batch->prompt.empty() || aff.batch->prompt == neg.batch->prompt,
          "polarity sets use different prompt templates");
  require((eval_aff == nullptr) == (eval_neg == nullptr), "evaluation sets must be given together");

  PolarityDecomposition out;
  out.layer = aff.batch->layer;
  std::vector<uint8_t> labels;
  const auto aff_centered = stack_center({&aff}, labels);
  out.t_polarity = normalized(probe::fit_direction(aff_centered.x, labels, hyper));
  const auto union_centered = stack_center({&aff, &neg}, labels);
  out.t_general = normalized(probe::fit_direction(union_centered.x, labels, hyper));

  const LabeledRows& fa = eval_aff ? *eval_aff : aff;
  const LabeledRows& fn = eval_neg ? *eval_neg : neg;
  const auto g = truth_scatter_fraction(out.t_general, fa, fn);
  const auto p = truth_scatter_fraction(out.t_polarity, fa, fn);
  if (!(g.total > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.frac_general = std::clamp(g.explained / g.total, 0.0, 1.0);
  out.frac_polarity = std::clamp(p.explained / p.total, 0.0, 1.0);
  return out;
}

Projection2D project_2d(const tensorio::ActivationBatch& batch, const probe::ProbeModel& model,
                        std::span<const size_t> rows, const PowerIterationOptions& options) {
  require(batch.d == model.dim(), fmt::format("batch width {} does not match probe width {}", batch.d, model.dim()));
  const size_t d = batch.d;
  const size_t n = rows.empty() ? batch.n : rows.size();
  require(n > 0, "project_2d: empty selection");
  Projection2D out;
  out.w_hat = normalized(std::vector<double>(model.w.begin(), model.w.end()));
  const auto& w = out.w_hat;

  // Residuals r_i = c_i - x_i w, with c_i = h_i - mu.
  std::vector<double> resid(n * d);
  out.x.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto h = batch.row(rows.empty() ? i : rows[i]);
    double* r = resid.data() + i * d;
    double x = 0.0;
    for (size_t j = 0; j < d; ++j) {
      r[j] = double(h[j]) - double(model.mu[j]);
      x += w[j] * r[j];
    }
    out.x[i] = x;
    for (size_t j = 0; j < d; ++j) r[j] -= x * w[j];
  }
  std::vector<double> rbar(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) rbar[j] += resid[i * d + j];
  for (auto& v : rbar) v /= double(n);

  double total_var = 0.0, scale = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) {
      const double c = resid[i * d + j] - rbar[j];
      total_var += c * c;
      scale += resid[i * d + j] * resid[i * d + j] + out.x[i] * out.x[i] * w[j] * w[j];
    }
  out.y.assign(n, 0.0);
  out.v_hat.assign(d, 0.0);
  if (!(total_var > 1e-20 * scale)) {
    out.degenerate = true;
    return out;
  }

  auto orthonormalize = [&](std::vector<double>& v) {
    double dot = 0.0;
    for (size_t j = 0; j < d; ++j) dot += v[j] * w[j];
    for (size_t j = 0; j < d; ++j) v[j] -= dot * w[j];
    double norm = 0.0;
    for (const double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return false;
    for (auto& x : v) x /= norm;
    return true;
  };

  // Deterministic start vector; a Gaussian draw is almost surely not
  // orthogonal to the leading eigenvector.
  Rng rng(0x50CA);
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  if (!orthonormalize(v)) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> next(d);
  for (int it = 1; it <= options.max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double* r = resid.data() + i * d;
      double proj = 0.0;
      for (size_t j = 0; j < d; ++j) proj += (r[j] - rbar[j]) * v[j];
      for (size_t j = 0; j < d; ++j) next[j] += proj * (r[j] - rbar[j]);
    }
    if (!orthonormalize(next)) {
      out.degenerate = true;
      return out;
    }
    double delta = 0.0;
    for (size_t j = 0; j < d; ++j) delta = std::max(delta, std::abs(next[j] - v[j]));
    v.swap(next);
    out.iterations = it;
    if (delta < options.tolerance) break;
  }
  // Fix the sign so the larger-magnitude component is positive.
  size_t arg = 0;
  for (size_t j = 1; j < d; ++j)
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  if (v[arg] < 0)
    for (auto& x : v) x = -x;
  out.v_hat = v;
  for (size_t i = 0; i < n; ++i) {
    const double* r = resid.data() + i * d;
    double y = 0.0;
    for (size_t j = 0; j < d; ++j) y += v[j] * r[j];
    out.y[i] = y;
  }
  return out;
}

std::string EvalMatrix::to_csv() const {
  std::string out = axes.empty() ? std::string("row/col") : axes;
  for (const auto& c : col_labels) out += "," + c;
  out += "\n";
  for (size_t r = 0; r < rows(); ++r) {
    out += row_labels[r];
    for (size_t c = 0; c < cols(); ++c) out += fmt::format(",{:.8f}", at(r, c));
    out += "\n";
  }
  return out;
}

EvalMatrix cross_task_matrix(std::span<const probe::ProbeModel> probes, std::span<const LabeledRows> evals,
                             std::span<const std::string> eval_names) {
  require(!probes.empty(), "cross_task_matrix: no probes");
  require(evals.size() == eval_names.size(), "cross_task_matrix: one name per evaluation set required");
  const uint32_t layer = probes[0].layer;
  const std::string& prompt = probes[0].prompt;
  for (const auto& p : probes) {
    require(p.layer == layer, "cross_task_matrix: probes from different layers");
    require(p.prompt == prompt, "cross_task_matrix: probes from different prompt templates");
  }
  for (size_t j = 0; j < evals.size(); ++j) {
    if (evals[j].batch == nullptr)
      fail(ErrorCode::kMissingInput, fmt::format("cross_task_matrix: missing batch for column '{}'", eval_names[j]));
    check_labeled(evals[j], "cross_task_matrix column");
    require(evals[j].batch->layer == layer, "cross_task_matrix: evaluation batch from a different layer");
    require(evals[j].batch->prompt.empty() || prompt.empty() || evals[j].batch->prompt == prompt,
            "cross_task_matrix: evaluation batch uses a different prompt template");
  }
  EvalMatrix m;
  m.kind = MatrixKind::kAuroc;
  m.axes = "train_task/eval_task";
  for (const auto& p : probes) m.row_labels.push_back(p.task);
  m.col_labels.assign(eval_names.begin(), eval_names.end());
  m.values.resize(probes.size() * evals.size());
  for (size_t i = 0; i < probes.size(); ++i)
    for (size_t j = 0; j < evals.size(); ++j) {
      const auto z = probe::logits(probes[i], *evals[j].batch, evals[j].rows);
      m.at(i, j) = auroc(z, evals[j].labels);
    }
  return m;
}

EvalMatrix probe_similarity_heatmap(std::span<const probe::ProbeModel> probes) {
  require(probes.size() >= 2, "probe_similarity_heatmap needs at least two probes");
  EvalMatrix m;
  m.kind = MatrixKind::kCosine;
  m.axes = "layer/layer";
  for (const auto& p : probes) m.row_labels.push_back(std::to_string(p.layer));
  m.col_labels = m.row_labels;
  m.values.resize(probes.size() * probes.size());
  for (size_t i = 0; i < probes.size(); ++i) {
    m.at(i, i) = 1.0;
    for (size_t j = i + 1; j < probes.size(); ++j) {
      const double c = cosine(std::span<const float>(probes[i].w), std::span<const float>(probes[j].w));
      m.at(i, j) = c;
      m.at(j, i) = c;
    }
  }
  return m;
}

}  // namespace truthlens::metrics
