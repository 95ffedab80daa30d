// SPDX-License-Identifier: Apache-2.0
#include "probe/probe.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "common/encoding.hpp"
#include "common/error.hpp"

namespace truthlens::probe {
namespace {

constexpr std::string_view kFormatName = "truthlens.probe";
constexpr int kFormatVersion = 1;

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_labels(const Matrix& x, std::span<const uint8_t> labels) {
  require(labels.size() == x.rows,
          fmt::format("{} labels for {} rows", labels.size(), x.rows));
  size_t pos = 0;
  for (const auto y : labels) pos += y != 0;
  require(pos > 0 && pos < labels.size(), "probe training needs both classes present");
}

std::vector<double> forward(std::span<const double> w, const Matrix& x) {
  std::vector<double> z(x.rows);
  for (size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.values.data() + i * x.cols;
    double acc = 0.0;
    for (size_t j = 0; j < x.cols; ++j) acc += xi[j] * w[j];
    z[i] = acc;
  }
  return z;
}

double loss_from_logits(std::span<const double> z, std::span<const double> w, std::span<const uint8_t> labels,
                        double l2) {
  double bce = 0.0;
  for (size_t i = 0; i < z.size(); ++i) bce += softplus(z[i]) - (labels[i] ? z[i] : 0.0);
  double sq = 0.0;
  for (const double v : w) sq += v * v;
  return bce / static_cast<double>(z.size()) + 0.5 * l2 * sq;
}

void gradient_from_logits(std::span<const double> z, std::span<const double> w, const Matrix& x,
                          std::span<const uint8_t> labels, double l2, std::span<double> g) {
  std::fill(g.begin(), g.end(), 0.0);
  for (size_t i = 0; i < x.rows; ++i) {
    const double r = sigmoid(z[i]) - (labels[i] ? 1.0 : 0.0);
    const double* xi = x.values.data() + i * x.cols;
    for (size_t j = 0; j < x.cols; ++j) g[j] += r * xi[j];
  }
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (size_t j = 0; j < g.size(); ++j) g[j] = g[j] * inv_n + l2 * w[j];
}

std::vector<size_t> all_rows(size_t n) {
  std::vector<size_t> rows(n);
  for (size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

void ProbeHyper::validate() const {
  require(learning_rate > 0 && std::isfinite(learning_rate), "learning rate must be positive");
  require(weight_decay >= 0 && std::isfinite(weight_decay), "weight decay must be non-negative");
  require(steps >= 1, "steps must be at least 1");
  require(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1, "Adam betas must lie in (0, 1)");
  require(epsilon > 0, "Adam epsilon must be positive");
}

nlohmann::ordered_json ProbeHyper::to_json() const {
  nlohmann::ordered_json j;
  j["optimizer"] = "adam";
  j["batch"] = "full";
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["steps"] = steps;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  return j;
}

ProbeHyper ProbeHyper::from_json(const nlohmann::json& j) {
  ProbeHyper h;
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.weight_decay = j.value("weight_decay", h.weight_decay);
  h.steps = j.value("steps", h.steps);
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.epsilon = j.value("epsilon", h.epsilon);
  h.validate();
  return h;
}

uint64_t ProbeHyper::hash() const { return fnv1a64(to_json().dump()); }

Centered center(const tensorio::ActivationBatch& batch, std::span<const size_t> rows) {
  std::vector<size_t> owned;
  if (rows.empty()) {
    owned = all_rows(batch.n);
    rows = owned;
  }
  require(!rows.empty(), "cannot center an empty batch");
  const size_t d = batch.d;
  Centered out;
  out.mean.assign(d, 0.0);
  for (const size_t r : rows) {
    require(r < batch.n, "row index out of range");
    const float* h = batch.data.data() + r * d;
    for (size_t j = 0; j < d; ++j) out.mean[j] += h[j];
  }
  for (auto& m : out.mean) m /= static_cast<double>(rows.size());
  out.x.rows = rows.size();
  out.x.cols = d;
  out.x.values.resize(rows.size() * d);
  for (size_t i = 0; i < rows.size(); ++i) {
    const float* h = batch.data.data() + rows[i] * d;
    double* dst = out.x.values.data() + i * d;
    for (size_t j = 0; j < d; ++j) dst[j] = static_cast<double>(h[j]) - out.mean[j];
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double objective(std::span<const double> w, const Matrix& x, std::span<const uint8_t> labels, double l2) {
  require(w.size() == x.cols && labels.size() == x.rows, "objective: dimension mismatch");
  const auto z = forward(w, x);
  return loss_from_logits(z, w, labels, l2);
}

std::vector<double> gradient(std::span<const double> w, const Matrix& x, std::span<const uint8_t> labels,
                             double l2) {
  require(w.size() == x.cols && labels.size() == x.rows, "gradient: dimension mismatch");
  const auto z = forward(w, x);
  std::vector<double> g(w.size());
  gradient_from_logits(z, w, x, labels, l2, g);
  return g;
}

std::vector<double> fit_direction(const Matrix& x, std::span<const uint8_t> labels, const ProbeHyper& hyper,
                                  std::vector<double>* loss_trace) {
  hyper.validate();
  check_labels(x, labels);
  for (const double v : x.values)
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, "probe training data contains NaN/Inf");
  const size_t d = x.cols;
  std::vector<double> w(d, 0.0), m(d, 0.0), v(d, 0.0), g(d);
  if (loss_trace) {
    loss_trace->clear();
    loss_trace->reserve(hyper.steps + 1);
  }
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  for (uint32_t t = 1; t <= hyper.steps; ++t) {
    const auto z = forward(w, x);
    if (loss_trace) loss_trace->push_back(loss_from_logits(z, w, labels, hyper.weight_decay));
    gradient_from_logits(z, w, x, labels, hyper.weight_decay, g);
    beta1_t *= hyper.beta1;
    beta2_t *= hyper.beta2;
    const double c1 = 1.0 - beta1_t;
    const double c2 = 1.0 - beta2_t;
    for (size_t j = 0; j < d; ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      w[j] -= hyper.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + hyper.epsilon);
    }
  }
  if (loss_trace) loss_trace->push_back(objective(w, x, labels, hyper.weight_decay));
  return w;
}

ProbeModel train_probe(const Centered& train, std::span<const uint8_t> labels, const ProbeHyper& hyper,
                       uint64_t seed) {
  require(train.mean.size() == train.x.cols, "centering mean does not match data width");
  const auto w = fit_direction(train.x, labels, hyper);
  ProbeModel model;
  model.w.assign(w.begin(), w.end());
  model.mu.assign(train.mean.begin(), train.mean.end());
  model.hyper = hyper;
  model.seed = seed;
  double norm = 0.0;
  for (const float v : model.w) norm += double(v) * v;
  if (!(norm > 0.0) || !std::isfinite(norm)) fail(ErrorCode::kNonFinite, "trained probe has zero or non-finite norm");
  return model;
}

std::vector<double> logits(const ProbeModel& model, const tensorio::ActivationBatch& batch,
                           std::span<const size_t> rows) {
  require(batch.d == model.dim(), fmt::format("batch width {} does not match probe width {}", batch.d, model.dim()));
  std::vector<size_t> owned;
  if (rows.empty()) {
    owned = all_rows(batch.n);
    rows = owned;
  }
  std::vector<double> out(rows.size());
  const size_t d = batch.d;
  for (size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < batch.n, "row index out of range");
    const float* h = batch.data.data() + rows[i] * d;
    double acc = 0.0;
    for (size_t j = 0; j < d; ++j)
      acc += static_cast<double>(model.w[j]) * (static_cast<double>(h[j]) - static_cast<double>(model.mu[j]));
    out[i] = acc;
  }
  return out;
}

std::vector<double> score(const ProbeModel& model, const tensorio::ActivationBatch& batch,
                          std::span<const size_t> rows) {
  auto z = logits(model, batch, rows);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

std::string probe_to_json(const ProbeModel& model) {
  nlohmann::ordered_json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;
  j["task"] = model.task;
  j["prompt"] = model.prompt;
  j["layer"] = model.layer;
  j["seed"] = model.seed;
  j["hyper"] = model.hyper.to_json();
  j["d"] = model.dim();
  j["fingerprint"] = model.fingerprint;
  j["w"] = base64_encode(pack_f32le(model.w));
  j["mu"] = base64_encode(pack_f32le(model.mu));
  return j.dump(2);
}

ProbeModel probe_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kFormat, std::string("probe file is not valid JSON: ") + e.what());
  }
  ProbeModel model;
  try {
    if (j.at("format").get<std::string>() != kFormatName) fail(ErrorCode::kFormat, "not a probe file");
    const int version = j.at("version").get<int>();
    if (version != kFormatVersion)
      fail(ErrorCode::kVersionMismatch, fmt::format("unsupported probe file version {}", version));
    model.task = j.at("task").get<std::string>();
    model.prompt = j.at("prompt").get<std::string>();
    model.layer = j.at("layer").get<uint32_t>();
    model.seed = j.at("seed").get<uint64_t>();
    model.hyper = ProbeHyper::from_json(j.at("hyper"));
    model.fingerprint = j.value("fingerprint", std::string());
    const auto d = j.at("d").get<size_t>();
    model.w = unpack_f32le(base64_decode(j.at("w").get<std::string>()));
    model.mu = unpack_f32le(base64_decode(j.at("mu").get<std::string>()));
    if (model.w.size() != d || model.mu.size() != d)
      fail(ErrorCode::kLengthMismatch, fmt::format("probe declares d={} but stores {} weights and {} means", d,
                                                   model.w.size(), model.mu.size()));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed probe file: ") + e.what());
  }
  return model;
}

void save_probe(const ProbeModel& model, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", tmp.string()));
    out << probe_to_json(model) << '\n';
    if (!out) fail(ErrorCode::kIo, fmt::format("write failed for '{}'", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot move probe into '{}': {}", path.string(), ec.message()));
}

ProbeModel load_probe(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open probe '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return probe_from_json(ss.str());
}

}  // namespace truthlens::probe
