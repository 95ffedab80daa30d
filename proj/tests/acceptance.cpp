// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <Eigen/Dense>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "common/rng.hpp"
#include "experiments/runner.hpp"
#include "metrics/metrics.hpp"
#include "probe/probe.hpp"
#include "synthgen/synthgen.hpp"
#include "taskgen/dataset_io.hpp"
#include "taskgen/generators.hpp"
#include "taskgen/knowledge_base.hpp"
#include "oracles.hpp"

using namespace truthlens;
using synthgen::Schedule;
using synthgen::SyntheticSpec;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Split {
  std::vector<size_t> train, test;
  std::vector<uint8_t> train_y, test_y;
};

Split split_of(const synthgen::SyntheticStack& st) {
  Split s;
  for (size_t i = 0; i < st.statements.size(); ++i) {
    const bool train = st.statements[i].split == taskgen::Split::kTrain;
    (train ? s.train : s.test).push_back(i);
    (train ? s.train_y : s.test_y).push_back(st.labels[i]);
  }
  return s;
}

probe::ProbeModel fit(const tensorio::ActivationBatch& b, const Split& s) {
  return probe::train_probe(probe::center(b, s.train), s.train_y, {}, 0);
}

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double abs_cos(std::span<const float> w, std::span<const double> u) {
  double d = 0, nw = 0;
  for (size_t j = 0; j < w.size(); ++j) {
    d += w[j] * u[j];
    nw += double(w[j]) * w[j];
  }
  return std::abs(d) / std::sqrt(nw) / norm(u);
}

// 1. Every task, 5 seeds, default sizes.
Outcome dataset_integrity() {
  const auto t0 = Clock::now();
  const auto& kb = taskgen::KnowledgeBase::bundled();
  const auto cities = oracle::city_table();
  size_t items = 0, bad_label = 0, bad_balance = 0, bad_offset = 0, bad_division = 0;
  for (const auto task : taskgen::all_tasks()) {
    const std::string name(taskgen::task_name(task));
    for (uint64_t seed = 0; seed < 5; ++seed) {
      const auto ds = taskgen::generate(task, kb, taskgen::default_size(task), seed);
      long balance = 0;
      for (const auto& s : ds) {
        ++items;
        balance += s.label ? 1 : -1;
        const std::string stmt = s.meta.value("statement", s.text);
        if (taskgen::oracle_label(s, kb) != s.label) ++bad_label;
        if (taskgen::is_arithmetic(task)) {
          try {
            const auto p = oracle::arith_parts(stmt);
            const int64_t off = p.stated - p.value;
            if ((p.value == p.stated) != s.label) ++bad_label;
            if (!s.label && (std::abs(off) < 1 || std::abs(off) > 10)) ++bad_offset;
          } catch (const std::exception&) {
            ++bad_division;
          }
        } else if (oracle::text_label(name, stmt, cities) != s.label) {
          ++bad_label;
        }
      }
      if (std::abs(balance) > 1) ++bad_balance;
    }
  }
  const double secs = seconds_since(t0);
  return {bad_label == 0 && bad_balance == 0 && bad_offset == 0 && bad_division == 0 && secs < 30.0,
          fmt::format("{} items; label mismatches {}, unbalanced sets {}, bad offsets {}, inexact divisions {}; "
                      "{:.1f} s (limit 30 s)",
                      items, bad_label, bad_balance, bad_offset, bad_division, secs)};
}

// 2. Exact equality with the pairwise count, ties included.
Outcome auroc_equivalence() {
  Rng rng(0xA0C);
  size_t mismatches = 0, with_ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.uniform_index(49);
    const uint64_t levels = 1 + rng.uniform_index(trial % 3 == 0 ? 3 : 60);
    std::vector<double> s(n);
    std::vector<uint8_t> y(n);
    for (size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(levels)) * 0.25;
      y[i] = static_cast<uint8_t>(rng.uniform_index(2));
    }
    y[rng.uniform_index(n)] = 1;
    size_t j = rng.uniform_index(n);
    while (y[j] == 1 && std::count(y.begin(), y.end(), 1) == 1) j = rng.uniform_index(n);
    y[j] = 0;
    if (std::count(y.begin(), y.end(), 1) == 0) y[(j + 1) % n] = 1;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    with_ties += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    if (metrics::auroc(s, y) != oracle::auroc(s, y)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("1000 instances ({} with ties), {} not bit-identical", with_ties, mismatches)};
}

// 3. Planted direction, 10 seeds.
Outcome probe_recovery() {
  double worst_auc = 1.0, worst_cos = 1.0, slowest = 0.0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSpec spec;
    spec.d = 64;
    spec.n = 1000;
    spec.truth_sep = Schedule::constant(4.0);
    spec.noise = 1.0;
    spec.seed = seed;
    spec.direction_seed = seed;
    const auto st = synthgen::gen_synthetic(spec);
    const auto sp = split_of(st);
    const auto t0 = Clock::now();
    const auto m = fit(st.batches[0], sp);
    slowest = std::max(slowest, seconds_since(t0));
    worst_auc = std::min(worst_auc, oracle::auroc(probe::logits(m, st.batches[0], sp.test), sp.test_y));
    worst_cos = std::min(worst_cos, abs_cos(m.w, st.directions.truth));
  }
  return {worst_auc >= 0.99 && worst_cos >= 0.95 && slowest < 10.0,
          fmt::format("min test AUROC {:.4f} (>= 0.99), min |cos| {:.4f} (>= 0.95), slowest fit {:.3f} s (< 10 s)",
                      worst_auc, worst_cos, slowest)};
}

// 4. Central differences on the regularized objective.
Outcome gradient_check() {
  Rng rng(0x6AD);
  const size_t n = 60, d = 12;
  const double l2 = 0.1;
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    probe::Matrix x{n, d, std::vector<double>(n * d)};
    for (auto& v : x.values) v = rng.normal() * 2.0;
    std::vector<uint8_t> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = i % 2;
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal();
    const auto g = probe::gradient(w, x, y, l2);
    std::vector<double> fd(d), diff(d);
    for (size_t j = 0; j < d; ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(w[j]));
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      fd[j] = (probe::objective(wp, x, y, l2) - probe::objective(wm, x, y, l2)) / (2 * h);
      diff[j] = g[j] - fd[j];
    }
    worst = std::max(worst, norm(diff) / std::max({norm(g), norm(fd), 1e-300}));
  }
  return {worst <= 1e-4, fmt::format("max relative error {:.2e} over 20 points (<= 1e-4)", worst)};
}

// 5. Polarity-dominant construction: the affirmative probe inverts on negated data.
Outcome negation_inversion() {
  SyntheticSpec spec;
  spec.d = 64;
  spec.n = 1000;
  spec.truth_sep = Schedule::constant(1.0);
  spec.polarity_sep = Schedule::constant(4.0);
  spec.seed = 1;
  const auto aff = synthgen::gen_synthetic(spec);
  spec.seed = 2;
  spec.polarity = synthgen::PolarityMode::kNegated;
  const auto neg = synthgen::gen_synthetic(spec);
  const auto sa = split_of(aff), sn = split_of(neg);
  const auto m = fit(aff.batches[0], sa);
  const double own = oracle::auroc(probe::logits(m, aff.batches[0], sa.test), sa.test_y);
  const double inv = oracle::auroc(probe::logits(m, neg.batches[0], sn.test), sn.test_y);
  return {inv <= 0.05, fmt::format("negated-set AUROC {:.4f} (<= 0.05); affirmative test AUROC {:.4f}", inv, own)};
}

// 6a. Fractions against a^2/(a^2+b^2) and (a^4+b^4)/(a^2+b^2)^2.
Outcome polarity_fractions_part() {
  double worst = 0.0;
  for (const auto [a, b] : {std::pair{2.0, 12.0}, {4.0, 12.0}, {8.0, 8.0}, {12.0, 4.0}, {14.0, 2.0}}) {
    SyntheticSpec spec;
    spec.d = 16;
    spec.n = 4000;
    spec.noise = 10.0;
    spec.truth_sep = Schedule::constant(a);
    spec.polarity_sep = Schedule::constant(b);
    spec.seed = static_cast<uint64_t>(a);
    const auto aff = synthgen::gen_synthetic(spec);
    spec.seed += 100;
    spec.polarity = synthgen::PolarityMode::kNegated;
    const auto neg = synthgen::gen_synthetic(spec);
    const auto r = metrics::polarity_decompose({&aff.batches[0], aff.labels, {}}, {&neg.batches[0], neg.labels, {}},
                                               {}, 0);
    const double a2 = a * a, b2 = b * b;
    worst = std::max({worst, std::abs(r.frac_general - a2 / (a2 + b2)),
                      std::abs(r.frac_polarity - (a2 * a2 + b2 * b2) / ((a2 + b2) * (a2 + b2)))});
  }
  return {worst <= 0.05, fmt::format("max |frac - analytic| {:.4f} over 5 fixtures (<= 0.05)", worst)};
}

// 6b. 20-layer stack through the experiment runner; first layer with frac_G > frac_p.
Outcome polarity_crossover_part() {
  oracle::TempDir dir("accept-pol");
  SyntheticSpec spec;
  spec.d = 16;
  spec.n = 4000;
  spec.layers = 20;
  spec.noise = 10.0;
  spec.truth_sep = Schedule::linear(2.0, 14.0);
  spec.polarity_sep = Schedule::linear(14.0, 2.0);
  spec.task = "AFF";
  synthgen::emit(synthgen::gen_synthetic(spec), dir.path() / "act");
  spec.task = "NEG";
  spec.seed = 1;
  spec.polarity = synthgen::PolarityMode::kNegated;
  synthgen::emit(synthgen::gen_synthetic(spec), dir.path() / "act");

  int planted = -1;
  for (uint32_t l = 0; l < 20 && planted < 0; ++l)
    if (spec.truth_sep.at(l, 20) > spec.polarity_sep.at(l, 20)) planted = static_cast<int>(l);

  experiments::ExperimentPlan plan;
  plan.activations = dir.path() / "act";
  plan.out = dir.path() / "out";
  plan.affirmative_task = "AFF";
  plan.negated_task = "NEG";
  experiments::Workspace ws(plan);
  const auto r = experiments::polarity_sweep(ws);
  int found = -1;
  for (const auto& p : r.items)
    if (found < 0 && p.frac_general > p.frac_polarity) found = static_cast<int>(p.layer);
  return {found >= 0 && std::abs(found - planted) <= 1,
          fmt::format("crossover at layer {} vs planted {} (+/-1)", found, planted)};
}

Outcome polarity_decomposition() {
  const auto a = polarity_fractions_part();
  const auto b = polarity_crossover_part();
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

// 7. Hand example and argmax over a peaked schedule.
Outcome variance_ratio() {
  tensorio::ActivationBatch hand;
  hand.n = 4;
  hand.d = 1;
  hand.data = {1, 3, -1, -3};
  hand.example_ids = {0, 1, 2, 3};
  const std::vector<uint8_t> y = {1, 1, 0, 0};
  const double r_hand = metrics::variance_ratio({&hand, y, {}}).ratio;

  SyntheticSpec spec;
  spec.d = 32;
  spec.n = 1000;
  spec.layers = 12;
  spec.truth_sep = Schedule::values({0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 3.0, 2.5, 2.0, 1.5, 1.0});
  const uint32_t planted = 6;
  const auto st = synthgen::gen_synthetic(spec);
  uint32_t arg = 0;
  double best = -1;
  for (const auto& b : st.batches) {
    const double r = metrics::variance_ratio({&b, st.labels, {}}).ratio;
    if (r > best) {
      best = r;
      arg = b.layer;
    }
  }
  return {std::abs(r_hand - 4.0) <= 1e-9 && arg == planted,
          fmt::format("hand R = {:.12f} (4 +/- 1e-9); argmax layer {} vs planted {}", r_hand, arg, planted)};
}

// 8. Orthogonality and agreement with a dense eigensolver.
Outcome projection() {
  double worst_dot = 0.0, worst_cos = 1.0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.d = 16;
    spec.n = 1000;
    spec.truth_sep = Schedule::constant(4.0);
    spec.polarity_sep = Schedule::constant(3.0);
    spec.polarity = synthgen::PolarityMode::kMixed;
    spec.seed = seed;
    spec.direction_seed = seed;
    const auto st = synthgen::gen_synthetic(spec);
    const auto sp = split_of(st);
    const auto& b = st.batches[0];
    const auto m = fit(b, sp);
    const auto p = metrics::project_2d(b, m, sp.test);

    const int d = static_cast<int>(spec.d), n = static_cast<int>(sp.test.size());
    Eigen::VectorXd w(d), mu(d);
    for (int j = 0; j < d; ++j) {
      w[j] = m.w[j];
      mu[j] = m.mu[j];
    }
    w.normalize();
    Eigen::MatrixXd c(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) c(i, j) = b.data[sp.test[i] * b.d + j] - mu[j];
    const Eigen::MatrixXd r = c - (c * w) * w.transpose();
    const Eigen::MatrixXd rc = r.rowwise() - r.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rc.transpose() * rc / n);
    const Eigen::VectorXd top = es.eigenvectors().col(d - 1);
    const Eigen::Map<const Eigen::VectorXd> v(p.v_hat.data(), d);
    worst_dot = std::max(worst_dot, std::abs(v.dot(w)));
    worst_cos = std::min(worst_cos, std::abs(v.dot(top)) / v.norm());
  }
  return {worst_dot <= 1e-6 && worst_cos >= 0.999,
          fmt::format("max |v.w| {:.2e} (<= 1e-6); min cos to dense eigenvector {:.6f} (>= 0.999), 5 seeds",
                      worst_dot, worst_cos)};
}

// 9. Two full runs in separate directories, compared file by file.
Outcome determinism() {
  oracle::TempDir dir("accept-det");
  const auto& kb = taskgen::KnowledgeBase::bundled();
  auto pipeline = [&](const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "data");
    struct Cwd {
      std::filesystem::path prev = std::filesystem::current_path();
      ~Cwd() { std::filesystem::current_path(prev); }
    } restore;
    std::filesystem::current_path(root);
    for (const auto task : taskgen::all_tasks()) {
      auto ds = taskgen::generate(task, kb, taskgen::default_size(task), 7);
      taskgen::split_dataset(ds, 0.7, 7);
      taskgen::write_jsonl(ds, fmt::format("data/{}.no-prompt.jsonl", taskgen::task_name(task)));
    }
    for (const char* t : {"S0", "S1", "S2"}) {
      SyntheticSpec spec;
      spec.d = 16;
      spec.n = 400;
      spec.layers = 4;
      spec.task = t;
      spec.seed = 7 + t[1];
      spec.truth_sep = Schedule::parse("step:2:0.5:3");
      spec.polarity = t[1] == '1' ? synthgen::PolarityMode::kNegated : synthgen::PolarityMode::kAffirmative;
      synthgen::emit(synthgen::gen_synthetic(spec), "act");
    }
    const auto plan = experiments::ExperimentPlan::from_json(nlohmann::json::parse(R"({
      "tasks": ["S0", "S1", "S2"], "seed": 7, "activations": "act", "out": "out", "jobs": 2,
      "polarity": {"affirmative": "S0", "negated": "S1"},
      "operations": [{"op": "sweep"}, {"op": "xgen", "source": "S0"}, {"op": "matrix", "layer": 3},
                     {"op": "polarity"}, {"op": "project", "layer": 2}, {"op": "similarity", "task": "S2"}]})"));
    experiments::Workspace ws(plan);
    experiments::run_plan(ws);
  };
  pipeline(dir.path() / "a");
  pipeline(dir.path() / "b");
  size_t compared = 0, differing = 0, jsonl = 0, probes = 0, csv = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir.path() / "a");
    const auto other = dir.path() / "b" / rel;
    ++compared;
    if (!std::filesystem::exists(other) || oracle::read_file(e.path()) != oracle::read_file(other)) ++differing;
    const auto name = rel.filename().string();
    jsonl += name.ends_with(".jsonl");
    probes += name.ends_with(".probe.json");
    csv += name.ends_with(".csv");
  }
  size_t in_b = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path() / "b")) in_b += e.is_regular_file();
  return {differing == 0 && in_b == compared && jsonl > 0 && probes > 0 && csv > 0,
          fmt::format("{} files ({} JSONL, {} probes, {} CSV), {} differ", compared, jsonl, probes, csv, differing)};
}

// 10. Step-at-10 stack through the layer sweep.
Outcome layer_sweep_shape() {
  oracle::TempDir dir("accept-step");
  SyntheticSpec spec;
  spec.d = 64;
  spec.n = 2000;
  spec.layers = 20;
  spec.truth_sep = Schedule::parse("step:10:0:4");
  spec.task = "STEP";
  synthgen::emit(synthgen::gen_synthetic(spec), dir.path() / "act");
  experiments::ExperimentPlan plan;
  plan.tasks = {"STEP"};
  plan.activations = dir.path() / "act";
  plan.out = dir.path() / "out";
  experiments::Workspace ws(plan);
  const auto r = experiments::layer_sweep(ws);
  double max_before = 0.0, min_after = 1.0;
  for (const auto& p : r.items) {
    if (p.layer < 10)
      max_before = std::max(max_before, p.auroc);
    else
      min_after = std::min(min_after, p.auroc);
  }
  return {r.items.size() == 20 && max_before <= 0.6 && min_after >= 0.99,
          fmt::format("max AUROC below layer 10 {:.4f} (<= 0.6); min from layer 10 {:.4f} (>= 0.99)", max_before,
                      min_after)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dataset integrity", dataset_integrity},
      {"AUROC oracle equivalence", auroc_equivalence},
      {"probe recovery", probe_recovery},
      {"gradient check", gradient_check},
      {"negation inversion", negation_inversion},
      {"polarity decomposition", polarity_decomposition},
      {"variance ratio", variance_ratio},
      {"projection", projection},
      {"determinism", determinism},
      {"layer-sweep shape", layer_sweep_shape},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failed += !o.pass;
    fmt::print("[{}] {} {}: {} [{:.1f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail,
               seconds_since(t0));
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
