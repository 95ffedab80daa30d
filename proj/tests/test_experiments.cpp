// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>

#include "common/error.hpp"
#include "experiments/plan.hpp"
#include "experiments/runner.hpp"
#include "metrics/metrics.hpp"
#include "synthgen/synthgen.hpp"
#include "oracles.hpp"

#include <fmt/format.h>

using namespace truthlens;
using namespace truthlens::experiments;
using synthgen::Schedule;
using synthgen::SyntheticSpec;

namespace {

SyntheticSpec small_spec(const std::string& task, uint32_t layers = 3) {
  SyntheticSpec s;
  s.d = 12;
  s.n = 200;
  s.layers = layers;
  s.task = task;
  s.truth_sep = Schedule::constant(1.0);
  return s;
}

ExperimentPlan plan_for(const oracle::TempDir& dir, std::vector<std::string> tasks) {
  ExperimentPlan p;
  p.tasks = std::move(tasks);
  p.activations = dir.path() / "act";
  p.out = dir.path() / "out";
  return p;
}

void emit(const oracle::TempDir& dir, const SyntheticSpec& s) {
  synthgen::emit(synthgen::gen_synthetic(s), dir.path() / "act");
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

std::string what_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

// Dense direct evaluation: train on train rows, AUROC on test rows.
double direct_auroc(const TaskView& train_on, const TaskView& eval_on, const ExperimentPlan& plan) {
  const auto m = probe::train_probe(probe::center(train_on.batch, train_on.train_rows), train_on.train_labels,
                                    plan.hyper, plan.seed);
  return oracle::auroc(probe::logits(m, eval_on.batch, eval_on.test_rows), eval_on.test_labels);
}

}  // namespace

TEST(Plan, JsonRoundTripAndErrors) {
  const auto j = nlohmann::json::parse(R"({
    "tasks": ["S0", "S1"], "prompts": ["no-prompt", "ask-tf"], "layers": [0, 2], "seed": 3,
    "jobs": 2, "hyper": {"lr": 0.01, "steps": 50, "weight_decay": 0.0},
    "polarity": {"affirmative": "S0", "negated": "S1"},
    "operations": [{"op": "sweep"}, {"op": "matrix", "layer": 2}, {"op": "xgen", "source": "S0"}]})");
  const auto p = ExperimentPlan::from_json(j);
  EXPECT_EQ(p.layers, (std::vector<uint32_t>{0, 2}));
  EXPECT_EQ(p.hyper.steps, 50u);
  EXPECT_EQ(p.negated_task, "S1");
  EXPECT_EQ(p.operations.size(), 3u);
  EXPECT_EQ(ExperimentPlan::from_json(p.to_json()).to_json(), p.to_json());
  EXPECT_TRUE(ExperimentPlan::from_json(nlohmann::json::parse(R"({"layers": "all"})")).all_layers());

  for (const char* bad : {R"({"taks": []})", R"({"layers": "some"})", R"({"jobs": 0})",
                          R"({"operations": [{"op": "matrix"}]})", R"({"operations": [{"op": "explode"}]})",
                          R"({"operations": [{"op": "xgen"}]})", R"({"prompts": ["../x"]})", R"({"tasks": ["a.b"]})",
                          R"({"operations": [{"op": "transfer", "task": "S0"}]})"})
    EXPECT_THROW(ExperimentPlan::from_json(nlohmann::json::parse(bad)).validate(), Error) << bad;
}

TEST(Plan, LoadResolvesRelativePaths) {
  oracle::TempDir dir("plan");
  std::filesystem::create_directories(dir.path() / "sub");
  std::ofstream(dir.path() / "sub" / "p.json") << R"({"activations": "acts", "out": "/abs/out"})";
  const auto p = ExperimentPlan::load(dir.path() / "sub" / "p.json");
  EXPECT_EQ(p.activations, dir.path() / "sub" / "acts");
  EXPECT_EQ(p.out, "/abs/out");
  EXPECT_THROW(ExperimentPlan::load(dir.path() / "missing.json"), Error);
}

TEST(Workspace, MissingFilesAreAllListed) {
  oracle::TempDir dir("ws");
  emit(dir, small_spec("S0"));
  Workspace ws(plan_for(dir, {"S0", "S8", "S9"}));
  const auto msg = what_of([&] { layer_sweep(ws); });
  EXPECT_NE(msg.find("S8.no-prompt.jsonl"), std::string::npos) << msg;
  EXPECT_NE(msg.find("S9.no-prompt.jsonl"), std::string::npos) << msg;
  EXPECT_EQ(code_of([&] { layer_sweep(ws); }), ErrorCode::kMissingInput);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out" / "tables"));
}

TEST(Workspace, MissingLayerFileAndOutOfRange) {
  oracle::TempDir dir("ws");
  emit(dir, small_spec("S0"));
  emit(dir, small_spec("S1"));
  std::filesystem::remove(dir.path() / "act" / tensorio::activation_file_name("S1", "no-prompt", 1));
  Workspace ws(plan_for(dir, {"S0", "S1"}));
  EXPECT_EQ(ws.resolve_layers({{"S0", "no-prompt"}, {"S1", "no-prompt"}}), (std::vector<uint32_t>{0, 2}));
  EXPECT_EQ(code_of([&] { full_matrix(ws, 1); }), ErrorCode::kMissingInput);
  EXPECT_EQ(code_of([&] { full_matrix(ws, 7); }), ErrorCode::kInvalidArgument);
  EXPECT_NO_THROW(full_matrix(ws, 2));
}

TEST(Workspace, UnknownIdIsMisaligned) {
  oracle::TempDir dir("ws");
  auto st = synthgen::gen_synthetic(small_spec("S0", 1));
  st.batches[0].example_ids[5] = 9999;
  synthgen::emit(st, dir.path() / "act");
  Workspace ws(plan_for(dir, {"S0"}));
  EXPECT_EQ(code_of([&] { ws.load("S0", "no-prompt", 0); }), ErrorCode::kMisaligned);
}

TEST(Workspace, LoadJoinsManifestSplits) {
  oracle::TempDir dir("ws");
  const auto spec = small_spec("S0", 1);
  const auto st = synthgen::gen_synthetic(spec);
  synthgen::emit(st, dir.path() / "act");
  Workspace ws(plan_for(dir, {"S0"}));
  const auto v = ws.load("S0", "no-prompt", 0);
  EXPECT_EQ(v.train_rows.size() + v.test_rows.size(), 200u);
  for (size_t k = 0; k < v.test_rows.size(); ++k) {
    const size_t r = v.test_rows[k];
    EXPECT_EQ(st.statements[r].split, taskgen::Split::kTest);
    EXPECT_EQ(v.test_labels[k], st.labels[r]);
  }
}

TEST(Operations, SweepMatchesDirectEvaluation) {
  oracle::TempDir dir("ops");
  auto s = small_spec("S0", 4);
  s.truth_sep = Schedule::values({0.0, 0.3, 0.6, 1.0});
  emit(dir, s);
  Workspace ws(plan_for(dir, {"S0"}));
  const auto r = layer_sweep(ws);
  ASSERT_EQ(r.items.size(), 4u);
  for (const auto& p : r.items) {
    const auto v = ws.load("S0", "no-prompt", p.layer);
    EXPECT_EQ(p.auroc, direct_auroc(v, v, ws.plan()));
  }
  const auto csv = oracle::read_file(dir.path() / "out" / "tables" / "layer_sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "task,prompt,layer,auroc");
  EXPECT_NE(csv.find(fmt::format("S0,no-prompt,3,{:.8f}\n", r.items[3].auroc)), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "plots" / "layer_sweep.no-prompt.svg"));
}

TEST(Operations, MatrixDiagonalEqualsSweep) {
  oracle::TempDir dir("ops");
  for (const char* t : {"S0", "S1", "S2"}) {
    auto s = small_spec(t, 2);
    s.seed = t[1];
    emit(dir, s);
  }
  Workspace ws(plan_for(dir, {"S0", "S1", "S2"}));
  const auto sweep = layer_sweep(ws);
  const auto m = full_matrix(ws, 1).items.at(0);
  for (size_t i = 0; i < 3; ++i)
    for (const auto& p : sweep.items)
      if (p.layer == 1 && p.task == m.row_labels[i]) EXPECT_EQ(m.at(i, i), p.auroc);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "tables" / "matrix.no-prompt.layer01.csv"));
}

TEST(Operations, BlockStructuredMatrix) {
  oracle::TempDir dir("ops");
  for (const auto& [t, dseed] : {std::pair{"S0", 1}, {"S1", 1}, {"S2", 2}, {"S3", 2}}) {
    auto s = small_spec(t, 1);
    s.d = 32;
    s.n = 400;
    s.truth_sep = Schedule::constant(3.0);
    s.truth_dir.assign(32, 0.0);
    s.polarity_dir.assign(32, 0.0);
    s.truth_dir[dseed] = 1.0;
    s.polarity_dir[dseed + 2] = 1.0;
    s.seed = t[1];
    emit(dir, s);
  }
  Workspace ws(plan_for(dir, {"S0", "S1", "S2", "S3"}));
  const auto m = full_matrix(ws, 0).items.at(0);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 4; ++j) {
      if (i / 2 == j / 2)
        EXPECT_GE(m.at(i, j), 0.95) << i << "," << j;
      else
        EXPECT_NEAR(m.at(i, j), 0.5, 0.2) << i << "," << j;
    }
  // Each entry is the row probe scored on the column's test split.
  const auto v0 = ws.load("S0", "no-prompt", 0), v2 = ws.load("S2", "no-prompt", 0);
  EXPECT_EQ(m.at(0, 2), direct_auroc(v0, v2, ws.plan()));
}

TEST(Operations, AntiAlignedGeneralizationNearZero) {
  oracle::TempDir dir("ops");
  auto s = small_spec("S0", 2);
  s.truth_sep = Schedule::constant(3.0);
  emit(dir, s);
  s.task = "S1";
  s.truth_sign = -1;
  s.seed = 5;
  emit(dir, s);
  Workspace ws(plan_for(dir, {"S1"}));
  const auto r = generalization_sweep(ws, "S0");
  size_t seen = 0;
  for (const auto& p : r.items) {
    if (p.target == "S1") {
      EXPECT_LE(p.auroc, 0.05);
      ++seen;
    }
    if (p.target == "S0") EXPECT_GE(p.auroc, 0.95);
  }
  EXPECT_EQ(seen, 2u);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "tables" / "generalization.S0.no-prompt.csv"));
}

TEST(Operations, PromptTransfer) {
  oracle::TempDir dir("ops");
  auto s = small_spec("S0", 2);
  s.d = 32;
  s.n = 400;
  s.truth_sep = Schedule::constant(1.5);
  s.prompt = "no-prompt";
  emit(dir, s);
  s.prompt = "ask-tf";  // same statements and geometry
  emit(dir, s);
  s.prompt = "is-true";
  s.angle = Schedule::constant(1.2);
  emit(dir, s);
  auto plan = plan_for(dir, {"S0"});
  plan.prompts = {"no-prompt", "ask-tf", "is-true"};
  Workspace ws(plan);

  const auto sweep = layer_sweep(ws);
  const auto same = prompt_transfer(ws, "S0", "no-prompt", "ask-tf");
  const auto self = prompt_transfer(ws, "S0", "no-prompt", "no-prompt");
  const auto rotated = prompt_transfer(ws, "S0", "no-prompt", "is-true");
  for (size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(same.items[k].transfer, same.items[k].own, 0.02);
    EXPECT_EQ(self.items[k].transfer, self.items[k].own);
    EXPECT_EQ(self.items[k].own, sweep.items[k].auroc);
    EXPECT_LT(rotated.items[k].transfer, rotated.items[k].own);
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "tables" / "transfer.S0.no-prompt.is-true.csv"));
}

TEST(Operations, TransferRejectsMisalignedSplits) {
  oracle::TempDir dir("ops");
  auto s = small_spec("S0", 1);
  emit(dir, s);
  s.prompt = "ask-tf";
  s.seed = 77;
  emit(dir, s);
  auto plan = plan_for(dir, {"S0"});
  plan.prompts = {"no-prompt", "ask-tf"};
  Workspace ws(plan);
  EXPECT_EQ(code_of([&] { prompt_transfer(ws, "S0", "no-prompt", "ask-tf"); }), ErrorCode::kMisaligned);
}

TEST(Operations, PolaritySweepFractions) {
  oracle::TempDir dir("ops");
  auto s = small_spec("A", 2);
  s.d = 16;
  s.n = 4000;
  s.noise = 10.0;
  s.truth_sep = Schedule::values({4.0, 12.0});
  s.polarity_sep = Schedule::values({12.0, 4.0});
  emit(dir, s);
  s.task = "N";
  s.seed = 1;
  s.polarity = synthgen::PolarityMode::kNegated;
  emit(dir, s);
  auto plan = plan_for(dir, {});
  plan.affirmative_task = "A";
  plan.negated_task = "N";
  Workspace ws(plan);
  const auto r = polarity_sweep(ws);
  ASSERT_EQ(r.items.size(), 2u);
  for (const auto& p : r.items) {
    const double a = s.truth_sep.at(p.layer, 2), b = s.polarity_sep.at(p.layer, 2);
    EXPECT_NEAR(p.frac_general, a * a / (a * a + b * b), 0.05);
    EXPECT_NEAR(p.frac_polarity, (a * a * a * a + b * b * b * b) / ((a * a + b * b) * (a * a + b * b)), 0.05);
  }
  EXPECT_LT(r.items[0].frac_general, r.items[0].frac_polarity);
  EXPECT_GT(r.items[1].frac_general, r.items[1].frac_polarity);
  const auto csv = oracle::read_file(dir.path() / "out" / "tables" / "polarity.no-prompt.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,frac_G,frac_p");
}

TEST(Operations, ProjectionCsvUsesTestRows) {
  oracle::TempDir dir("ops");
  auto s = small_spec("S0", 1);
  s.polarity = synthgen::PolarityMode::kMixed;
  s.polarity_sep = Schedule::constant(2.0);
  emit(dir, s);
  Workspace ws(plan_for(dir, {"S0"}));
  const auto r = projection_report(ws, 0);
  const auto& set = r.items.at(0);
  const auto v = ws.load("S0", "no-prompt", 0);
  EXPECT_EQ(set.ids.size(), v.test_rows.size());
  const auto model = ws.probe_for(v);
  const auto z = probe::logits(model, v.batch, v.test_rows);
  double wn = 0;
  for (float x : model.w) wn += double(x) * x;
  for (size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(set.projection.x[k], z[k] / std::sqrt(wn), 1e-9);
  const auto csv = oracle::read_file(dir.path() / "out" / "tables" / "projection.S0.no-prompt.layer00.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,x,y,label");
  EXPECT_NE(csv.find(fmt::format("\n{},{:.8f},{:.8f},{}\n", set.ids[1], set.projection.x[1], set.projection.y[1],
                                 int(set.labels[1]))),
            std::string::npos);
}

TEST(Operations, ProbeCacheIsReused) {
  oracle::TempDir dir("ops");
  emit(dir, small_spec("S0", 1));
  Workspace ws(plan_for(dir, {"S0"}));
  const double first = layer_sweep(ws).items[0].auroc;
  const auto path = ws.probe_path("S0", "no-prompt", 0);
  ASSERT_TRUE(std::filesystem::exists(path));
  auto m = probe::load_probe(path);
  for (auto& x : m.w) x = -x;
  probe::save_probe(m, path);
  EXPECT_NEAR(layer_sweep(ws).items[0].auroc, 1.0 - first, 1e-12);

  // Different training data invalidates the cache entry.
  auto s = small_spec("S0", 1);
  s.seed = 3;
  emit(dir, s);
  Workspace fresh(plan_for(dir, {"S0"}));
  const auto v = fresh.load("S0", "no-prompt", 0);
  EXPECT_EQ(fresh.probe_for(v).fingerprint, training_fingerprint(v));
  EXPECT_EQ(layer_sweep(fresh).items[0].auroc, direct_auroc(v, v, fresh.plan()));
}

TEST(Operations, SimilarityHeatmap) {
  oracle::TempDir dir("ops");
  emit(dir, small_spec("S0", 3));
  Workspace ws(plan_for(dir, {"S0"}));
  const auto m = probe_similarity(ws, "S0", "no-prompt").items.at(0);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.row_labels, (std::vector<std::string>{"0", "1", "2"}));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "tables" / "similarity.S0.no-prompt.csv"));
}

TEST(Report, IndexMergesAndRunsAreByteIdentical) {
  oracle::TempDir dir("rep");
  for (const char* t : {"S0", "S1"}) {
    auto s = small_spec(t, 2);
    s.seed = t[1];
    emit(dir, s);
  }
  auto plan = plan_for(dir, {"S0", "S1"});
  plan.operations = {Operation::from_json({{"op", "sweep"}}), Operation::from_json({{"op", "matrix"}, {"layer", 1}}),
                     Operation::from_json({{"op", "xgen"}, {"source", "S0"}}),
                     Operation::from_json({{"op", "project"}, {"layer", 0}})};
  auto run = [&](const std::filesystem::path& out, unsigned jobs) {
    auto p = plan;
    p.out = out;
    p.jobs = jobs;
    Workspace ws(p);
    return run_plan(ws);
  };
  const auto arts = run(dir.path() / "a", 1);
  run(dir.path() / "b", 3);
  EXPECT_EQ(arts.size(), 4u);
  size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir.path() / "a");
    if (rel == "index.json") continue;  // embeds the out path
    EXPECT_EQ(oracle::read_file(e.path()), oracle::read_file(dir.path() / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 10u);

  const auto index = nlohmann::json::parse(oracle::read_file(dir.path() / "a" / "index.json"));
  EXPECT_EQ(index["format"], "truthlens.report");
  EXPECT_EQ(index["entries"].size(), 4u);

  // A single operation merged into the index keeps the others.
  plan.out = dir.path() / "a";
  Workspace ws(plan);
  emit_report(ws, {probe_similarity(ws, "S1", "no-prompt").artifact}, true);
  const auto merged = nlohmann::json::parse(oracle::read_file(dir.path() / "a" / "index.json"));
  EXPECT_EQ(merged["entries"].size(), 5u);
  emit_report(ws, {layer_sweep(ws).artifact}, true);
  EXPECT_EQ(nlohmann::json::parse(oracle::read_file(dir.path() / "a" / "index.json"))["entries"].size(), 5u);

  // An empty plan writes an index with no entries.
  auto empty = plan_for(dir, {});
  empty.out = dir.path() / "c";
  Workspace wc(empty);
  EXPECT_TRUE(run_plan(wc).empty());
  EXPECT_EQ(nlohmann::json::parse(oracle::read_file(dir.path() / "c" / "index.json"))["entries"].size(), 0u);
}

TEST(Parallel, LowestFailingIndexWins) {
  std::vector<int> hit(20, 0);
  EXPECT_NO_THROW(parallel_for(20, 4, [&](size_t i) { hit[i] = 1; }));
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 20);
  const auto msg = what_of([] {
    parallel_for(10, 3, [](size_t i) {
      if (i == 4 || i == 7) throw std::runtime_error("boom " + std::to_string(i));
    });
  });
  EXPECT_EQ(msg, "boom 4");
}
