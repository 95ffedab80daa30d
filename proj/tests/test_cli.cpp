// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <sstream>

#include <fmt/format.h>

#include "metrics/metrics.hpp"
#include "probe/probe.hpp"
#include "synthgen/synthgen.hpp"
#include "taskgen/dataset_io.hpp"
#include "tensorio/activation_file.hpp"
#include "oracles.hpp"

using namespace truthlens;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::filesystem::path& cwd, const std::string& args, const std::string& env = "") {
  const std::string cmd =
      fmt::format("cd '{}' && env -u TRUTHLENS_OUT {} '{}' {} 2>&1", cwd.string(), env, TRUTHLENS_CLI, args);
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  size_t k;
  while ((k = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, k);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(oracle::read_file(path));
  std::string line;
  while (std::getline(in, line)) rows.push_back(oracle::split_on(line, ","));
  return rows;
}

}  // namespace

TEST(Cli, GenArithmeticExample) {
  oracle::TempDir dir("cli");
  const auto r = run(dir.path(), "gen --task A1 --n 1000 --seed 0 --out data");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("500 true, 500 false"), std::string::npos) << r.output;
  const auto ds = taskgen::read_jsonl(dir.path() / "data" / "A1.no-prompt.jsonl");
  ASSERT_EQ(ds.size(), 1000u);
  size_t trues = 0;
  for (const auto& s : ds) {
    const auto parts = oracle::arith_parts(s.text);
    EXPECT_EQ(parts.value == parts.stated, s.label) << s.text;
    trues += s.label;
  }
  EXPECT_EQ(trues, 500u);
}

TEST(Cli, GenIsDeterministicAndPromptsApply) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run(dir.path(), "gen --task F0,F2 --prompt ask-tf --seed 4 --out a").code, 0);
  ASSERT_EQ(run(dir.path(), "gen --task F0,F2 --prompt ask-tf --seed 4 --out b").code, 0);
  for (const char* f : {"F0.ask-tf.jsonl", "F2.ask-tf.jsonl"})
    EXPECT_EQ(oracle::read_file(dir.path() / "a" / f), oracle::read_file(dir.path() / "b" / f));
  const auto ds = taskgen::read_jsonl(dir.path() / "a" / "F0.ask-tf.jsonl");
  EXPECT_EQ(ds[0].text.rfind("Is the following statement TRUE or FALSE?\n", 0), 0u);
}

TEST(Cli, ExitCodes) {
  oracle::TempDir dir("cli");
  EXPECT_EQ(run(dir.path(), "gen --task F9").code, 1);
  EXPECT_EQ(run(dir.path(), "gen --task A1 --n 7").code, 1);
  EXPECT_EQ(run(dir.path(), "frobnicate").code, 1);
  EXPECT_EQ(run(dir.path(), "--jobs 0 sweep --task S0").code, 1);
  const auto missing = run(dir.path(), "sweep --task S0 --activations nowhere");
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.output.find("S0.no-prompt.jsonl"), std::string::npos) << missing.output;
  // A corrupt activation file is a data error, not a usage error.
  ASSERT_EQ(run(dir.path(), "synth --task S0 --d 4 --n 20 --layers 1 --activations act").code, 0);
  std::ofstream(dir.path() / "act" / tensorio::activation_file_name("S0", "no-prompt", 0)) << "garbage";
  EXPECT_EQ(run(dir.path(), "sweep --task S0 --activations act").code, 2);
}

TEST(Cli, HelpListsFlags) {
  oracle::TempDir dir("cli");
  const auto top = run(dir.path(), "--help");
  EXPECT_EQ(top.code, 0);
  for (const char* f : {"--seed", "--out", "--activations", "--jobs", "--plan", "0-based", "gen", "matrix", "report"})
    EXPECT_NE(top.output.find(f), std::string::npos) << f;
  const auto synth = run(dir.path(), "synth --help");
  for (const char* f : {"--truth-sep", "--polarity-sep", "--angle", "--noise", "--layers", "--spec"})
    EXPECT_NE(synth.output.find(f), std::string::npos) << f;
}

TEST(Cli, OutEnvironmentOverride) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run(dir.path(), "gen --task A2 --n 10 --out flag", "TRUTHLENS_OUT=fromenv").code, 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "fromenv" / "A2.no-prompt.jsonl"));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "flag"));
}

TEST(Cli, MatrixMatchesMetricsOracle) {
  oracle::TempDir dir("cli");
  for (const char* t : {"S0", "S1", "S2"}) {
    const auto r = run(dir.path(), fmt::format("synth --task {} --d 8 --n 200 --layers 2 --truth-sep 2 --seed {} "
                                               "--activations act",
                                               t, t[1] - '0'));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  const auto r = run(dir.path(), "matrix --task S0,S1,S2 --layer 1 --activations act --out out");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto rows = read_csv(dir.path() / "out" / "tables" / "matrix.no-prompt.layer01.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"train_task/eval_task", "S0", "S1", "S2"}));

  // Independent recomputation from the files on disk.
  std::vector<tensorio::ActivationBatch> batches;
  std::vector<taskgen::Dataset> manifests;
  for (const char* t : {"S0", "S1", "S2"}) {
    batches.push_back(tensorio::read_activations(dir.path() / "act" / tensorio::activation_file_name(t, "no-prompt", 1)));
    manifests.push_back(taskgen::read_jsonl(dir.path() / "act" / fmt::format("{}.no-prompt.jsonl", t)));
  }
  auto rows_of = [&](size_t k, taskgen::Split split, std::vector<size_t>& idx, std::vector<uint8_t>& y) {
    for (size_t i = 0; i < batches[k].n; ++i) {
      const auto& s = manifests[k][static_cast<size_t>(batches[k].example_ids[i])];
      if (s.split != split) continue;
      idx.push_back(i);
      y.push_back(s.label);
    }
  };
  for (size_t i = 0; i < 3; ++i) {
    std::vector<size_t> tr;
    std::vector<uint8_t> ty;
    rows_of(i, taskgen::Split::kTrain, tr, ty);
    const auto m = probe::train_probe(probe::center(batches[i], tr), ty, {}, 0);
    for (size_t j = 0; j < 3; ++j) {
      std::vector<size_t> te;
      std::vector<uint8_t> ey;
      rows_of(j, taskgen::Split::kTest, te, ey);
      EXPECT_EQ(rows[i + 1][j + 1], fmt::format("{:.8f}", oracle::auroc(probe::logits(m, batches[j], te), ey)));
    }
  }
}

TEST(Cli, TrainWritesProbe) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run(dir.path(), "synth --task S0 --d 6 --n 100 --layers 3 --activations act").code, 0);
  const auto r = run(dir.path(), "train --task S0 --layer 2 --activations act --out out");
  ASSERT_EQ(r.code, 0) << r.output;
  size_t probes = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "out" / "probes")) {
    EXPECT_NE(e.path().filename().string().find("S0.no-prompt.layer02."), std::string::npos);
    const auto m = probe::load_probe(e.path());
    EXPECT_EQ(m.dim(), 6u);
    EXPECT_EQ(m.layer, 2u);
    EXPECT_NE(r.output.find(e.path().filename().string()), std::string::npos) << r.output;
    ++probes;
  }
  EXPECT_EQ(probes, 1u);
  EXPECT_EQ(run(dir.path(), "train --task S0 --layer 3 --activations act --out out").code, 1);
}

TEST(Cli, ReportRunsPlan) {
  oracle::TempDir dir("cli");
  ASSERT_EQ(run(dir.path(), "synth --task S0 --d 6 --n 100 --layers 2 --activations act").code, 0);
  std::ofstream(dir.path() / "plan.json")
      << R"({"tasks": ["S0"], "activations": "act", "out": "rep", "operations": [{"op": "sweep"}]})";
  const auto r = run(dir.path(), "--plan plan.json report");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "rep" / "index.json"));
  EXPECT_EQ(run(dir.path(), "report").code, 1);
}
