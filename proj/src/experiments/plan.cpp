// SPDX-License-Identifier: Apache-2.0
#include "experiments/plan.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"

namespace truthlens::experiments {
namespace {

const std::set<std::string> kOps = {"sweep", "xgen", "matrix", "transfer", "polarity", "project", "similarity"};

void check_keys(const nlohmann::json& j, const std::set<std::string>& known, std::string_view what) {
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail(ErrorCode::kInvalidArgument, fmt::format("unknown {} field '{}'", what, key));
}

}  // namespace

nlohmann::ordered_json Operation::to_json() const {
  nlohmann::ordered_json j;
  j["op"] = op;
  if (!source.empty()) j["source"] = source;
  if (!task.empty()) j["task"] = task;
  if (!prompt.empty()) j["prompt"] = prompt;
  if (!source_prompt.empty()) j["source_prompt"] = source_prompt;
  if (!target_prompt.empty()) j["target_prompt"] = target_prompt;
  if (layer) j["layer"] = *layer;
  return j;
}

Operation Operation::from_json(const nlohmann::json& j) {
  require(j.is_object(), "each operation must be a JSON object");
  check_keys(j, {"op", "source", "task", "prompt", "source_prompt", "target_prompt", "layer"}, "operation");
  Operation o;
  o.op = j.value("op", std::string());
  require(kOps.contains(o.op), fmt::format("unknown operation '{}'", o.op));
  o.source = j.value("source", std::string());
  o.task = j.value("task", std::string());
  o.prompt = j.value("prompt", std::string());
  o.source_prompt = j.value("source_prompt", std::string());
  o.target_prompt = j.value("target_prompt", std::string());
  if (j.contains("layer")) o.layer = j.at("layer").get<uint32_t>();
  if (o.op == "xgen") require(!o.source.empty(), "xgen operation needs 'source'");
  if (o.op == "matrix" || o.op == "project") require(o.layer.has_value(), fmt::format("{} operation needs 'layer'", o.op));
  if (o.op == "similarity") require(!o.task.empty(), "similarity operation needs 'task'");
  if (o.op == "transfer")
    require(!o.task.empty() && !o.source_prompt.empty() && !o.target_prompt.empty(),
            "transfer operation needs 'task', 'source_prompt' and 'target_prompt'");
  return o;
}

void ExperimentPlan::validate() const {
  require(jobs >= 1, "jobs must be at least 1");
  require(!prompts.empty(), "plan lists no prompts");
  hyper.validate();
  auto unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  auto check_name = [](const std::string& name, std::string_view what) {
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_' || c == '-';
    });
    require(ok, fmt::format("invalid {} name '{}': use letters, digits, '_' or '-'", what, name));
  };
  for (const auto& t : tasks) check_name(t, "task");
  for (const auto& p : prompts) check_name(p, "prompt");
  check_name(affirmative_task, "task");
  check_name(negated_task, "task");
  for (const auto& o : operations) {
    for (const auto* t : {&o.source, &o.task})
      if (!t->empty()) check_name(*t, "task");
    for (const auto* p : {&o.prompt, &o.source_prompt, &o.target_prompt})
      if (!p->empty()) check_name(*p, "prompt");
  }
  require(unique(tasks), "plan lists a task twice");
  require(unique(prompts), "plan lists a prompt twice");
  auto l = layers;
  std::sort(l.begin(), l.end());
  require(std::adjacent_find(l.begin(), l.end()) == l.end(), "plan lists a layer twice");
}

nlohmann::ordered_json ExperimentPlan::to_json() const {
  nlohmann::ordered_json j;
  j["tasks"] = tasks;
  j["prompts"] = prompts;
  if (layers.empty())
    j["layers"] = "all";
  else
    j["layers"] = layers;
  j["seed"] = seed;
  j["activations"] = activations.generic_string();
  j["out"] = out.generic_string();
  j["jobs"] = jobs;
  j["hyper"] = hyper.to_json();
  j["polarity"] = {{"affirmative", affirmative_task}, {"negated", negated_task}};
  j["operations"] = nlohmann::ordered_json::array();
  for (const auto& o : operations) j["operations"].push_back(o.to_json());
  return j;
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& j) {
  require(j.is_object(), "plan must be a JSON object");
  check_keys(j, {"tasks", "prompts", "layers", "seed", "activations", "out", "jobs", "hyper", "polarity", "operations"},
             "plan");
  ExperimentPlan p;
  try {
    if (j.contains("tasks")) p.tasks = j.at("tasks").get<std::vector<std::string>>();
    if (j.contains("prompts")) p.prompts = j.at("prompts").get<std::vector<std::string>>();
    if (j.contains("layers")) {
      const auto& l = j.at("layers");
      if (l.is_string()) {
        require(l.get<std::string>() == "all", "layers must be a list of indices or \"all\"");
      } else {
        p.layers = l.get<std::vector<uint32_t>>();
        require(!p.layers.empty(), "layers list is empty; use \"all\" for every layer");
      }
    }
    if (j.contains("seed")) p.seed = j.at("seed").get<uint64_t>();
    if (j.contains("activations")) p.activations = j.at("activations").get<std::string>();
    if (j.contains("out")) p.out = j.at("out").get<std::string>();
    if (j.contains("jobs")) p.jobs = j.at("jobs").get<unsigned>();
    if (j.contains("hyper")) p.hyper = probe::ProbeHyper::from_json(j.at("hyper"));
    if (j.contains("polarity")) {
      const auto& pol = j.at("polarity");
      check_keys(pol, {"affirmative", "negated"}, "polarity");
      p.affirmative_task = pol.value("affirmative", p.affirmative_task);
      p.negated_task = pol.value("negated", p.negated_task);
    }
    if (j.contains("operations"))
      for (const auto& o : j.at("operations")) p.operations.push_back(Operation::from_json(o));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, fmt::format("malformed plan: {}", e.what()));
  }
  p.validate();
  return p;
}

ExperimentPlan ExperimentPlan::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, fmt::format("cannot open plan '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, fmt::format("plan '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  auto plan = from_json(j);
  // Relative directories in a plan file are resolved against the file.
  const auto base = path.parent_path();
  if (plan.activations.is_relative()) plan.activations = base / plan.activations;
  if (plan.out.is_relative()) plan.out = base / plan.out;
  return plan;
}

}  // namespace truthlens::experiments
