// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "truthlens/truthlens.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(tl_status s) {
  switch (s) {
    case TL_ERR_INVALID_ARGUMENT:
    case TL_ERR_MISSING_INPUT: return kExitValidation;
    default: return kExitRuntime;
  }
}

void check(tl_status s) {
  if (s != TL_OK) throw Failure{exit_code_for(s), std::string(tl_status_name(s)) + ": " + tl_last_error()};
}

void validation(const std::string& message) { throw Failure{kExitValidation, message}; }

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

struct Globals {
  uint64_t seed = 0;
  std::string out = "out";
  std::string activations = "activations";
  std::string kb;
  unsigned jobs = 1;
  std::string plan;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* act_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  std::string out_dir() const {
    if (const char* env = std::getenv("TRUTHLENS_OUT"); env != nullptr && *env != '\0') return env;
    return out;
  }
};

struct PlanFlags {
  std::vector<std::string> tasks;
  std::vector<std::string> prompts;
  std::string layers;
};

using PlanHandle = Handle<tl_plan, tl_plan_free>;

void make_plan(const Globals& g, const PlanFlags& f, PlanHandle& plan) {
  if (!g.plan.empty())
    check(tl_plan_load(g.plan.c_str(), &plan.p));
  else
    check(tl_plan_from_json("{}", &plan.p));
  const bool env_out = std::getenv("TRUTHLENS_OUT") != nullptr && *std::getenv("TRUTHLENS_OUT") != '\0';
  const bool plan_file = !g.plan.empty();
  const std::string out = g.out_dir();
  check(tl_plan_set_paths(plan.p, (!plan_file || *g.act_opt) ? g.activations.c_str() : nullptr,
                          (!plan_file || *g.out_opt || env_out) ? out.c_str() : nullptr));
  if (!plan_file || *g.seed_opt) check(tl_plan_set_seed(plan.p, g.seed));
  if (!plan_file || *g.jobs_opt) check(tl_plan_set_jobs(plan.p, g.jobs));
  const std::string tasks = join(f.tasks), prompts = join(f.prompts);
  check(tl_plan_set_lists(plan.p, f.tasks.empty() ? nullptr : tasks.c_str(),
                          f.prompts.empty() ? nullptr : prompts.c_str(), f.layers.empty() ? nullptr : f.layers.c_str()));
}

void add_plan_flags(CLI::App* cmd, PlanFlags& f, bool with_layers) {
  cmd->add_option("--task", f.tasks, "Task ids (repeat or comma-separate); default: the plan's tasks")->delimiter(',');
  cmd->add_option("--prompt", f.prompts, "Prompt template ids; default: the plan's prompts or no-prompt")
      ->delimiter(',');
  if (with_layers)
    cmd->add_option("--layers", f.layers,
                    "Comma-separated 0-based post-block layer indices, or \"all\" (every layer on disk)");
}

void print_done(const char* what, const std::string& out) { std::printf("%s: wrote outputs under %s\n", what, out.c_str()); }

std::string plan_out(const PlanHandle& plan) {
  char* json = tl_plan_to_json(plan.p);
  const auto j = nlohmann::json::parse(json);
  tl_string_free(json);
  return j.at("out").get<std::string>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "truthlens: datasets, linear truth probes and layer analyses over residual-stream activations.\n"
      "Layer indices are 0-based post-block residual positions: layer 0 is the output of the first\n"
      "transformer block (the embedding layer is not counted), matching the extractor's numbering."};
  app.require_subcommand(1);
  app.set_version_flag("--version", tl_version());

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for generation, splits and probe cache keys")->capture_default_str();
  g.out_opt = app.add_option("--out", g.out, "Output directory (TRUTHLENS_OUT overrides)")->capture_default_str();
  g.act_opt = app.add_option("--activations", g.activations, "Activation root holding *.actv files and manifests")
                  ->capture_default_str();
  app.add_option("--kb", g.kb, "City/country CSV (default: bundled table)")->check(CLI::ExistingFile);
  g.jobs_opt = app.add_option("--jobs", g.jobs, "Parallel probe jobs")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--plan", g.plan, "Experiment plan JSON")->check(CLI::ExistingFile);
  app.fallthrough();

  const auto task_names = split_csv(tl_task_names());
  const auto prompt_names = split_csv(tl_prompt_names());

  // gen
  auto* gen = app.add_subcommand("gen", "Generate labeled statement datasets as JSONL manifests");
  std::vector<std::string> gen_tasks;
  std::vector<std::string> gen_prompts{"no-prompt"};
  size_t gen_n = 0;
  double gen_train_fraction = 0.7;
  gen->add_option("--task", gen_tasks, "Task ids, or \"all\"")
      ->required()
      ->delimiter(',')
      ->check(CLI::IsMember([&] {
        auto v = task_names;
        v.push_back("all");
        return v;
      }()));
  gen->add_option("--n", gen_n, "Statements per task (even); 0 uses the task's default size")->capture_default_str();
  gen->add_option("--prompt", gen_prompts, "Prompt templates applied to the statements")
      ->delimiter(',')
      ->check(CLI::IsMember(prompt_names))
      ->capture_default_str();
  gen->add_option("--train-fraction", gen_train_fraction, "Stratified train split fraction")
      ->check(CLI::Range(0.0, 1.0).description("in (0, 1)"))
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic planted-direction activation stack into --activations");
  std::string synth_spec;
  nlohmann::ordered_json synth_flags = nlohmann::ordered_json::object();
  struct SynthField {
    std::string flag, key, help;
    bool numeric_int;
    bool is_double;
  };
  const std::vector<SynthField> synth_fields = {
      {"--d", "d", "Activation width", true, false},
      {"--n", "n", "Examples (even)", true, false},
      {"--layers", "layers", "Number of layers", true, false},
      {"--truth-sep", "truth_sep", "s_G schedule: value, list a,b,..., step:L:before:after or linear:a:b", false, false},
      {"--polarity-sep", "polarity_sep", "s_p schedule (same forms as --truth-sep)", false, false},
      {"--angle", "angle", "Rotation angle schedule in radians (same forms)", false, false},
      {"--noise", "noise", "Isotropic noise scale sigma_n", false, true},
      {"--direction-seed", "direction_seed", "Seed for the planted directions", true, false},
      {"--truth-sign", "truth_sign", "+1, or -1 to plant the task anti-aligned", true, false},
      {"--polarity", "polarity", "affirmative, negated or mixed", false, false},
      {"--task", "task", "Task name used in file names", false, false},
      {"--prompt", "prompt", "Prompt name used in file names", false, false},
      {"--model", "model", "Model name recorded in sidecars", false, false},
      {"--train-fraction", "train_fraction", "Stratified train split fraction", false, true},
  };
  std::vector<std::string> synth_values(synth_fields.size());
  synth->add_option("--spec", synth_spec, "Synthetic spec JSON file; flags override its fields")->check(CLI::ExistingFile);
  for (size_t i = 0; i < synth_fields.size(); ++i)
    synth->add_option(synth_fields[i].flag, synth_values[i], synth_fields[i].help);

  // train
  auto* train = app.add_subcommand("train", "Train (or reuse from cache) one probe");
  std::string train_task, train_prompt = "no-prompt";
  uint32_t train_layer = 0;
  train->add_option("--task", train_task, "Task id")->required();
  train->add_option("--prompt", train_prompt, "Prompt template id")->capture_default_str();
  train->add_option("--layer", train_layer, "0-based post-block layer index")->required();

  PlanFlags sweep_flags, xgen_flags, matrix_flags, transfer_flags, polarity_flags, project_flags;

  auto* sweep = app.add_subcommand("sweep", "In-domain test AUROC per task, prompt and layer");
  add_plan_flags(sweep, sweep_flags, true);

  auto* xgen = app.add_subcommand("xgen", "Probe trained on a source task evaluated on every task, per layer");
  std::string xgen_source;
  xgen->add_option("--source", xgen_source, "Source task id")->required();
  add_plan_flags(xgen, xgen_flags, true);

  auto* matrix = app.add_subcommand("matrix", "Cross-task AUROC matrix at one layer, per prompt");
  uint32_t matrix_layer = 0;
  matrix->add_option("--layer", matrix_layer, "0-based post-block layer index")->required();
  add_plan_flags(matrix, matrix_flags, false);

  auto* transfer = app.add_subcommand("transfer", "Probe trained under one prompt evaluated under another");
  std::string transfer_task, source_prompt, target_prompt;
  transfer->add_option("--task", transfer_task, "Task id")->required();
  transfer->add_option("--source-prompt", source_prompt, "Prompt the probe is trained under")->required();
  transfer->add_option("--target-prompt", target_prompt, "Prompt the probe is evaluated under")->required();
  transfer->add_option("--layers", transfer_flags.layers, "Comma-separated layer indices, or \"all\"");

  auto* polarity = app.add_subcommand("polarity", "Variance explained by t_G and t_p across layers");
  std::string affirmative, negated;
  polarity->add_option("--affirmative", affirmative, "Affirmative task (default F0)");
  polarity->add_option("--negated", negated, "Negated task (default F1)");
  polarity->add_option("--prompt", polarity_flags.prompts, "Prompt template ids")->delimiter(',');
  polarity->add_option("--layers", polarity_flags.layers, "Comma-separated layer indices, or \"all\"");

  auto* project = app.add_subcommand("project", "2-D projections onto the probe and top residual direction");
  uint32_t project_layer = 0;
  project->add_option("--layer", project_layer, "0-based post-block layer index")->required();
  add_plan_flags(project, project_flags, false);

  auto* similarity = app.add_subcommand("similarity", "Cosine between one task's probes at every pair of layers");
  std::string sim_task, sim_prompt = "no-prompt";
  PlanFlags sim_flags;
  similarity->add_option("--task", sim_task, "Task id")->required();
  similarity->add_option("--prompt", sim_prompt, "Prompt template id")->capture_default_str();
  similarity->add_option("--layers", sim_flags.layers, "Comma-separated layer indices, or \"all\"");

  auto* report = app.add_subcommand("report", "Run every operation listed in --plan and write index.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      Handle<tl_kb, tl_kb_free> kb;
      check(tl_kb_load(g.kb.empty() ? nullptr : g.kb.c_str(), &kb.p));
      std::vector<std::string> tasks;
      for (const auto& t : gen_tasks)
        if (t == "all")
          tasks.insert(tasks.end(), task_names.begin(), task_names.end());
        else
          tasks.push_back(t);
      if (gen_n % 2 != 0) validation("--n must be even");
      const std::filesystem::path out = g.out_dir();
      std::filesystem::create_directories(out);
      for (const auto& task : tasks) {
        Handle<tl_dataset, tl_dataset_free> ds;
        check(tl_dataset_generate(kb.p, task.c_str(), gen_n, g.seed, &ds.p));
        check(tl_dataset_split(ds.p, gen_train_fraction, g.seed));
        for (const auto& prompt : gen_prompts) {
          check(tl_dataset_apply_prompt(ds.p, prompt.c_str()));
          const auto path = out / (task + "." + prompt + ".jsonl");
          check(tl_dataset_write_jsonl(ds.p, path.string().c_str()));
          size_t pos = 0;
          for (size_t i = 0; i < tl_dataset_size(ds.p); ++i) pos += tl_dataset_label(ds.p, i) == 1;
          std::printf("%s: %zu statements (%zu true, %zu false)\n", path.string().c_str(), tl_dataset_size(ds.p), pos,
                      tl_dataset_size(ds.p) - pos);
        }
      }
    } else if (synth->parsed()) {
      nlohmann::ordered_json spec = nlohmann::ordered_json::object();
      if (!synth_spec.empty()) {
        std::ifstream in(synth_spec);
        try {
          spec = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          validation(std::string("--spec is not valid JSON: ") + e.what());
        }
      }
      if (*g.seed_opt || !spec.contains("seed")) spec["seed"] = g.seed;
      for (size_t i = 0; i < synth_fields.size(); ++i) {
        const auto& f = synth_fields[i];
        const auto* opt = synth->get_option(f.flag);
        if (!*opt) continue;
        const std::string& v = synth_values[i];
        try {
          if (f.numeric_int) {
            size_t used = 0;
            const long long x = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            if (x < 0 && f.key != "truth_sign") throw std::invalid_argument(v);
            if (f.key == "truth_sign")
              spec[f.key] = x;
            else
              spec[f.key] = static_cast<unsigned long long>(x);
          } else if (f.is_double) {
            size_t used = 0;
            const double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            spec[f.key] = x;
          } else {
            spec[f.key] = v;
          }
        } catch (const std::exception&) {
          validation(f.flag + ": invalid value '" + v + "'");
        }
      }
      size_t files = 0;
      check(tl_synth_emit(spec.dump().c_str(), g.activations.c_str(), &files));
      std::printf("synth: wrote %zu files under %s\n", files, g.activations.c_str());
    } else if (train->parsed()) {
      PlanHandle plan;
      make_plan(g, {}, plan);
      char path[4096];
      check(tl_run_train(plan.p, train_task.c_str(), train_prompt.c_str(), train_layer, path, sizeof path));
      std::printf("%s\n", path);
    } else if (sweep->parsed()) {
      PlanHandle plan;
      make_plan(g, sweep_flags, plan);
      check(tl_run_sweep(plan.p));
      print_done("sweep", plan_out(plan));
    } else if (xgen->parsed()) {
      PlanHandle plan;
      make_plan(g, xgen_flags, plan);
      check(tl_run_xgen(plan.p, xgen_source.c_str()));
      print_done("xgen", plan_out(plan));
    } else if (matrix->parsed()) {
      PlanHandle plan;
      make_plan(g, matrix_flags, plan);
      check(tl_run_matrix(plan.p, matrix_layer));
      print_done("matrix", plan_out(plan));
    } else if (transfer->parsed()) {
      PlanHandle plan;
      make_plan(g, transfer_flags, plan);
      check(tl_run_transfer(plan.p, transfer_task.c_str(), source_prompt.c_str(), target_prompt.c_str()));
      print_done("transfer", plan_out(plan));
    } else if (polarity->parsed()) {
      PlanHandle plan;
      make_plan(g, polarity_flags, plan);
      check(tl_plan_set_polarity(plan.p, affirmative.empty() ? nullptr : affirmative.c_str(),
                                 negated.empty() ? nullptr : negated.c_str()));
      check(tl_run_polarity(plan.p));
      print_done("polarity", plan_out(plan));
    } else if (project->parsed()) {
      PlanHandle plan;
      make_plan(g, project_flags, plan);
      check(tl_run_project(plan.p, project_layer));
      print_done("project", plan_out(plan));
    } else if (similarity->parsed()) {
      PlanHandle plan;
      make_plan(g, sim_flags, plan);
      check(tl_run_similarity(plan.p, sim_task.c_str(), sim_prompt.c_str()));
      print_done("similarity", plan_out(plan));
    } else if (report->parsed()) {
      if (g.plan.empty()) validation("--plan is required for report");
      PlanHandle plan;
      make_plan(g, {}, plan);
      size_t ops = 0;
      check(tl_run_plan(plan.p, &ops));
      std::printf("report: ran %zu operation(s); index at %s/index.json\n", ops, plan_out(plan).c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
