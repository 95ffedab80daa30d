// SPDX-License-Identifier: Apache-2.0
#include "truthlens/truthlens.h"

#include <cstring>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "common/error.hpp"
#include "experiments/runner.hpp"
#include "metrics/metrics.hpp"
#include "probe/probe.hpp"
#include "synthgen/synthgen.hpp"
#include "taskgen/dataset_io.hpp"
#include "taskgen/generators.hpp"
#include "taskgen/knowledge_base.hpp"
#include "tensorio/activation_file.hpp"

using namespace truthlens;

struct tl_kb {
  std::optional<taskgen::KnowledgeBase> owned;
  const taskgen::KnowledgeBase* kb = nullptr;
};
struct tl_dataset {
  taskgen::Dataset rows;
};
struct tl_batch {
  tensorio::ActivationBatch batch;
};
struct tl_probe {
  probe::ProbeModel model;
};
struct tl_plan {
  experiments::ExperimentPlan plan;
};

namespace {

thread_local std::string g_last_error;

tl_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return TL_ERR_INVALID_ARGUMENT;
    case ErrorCode::kIo: return TL_ERR_IO;
    case ErrorCode::kFormat: return TL_ERR_FORMAT;
    case ErrorCode::kBadMagic: return TL_ERR_BAD_MAGIC;
    case ErrorCode::kLengthMismatch: return TL_ERR_LENGTH_MISMATCH;
    case ErrorCode::kNonFinite: return TL_ERR_NON_FINITE;
    case ErrorCode::kVersionMismatch: return TL_ERR_VERSION_MISMATCH;
    case ErrorCode::kMissingInput: return TL_ERR_MISSING_INPUT;
    case ErrorCode::kMisaligned: return TL_ERR_MISALIGNED;
    case ErrorCode::kInternal: return TL_ERR_INTERNAL;
  }
  return TL_ERR_INTERNAL;
}

template <typename F>
tl_status guard(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return TL_ERR_FORMAT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TL_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, fmt::format("{} must not be NULL", name));
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

probe::ProbeHyper to_hyper(const tl_hyper* h) {
  probe::ProbeHyper out;
  if (h != nullptr) {
    out.learning_rate = h->learning_rate;
    out.weight_decay = h->weight_decay;
    out.steps = h->steps;
    out.beta1 = h->beta1;
    out.beta2 = h->beta2;
    out.epsilon = h->epsilon;
  }
  out.validate();
  return out;
}

}  // namespace

extern "C" {

const char* tl_version(void) { return "1.0.0"; }
const char* tl_last_error(void) { return g_last_error.c_str(); }

const char* tl_status_name(tl_status status) {
  switch (status) {
    case TL_OK: return "ok";
    case TL_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case TL_ERR_IO: return "io";
    case TL_ERR_FORMAT: return "format";
    case TL_ERR_BAD_MAGIC: return "bad_magic";
    case TL_ERR_LENGTH_MISMATCH: return "length_mismatch";
    case TL_ERR_NON_FINITE: return "non_finite";
    case TL_ERR_VERSION_MISMATCH: return "version_mismatch";
    case TL_ERR_MISSING_INPUT: return "missing_input";
    case TL_ERR_MISALIGNED: return "misaligned";
    case TL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* tl_task_names(void) {
  static const std::string names = [] {
    std::string out;
    for (const auto t : taskgen::all_tasks()) out += (out.empty() ? "" : ",") + std::string(taskgen::task_name(t));
    return out;
  }();
  return names.c_str();
}

const char* tl_prompt_names(void) {
  static const std::string names = [] {
    std::string out;
    for (const auto& p : taskgen::all_prompts()) out += (out.empty() ? "" : ",") + std::string(p.id);
    return out;
  }();
  return names.c_str();
}

tl_status tl_kb_load(const char* path, tl_kb** out) {
  return guard([&] {
    need(out, "out");
    auto h = std::make_unique<tl_kb>();
    if (path == nullptr) {
      h->kb = &taskgen::KnowledgeBase::bundled();
    } else {
      h->owned = taskgen::KnowledgeBase::load_csv(path);
      h->kb = &*h->owned;
    }
    *out = h.release();
  });
}

size_t tl_kb_size(const tl_kb* kb) { return kb ? kb->kb->size() : 0; }
void tl_kb_free(tl_kb* kb) { delete kb; }

tl_status tl_dataset_generate(const tl_kb* kb, const char* task, size_t n, uint64_t seed, tl_dataset** out) {
  return guard([&] {
    need(task, "task");
    need(out, "out");
    const auto t = taskgen::parse_task(task);
    if (!t) fail(ErrorCode::kInvalidArgument, fmt::format("unknown task '{}'", task));
    const auto& base = kb ? *kb->kb : taskgen::KnowledgeBase::bundled();
    auto h = std::make_unique<tl_dataset>();
    h->rows = taskgen::generate(*t, base, n == 0 ? taskgen::default_size(*t) : n, seed);
    *out = h.release();
  });
}

tl_status tl_dataset_read_jsonl(const char* path, tl_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<tl_dataset>();
    h->rows = taskgen::read_jsonl(path);
    *out = h.release();
  });
}

tl_status tl_dataset_write_jsonl(const tl_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    taskgen::write_jsonl(ds->rows, path);
  });
}

tl_status tl_dataset_apply_prompt(tl_dataset* ds, const char* prompt_id) {
  return guard([&] {
    need(ds, "dataset");
    need(prompt_id, "prompt_id");
    taskgen::apply_prompt(ds->rows, taskgen::prompt_template(prompt_id));
  });
}

tl_status tl_dataset_split(tl_dataset* ds, double train_fraction, uint64_t seed) {
  return guard([&] {
    need(ds, "dataset");
    taskgen::split_dataset(ds->rows, train_fraction, seed);
  });
}

size_t tl_dataset_size(const tl_dataset* ds) { return ds ? ds->rows.size() : 0; }

const char* tl_dataset_text(const tl_dataset* ds, size_t i) {
  return ds && i < ds->rows.size() ? ds->rows[i].text.c_str() : nullptr;
}

int tl_dataset_label(const tl_dataset* ds, size_t i) {
  return ds && i < ds->rows.size() ? (ds->rows[i].label ? 1 : 0) : -1;
}

int tl_dataset_is_train(const tl_dataset* ds, size_t i) {
  return ds && i < ds->rows.size() ? (ds->rows[i].split == taskgen::Split::kTrain ? 1 : 0) : -1;
}

tl_status tl_dataset_oracle_check(const tl_dataset* ds, const tl_kb* kb, size_t* mismatches) {
  return guard([&] {
    need(ds, "dataset");
    need(mismatches, "mismatches");
    const auto& base = kb ? *kb->kb : taskgen::KnowledgeBase::bundled();
    size_t bad = 0;
    for (const auto& s : ds->rows) bad += taskgen::oracle_label(s, base) != s.label;
    *mismatches = bad;
  });
}

void tl_dataset_free(tl_dataset* ds) { delete ds; }

tl_status tl_batch_read(const char* path, tl_batch** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<tl_batch>();
    h->batch = tensorio::read_activations(path);
    *out = h.release();
  });
}

tl_status tl_batch_create(uint32_t layer, size_t n, size_t d, const float* data, const int64_t* ids, const char* task,
                          const char* prompt, const char* model, tl_batch** out) {
  return guard([&] {
    need(out, "out");
    if (n * d > 0) need(data, "data");
    if (n > 0) need(ids, "ids");
    auto h = std::make_unique<tl_batch>();
    auto& b = h->batch;
    b.layer = layer;
    b.n = n;
    b.d = d;
    b.data.assign(data, data + n * d);
    b.example_ids.assign(ids, ids + n);
    b.task = task ? task : "";
    b.prompt = prompt ? prompt : "";
    b.model = model ? model : "";
    b.validate();
    *out = h.release();
  });
}

tl_status tl_batch_write(const tl_batch* batch, const char* path) {
  return guard([&] {
    need(batch, "batch");
    need(path, "path");
    tensorio::write_activations(batch->batch, path);
  });
}

void tl_batch_shape(const tl_batch* batch, uint32_t* layer, size_t* n, size_t* d) {
  if (batch == nullptr) return;
  if (layer) *layer = batch->batch.layer;
  if (n) *n = batch->batch.n;
  if (d) *d = batch->batch.d;
}

const float* tl_batch_data(const tl_batch* batch) { return batch ? batch->batch.data.data() : nullptr; }
const int64_t* tl_batch_ids(const tl_batch* batch) { return batch ? batch->batch.example_ids.data() : nullptr; }
void tl_batch_free(tl_batch* batch) { delete batch; }

void tl_hyper_default(tl_hyper* hyper) {
  if (hyper == nullptr) return;
  const probe::ProbeHyper h;
  *hyper = {h.learning_rate, h.weight_decay, h.steps, h.beta1, h.beta2, h.epsilon};
}

tl_status tl_probe_train(const tl_batch* batch, const uint8_t* labels, const tl_hyper* hyper, uint64_t seed,
                         tl_probe** out) {
  return guard([&] {
    need(batch, "batch");
    need(labels, "labels");
    need(out, "out");
    auto h = std::make_unique<tl_probe>();
    h->model = probe::train_probe(probe::center(batch->batch), std::span(labels, batch->batch.n), to_hyper(hyper), seed);
    h->model.layer = batch->batch.layer;
    h->model.task = batch->batch.task;
    h->model.prompt = batch->batch.prompt;
    *out = h.release();
  });
}

tl_status tl_probe_load(const char* path, tl_probe** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<tl_probe>();
    h->model = probe::load_probe(path);
    *out = h.release();
  });
}

tl_status tl_probe_save(const tl_probe* p, const char* path) {
  return guard([&] {
    need(p, "probe");
    need(path, "path");
    probe::save_probe(p->model, path);
  });
}

size_t tl_probe_dim(const tl_probe* p) { return p ? p->model.dim() : 0; }
const float* tl_probe_weights(const tl_probe* p) { return p ? p->model.w.data() : nullptr; }

tl_status tl_probe_logits(const tl_probe* p, const tl_batch* batch, double* out, size_t cap) {
  return guard([&] {
    need(p, "probe");
    need(batch, "batch");
    need(out, "out");
    require(cap >= batch->batch.n, fmt::format("output capacity {} is below the {} rows", cap, batch->batch.n));
    const auto z = probe::logits(p->model, batch->batch);
    std::copy(z.begin(), z.end(), out);
  });
}

void tl_probe_free(tl_probe* p) { delete p; }

tl_status tl_auroc(const double* scores, const uint8_t* labels, size_t n, double* out) {
  return guard([&] {
    need(scores, "scores");
    need(labels, "labels");
    need(out, "out");
    *out = metrics::auroc(std::span(scores, n), std::span(labels, n));
  });
}

tl_status tl_synth_emit(const char* spec_json, const char* dir, size_t* files_written) {
  return guard([&] {
    need(spec_json, "spec_json");
    need(dir, "dir");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(spec_json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kInvalidArgument, fmt::format("synthetic spec is not valid JSON: {}", e.what()));
    }
    const auto stack = synthgen::gen_synthetic(synthgen::SyntheticSpec::from_json(j));
    const auto written = synthgen::emit(stack, dir);
    if (files_written) *files_written = written.size();
  });
}

tl_status tl_plan_load(const char* path, tl_plan** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto h = std::make_unique<tl_plan>();
    h->plan = experiments::ExperimentPlan::load(path);
    *out = h.release();
  });
}

tl_status tl_plan_from_json(const char* json, tl_plan** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kInvalidArgument, fmt::format("plan is not valid JSON: {}", e.what()));
    }
    auto h = std::make_unique<tl_plan>();
    h->plan = experiments::ExperimentPlan::from_json(j);
    *out = h.release();
  });
}

tl_status tl_plan_set_paths(tl_plan* plan, const char* activations, const char* out) {
  return guard([&] {
    need(plan, "plan");
    if (activations) plan->plan.activations = activations;
    if (out) plan->plan.out = out;
  });
}

tl_status tl_plan_set_seed(tl_plan* plan, uint64_t seed) {
  return guard([&] {
    need(plan, "plan");
    plan->plan.seed = seed;
  });
}

tl_status tl_plan_set_jobs(tl_plan* plan, unsigned jobs) {
  return guard([&] {
    need(plan, "plan");
    require(jobs >= 1, "jobs must be at least 1");
    plan->plan.jobs = jobs;
  });
}

tl_status tl_plan_set_polarity(tl_plan* plan, const char* affirmative, const char* negated) {
  return guard([&] {
    need(plan, "plan");
    if (affirmative) plan->plan.affirmative_task = affirmative;
    if (negated) plan->plan.negated_task = negated;
  });
}

tl_status tl_plan_set_lists(tl_plan* plan, const char* tasks, const char* prompts, const char* layers) {
  return guard([&] {
    need(plan, "plan");
    auto next = plan->plan;
    if (tasks) next.tasks = split_list(tasks);
    if (prompts) next.prompts = split_list(prompts);
    if (layers) {
      next.layers.clear();
      if (std::string_view(layers) != "all") {
        for (const auto& item : split_list(layers)) {
          size_t used = 0;
          unsigned long v = 0;
          try {
            v = std::stoul(item, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used != item.size() || item.front() == '-')
            fail(ErrorCode::kInvalidArgument, fmt::format("invalid layer '{}'", item));
          next.layers.push_back(static_cast<uint32_t>(v));
        }
        require(!next.layers.empty(), "layer list is empty");
      }
    }
    next.validate();
    plan->plan = std::move(next);
  });
}

char* tl_plan_to_json(const tl_plan* plan) {
  if (plan == nullptr) return nullptr;
  const std::string s = plan->plan.to_json().dump(2);
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void tl_plan_free(tl_plan* plan) { delete plan; }
void tl_string_free(char* s) { std::free(s); }

tl_status tl_run_train(const tl_plan* plan, const char* task, const char* prompt, uint32_t layer, char* probe_path,
                       size_t cap) {
  return guard([&] {
    need(plan, "plan");
    need(task, "task");
    need(prompt, "prompt");
    experiments::Workspace ws(plan->plan);
    ws.check_inputs({{task, prompt}}, {layer});
    const auto view = ws.load(task, prompt, layer);
    ws.probe_for(view);
    const std::string path = ws.probe_path(task, prompt, layer).string();
    if (probe_path != nullptr) {
      require(cap > path.size(), fmt::format("probe path needs {} bytes, buffer has {}", path.size() + 1, cap));
      std::memcpy(probe_path, path.c_str(), path.size() + 1);
    }
  });
}

#define TL_RUN(call)                                  \
  return guard([&] {                                  \
    need(plan, "plan");                               \
    experiments::Workspace ws(plan->plan);            \
    const auto res = call;                            \
    experiments::emit_report(ws, {res.artifact}, true); \
  })

tl_status tl_run_sweep(const tl_plan* plan) { TL_RUN(experiments::layer_sweep(ws)); }

tl_status tl_run_xgen(const tl_plan* plan, const char* source) {
  if (source == nullptr) return guard([] { need(nullptr, "source"); });
  TL_RUN(experiments::generalization_sweep(ws, source));
}

tl_status tl_run_matrix(const tl_plan* plan, uint32_t layer) { TL_RUN(experiments::full_matrix(ws, layer)); }

tl_status tl_run_transfer(const tl_plan* plan, const char* task, const char* source_prompt,
                          const char* target_prompt) {
  if (!task || !source_prompt || !target_prompt)
    return guard([] { fail(ErrorCode::kInvalidArgument, "task and both prompts are required"); });
  TL_RUN(experiments::prompt_transfer(ws, task, source_prompt, target_prompt));
}

tl_status tl_run_polarity(const tl_plan* plan) { TL_RUN(experiments::polarity_sweep(ws)); }

tl_status tl_run_project(const tl_plan* plan, uint32_t layer) { TL_RUN(experiments::projection_report(ws, layer)); }

tl_status tl_run_similarity(const tl_plan* plan, const char* task, const char* prompt) {
  if (!task || !prompt) return guard([] { fail(ErrorCode::kInvalidArgument, "task and prompt are required"); });
  TL_RUN(experiments::probe_similarity(ws, task, prompt));
}

#undef TL_RUN

tl_status tl_run_plan(const tl_plan* plan, size_t* operations_run) {
  return guard([&] {
    need(plan, "plan");
    experiments::Workspace ws(plan->plan);
    const auto artifacts = experiments::run_plan(ws);
    if (operations_run) *operations_run = artifacts.size();
  });
}

}  // extern "C"
