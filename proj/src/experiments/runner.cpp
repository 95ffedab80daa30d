// SPDX-License-Identifier: Apache-2.0
#include "experiments/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "common/encoding.hpp"
#include "common/error.hpp"
#include "experiments/svg.hpp"
#include "taskgen/dataset_io.hpp"

namespace truthlens::experiments {
namespace {

using Pairs = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) { return fmt::format("{:.8f}", v); }

std::string layer_tag(uint32_t layer) { return fmt::format("layer{:02}", layer); }

Pairs plan_pairs(const ExperimentPlan& plan, const std::vector<std::string>& tasks) {
  Pairs out;
  for (const auto& t : tasks)
    for (const auto& p : plan.prompts) out.emplace_back(t, p);
  return out;
}

double test_auroc(const probe::ProbeModel& model, const TaskView& view) {
  const auto z = probe::logits(model, view.batch, view.test_rows);
  return metrics::auroc(z, view.test_labels);
}

void require_tasks(const ExperimentPlan& plan) {
  if (plan.tasks.empty()) fail(ErrorCode::kInvalidArgument, "plan lists no tasks");
}

}  // namespace

nlohmann::ordered_json Artifact::to_json() const {
  nlohmann::ordered_json j;
  j["operation"] = operation;
  j["params"] = params;
  j["tables"] = tables;
  j["plots"] = plots;
  return j;
}

void parallel_for(size_t count, unsigned jobs, const std::function<void(size_t)>& fn) {
  if (count == 0) return;
  const size_t workers = std::min<size_t>(std::max(1u, jobs), count);
  std::vector<std::exception_ptr> errors(count);
  if (workers == 1) {
    for (size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    for (size_t w = 0; w < workers; ++w)
      threads.emplace_back([&] {
        while (!failed.load()) {
          const size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Workspace::Workspace(ExperimentPlan plan) : plan_(std::move(plan)) { plan_.validate(); }

std::filesystem::path Workspace::activation_path(const std::string& task, const std::string& prompt,
                                                 uint32_t layer) const {
  return plan_.activations / tensorio::activation_file_name(task, prompt, layer);
}

std::filesystem::path Workspace::manifest_path(const std::string& task, const std::string& prompt) const {
  return plan_.activations / taskgen::dataset_file_name(task, prompt);
}

std::filesystem::path Workspace::probe_path(const std::string& task, const std::string& prompt, uint32_t layer) const {
  return plan_.out / "probes" /
         fmt::format("{}.{}.{}.h{}.s{}.probe.json", task, prompt, layer_tag(layer), hex64(plan_.hyper.hash()),
                     plan_.seed);
}

std::vector<uint32_t> Workspace::available_layers(const std::string& task, const std::string& prompt) const {
  std::vector<uint32_t> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(plan_.activations, ec)) return out;
  const std::string prefix = fmt::format("{}.{}.layer", task, prompt);
  for (const auto& entry : std::filesystem::directory_iterator(plan_.activations, ec)) {
    const std::string name = entry.path().filename().string();
    if (!name.starts_with(prefix) || !name.ends_with(".actv")) continue;
    const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    out.push_back(static_cast<uint32_t>(std::stoul(digits)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<uint32_t> Workspace::resolve_layers(const Pairs& pairs) const {
  if (!plan_.all_layers()) {
    auto l = plan_.layers;
    std::sort(l.begin(), l.end());
    return l;
  }
  std::vector<uint32_t> common;
  bool first = true;
  for (const auto& [task, prompt] : pairs) {
    const auto avail = available_layers(task, prompt);
    if (first) {
      common = avail;
      first = false;
      continue;
    }
    std::vector<uint32_t> both;
    std::set_intersection(common.begin(), common.end(), avail.begin(), avail.end(), std::back_inserter(both));
    common = std::move(both);
  }
  return common;
}

void Workspace::check_inputs(const Pairs& pairs, const std::vector<uint32_t>& layers) const {
  std::vector<std::string> missing;
  for (const auto& [task, prompt] : pairs) {
    const auto manifest = manifest_path(task, prompt);
    if (!std::filesystem::exists(manifest)) missing.push_back(manifest.string());
    const auto avail = available_layers(task, prompt);
    if (plan_.all_layers() && avail.empty())
      missing.push_back(fmt::format("{} (no layers)", activation_path(task, prompt, 0).string()));
    for (const uint32_t layer : layers) {
      if (!avail.empty() && layer > avail.back())
        fail(ErrorCode::kInvalidArgument,
             fmt::format("layer {} out of range: activations for {}/{} cover layers 0..{}", layer, task, prompt,
                         avail.back()));
      const auto path = activation_path(task, prompt, layer);
      if (!std::filesystem::exists(path)) {
        missing.push_back(path.string());
        continue;
      }
      const auto side = tensorio::sidecar_path(path);
      if (!std::filesystem::exists(side)) missing.push_back(side.string());
    }
  }
  if (plan_.all_layers() && layers.empty() && missing.empty() && !pairs.empty())
    fail(ErrorCode::kMissingInput, "no layer is present for every requested task and prompt");
  if (!missing.empty()) {
    std::string msg = fmt::format("{} input file(s) missing:", missing.size());
    for (const auto& m : missing) msg += "\n  " + m;
    fail(ErrorCode::kMissingInput, msg);
  }
}

const taskgen::Dataset& Workspace::manifest(const std::string& task, const std::string& prompt) const {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(task, prompt);
  auto it = manifests_.find(key);
  if (it == manifests_.end()) it = manifests_.emplace(key, taskgen::read_jsonl(manifest_path(task, prompt))).first;
  return it->second;
}

TaskView Workspace::load(const std::string& task, const std::string& prompt, uint32_t layer) const {
  const auto path = activation_path(task, prompt, layer);
  if (!std::filesystem::exists(path)) {
    const auto avail = available_layers(task, prompt);
    if (!avail.empty() && layer > avail.back())
      fail(ErrorCode::kInvalidArgument, fmt::format("layer {} out of range: activations for {}/{} cover layers 0..{}",
                                                    layer, task, prompt, avail.back()));
    fail(ErrorCode::kMissingInput, fmt::format("missing activation file '{}'", path.string()));
  }
  TaskView view;
  view.task = task;
  view.prompt = prompt;
  view.batch = tensorio::read_activations(path);
  const auto& rows = manifest(task, prompt);
  std::unordered_map<int64_t, size_t> index;
  for (size_t i = 0; i < rows.size(); ++i) index.emplace(rows[i].id, i);
  view.labels.resize(view.batch.n);
  for (size_t r = 0; r < view.batch.n; ++r) {
    const auto it = index.find(view.batch.example_ids[r]);
    if (it == index.end())
      fail(ErrorCode::kMisaligned, fmt::format("'{}' row {} has id {} which is not in '{}'", path.string(), r,
                                               view.batch.example_ids[r], manifest_path(task, prompt).string()));
    const auto& s = rows[it->second];
    view.labels[r] = s.label ? 1 : 0;
    if (s.split == taskgen::Split::kTrain) {
      view.train_rows.push_back(r);
      view.train_labels.push_back(view.labels[r]);
    } else {
      view.test_rows.push_back(r);
      view.test_labels.push_back(view.labels[r]);
    }
  }
  return view;
}

std::string training_fingerprint(const TaskView& view) {
  uint64_t h = fnv1a64(fmt::format("{}x{}", view.train_rows.size(), view.batch.d));
  for (size_t k = 0; k < view.train_rows.size(); ++k) {
    const size_t r = view.train_rows[k];
    const int64_t id = view.batch.example_ids[r];
    h = fnv1a64(std::span(reinterpret_cast<const uint8_t*>(&id), sizeof id), h);
    h = fnv1a64(std::span(&view.train_labels[k], 1), h);
    const auto row = view.batch.row(r);
    h = fnv1a64(std::span(reinterpret_cast<const uint8_t*>(row.data()), row.size_bytes()), h);
  }
  return hex64(h);
}

probe::ProbeModel Workspace::probe_for(const TaskView& view) const {
  const auto path = probe_path(view.task, view.prompt, view.batch.layer);
  const std::string fingerprint = training_fingerprint(view);
  if (std::filesystem::exists(path)) {
    try {
      auto cached = probe::load_probe(path);
      if (cached.fingerprint == fingerprint && cached.hyper == plan_.hyper && cached.dim() == view.batch.d)
        return cached;
    } catch (const Error&) {
      // Unreadable cache entries are rebuilt below.
    }
  }
  auto model = probe::train_probe(probe::center(view.batch, view.train_rows), view.train_labels, plan_.hyper,
                                  plan_.seed);
  model.layer = view.batch.layer;
  model.task = view.task;
  model.prompt = view.prompt;
  model.fingerprint = fingerprint;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
  probe::save_probe(model, path);
  return model;
}

std::string Workspace::write_output(const std::string& relative, const std::string& text) const {
  const auto path = plan_.out / relative;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCode::kIo, fmt::format("cannot create '{}': {}", path.parent_path().string(), ec.message()));
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) fail(ErrorCode::kIo, fmt::format("cannot write '{}'", path.string()));
  return relative;
}

Result<SweepPoint> layer_sweep(Workspace& ws) {
  const auto& plan = ws.plan();
  require_tasks(plan);
  const auto pairs = plan_pairs(plan, plan.tasks);
  const auto layers = ws.resolve_layers(pairs);
  ws.check_inputs(pairs, layers);

  Result<SweepPoint> res;
  for (const auto& [task, prompt] : pairs)
    for (const uint32_t layer : layers) res.items.push_back({task, prompt, layer, 0.0});
  parallel_for(res.items.size(), plan.jobs, [&](size_t i) {
    auto& pt = res.items[i];
    const auto view = ws.load(pt.task, pt.prompt, pt.layer);
    pt.auroc = test_auroc(ws.probe_for(view), view);
  });

  res.artifact.operation = "sweep";
  std::string csv = "task,prompt,layer,auroc\n";
  for (const auto& p : res.items) csv += fmt::format("{},{},{},{}\n", p.task, p.prompt, p.layer, num(p.auroc));
  res.artifact.tables.push_back(ws.write_output("tables/layer_sweep.csv", csv));
  for (const auto& prompt : plan.prompts) {
    std::vector<svg::Series> series;
    for (const auto& task : plan.tasks) {
      svg::Series s{task, {}, {}, false};
      for (const auto& p : res.items)
        if (p.task == task && p.prompt == prompt) {
          s.x.push_back(p.layer);
          s.y.push_back(p.auroc);
        }
      series.push_back(std::move(s));
    }
    res.artifact.plots.push_back(
        ws.write_output(fmt::format("plots/layer_sweep.{}.svg", prompt),
                        svg::line_plot({fmt::format("In-domain test AUROC ({})", prompt), "layer", "AUROC"}, series)));
  }
  return res;
}

Result<GeneralizationPoint> generalization_sweep(Workspace& ws, const std::string& source) {
  const auto& plan = ws.plan();
  std::vector<std::string> targets = plan.tasks;
  if (std::find(targets.begin(), targets.end(), source) == targets.end()) targets.insert(targets.begin(), source);
  const auto pairs = plan_pairs(plan, targets);
  const auto layers = ws.resolve_layers(pairs);
  ws.check_inputs(pairs, layers);

  struct Job {
    std::string prompt;
    uint32_t layer;
  };
  std::vector<Job> jobs;
  for (const auto& prompt : plan.prompts)
    for (const uint32_t layer : layers) jobs.push_back({prompt, layer});
  std::vector<std::vector<GeneralizationPoint>> per_job(jobs.size());
  parallel_for(jobs.size(), plan.jobs, [&](size_t i) {
    const auto& job = jobs[i];
    const auto src = ws.load(source, job.prompt, job.layer);
    const auto model = ws.probe_for(src);
    for (const auto& target : targets) {
      const double a = target == source ? test_auroc(model, src) : test_auroc(model, ws.load(target, job.prompt, job.layer));
      per_job[i].push_back({source, target, job.prompt, job.layer, a});
    }
  });

  Result<GeneralizationPoint> res;
  for (auto& v : per_job) res.items.insert(res.items.end(), v.begin(), v.end());
  res.artifact.operation = "xgen";
  res.artifact.params["source"] = source;
  for (const auto& prompt : plan.prompts) {
    std::string csv = "source,target,layer,auroc\n";
    std::vector<svg::Series> series;
    for (const auto& target : targets) {
      svg::Series s{target, {}, {}, target == source};
      for (const auto& p : res.items)
        if (p.prompt == prompt && p.target == target) {
          s.x.push_back(p.layer);
          s.y.push_back(p.auroc);
        }
      series.push_back(std::move(s));
    }
    for (const uint32_t layer : layers)
      for (const auto& p : res.items)
        if (p.prompt == prompt && p.layer == layer)
          csv += fmt::format("{},{},{},{}\n", p.source, p.target, p.layer, num(p.auroc));
    res.artifact.tables.push_back(ws.write_output(fmt::format("tables/generalization.{}.{}.csv", source, prompt), csv));
    res.artifact.plots.push_back(ws.write_output(
        fmt::format("plots/generalization.{}.{}.svg", source, prompt),
        svg::line_plot({fmt::format("Probe trained on {} ({})", source, prompt), "layer", "AUROC"}, series)));
  }
  return res;
}

Result<TransferPoint> prompt_transfer(Workspace& ws, const std::string& task, const std::string& source_prompt,
                                      const std::string& target_prompt) {
  const auto& plan = ws.plan();
  const Pairs pairs = {{task, source_prompt}, {task, target_prompt}};
  const auto layers = ws.resolve_layers(pairs);
  ws.check_inputs(pairs, layers);

  Result<TransferPoint> res;
  for (const uint32_t layer : layers) res.items.push_back({layer, 0.0, 0.0});
  parallel_for(res.items.size(), plan.jobs, [&](size_t i) {
    auto& pt = res.items[i];
    const auto src = ws.load(task, source_prompt, pt.layer);
    const auto tgt = source_prompt == target_prompt ? src : ws.load(task, target_prompt, pt.layer);
    std::vector<std::pair<int64_t, uint8_t>> a, b;
    for (size_t k = 0; k < src.test_rows.size(); ++k)
      a.emplace_back(src.batch.example_ids[src.test_rows[k]], src.test_labels[k]);
    for (size_t k = 0; k < tgt.test_rows.size(); ++k)
      b.emplace_back(tgt.batch.example_ids[tgt.test_rows[k]], tgt.test_labels[k]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b)
      fail(ErrorCode::kMisaligned,
           fmt::format("{} test statements differ between prompts '{}' and '{}' at layer {}", task, source_prompt,
                       target_prompt, pt.layer));
    const auto model = ws.probe_for(src);
    pt.own = test_auroc(model, src);
    pt.transfer = test_auroc(model, tgt);
  });

  res.artifact.operation = "transfer";
  res.artifact.params["task"] = task;
  res.artifact.params["source_prompt"] = source_prompt;
  res.artifact.params["target_prompt"] = target_prompt;
  std::string csv = "task,source_prompt,target_prompt,layer,own_auroc,transfer_auroc\n";
  svg::Series own{fmt::format("{} test", source_prompt), {}, {}, false};
  svg::Series transfer{fmt::format("{} test", target_prompt), {}, {}, true};
  for (const auto& p : res.items) {
    csv += fmt::format("{},{},{},{},{},{}\n", task, source_prompt, target_prompt, p.layer, num(p.own), num(p.transfer));
    own.x.push_back(p.layer);
    own.y.push_back(p.own);
    transfer.x.push_back(p.layer);
    transfer.y.push_back(p.transfer);
  }
  const std::string stem = fmt::format("transfer.{}.{}.{}", task, source_prompt, target_prompt);
  res.artifact.tables.push_back(ws.write_output(fmt::format("tables/{}.csv", stem), csv));
  res.artifact.plots.push_back(ws.write_output(
      fmt::format("plots/{}.svg", stem),
      svg::line_plot({fmt::format("{} probes trained on {}", task, source_prompt), "layer", "AUROC"}, {own, transfer})));
  return res;
}

Result<metrics::EvalMatrix> full_matrix(Workspace& ws, uint32_t layer) {
  const auto& plan = ws.plan();
  require_tasks(plan);
  const auto pairs = plan_pairs(plan, plan.tasks);
  ws.check_inputs(pairs, {layer});

  Result<metrics::EvalMatrix> res;
  res.items.resize(plan.prompts.size());
  res.artifact.operation = "matrix";
  res.artifact.params["layer"] = layer;
  for (size_t pi = 0; pi < plan.prompts.size(); ++pi) {
    const auto& prompt = plan.prompts[pi];
    std::vector<TaskView> views(plan.tasks.size());
    std::vector<probe::ProbeModel> probes(plan.tasks.size());
    parallel_for(plan.tasks.size(), plan.jobs, [&](size_t i) {
      views[i] = ws.load(plan.tasks[i], prompt, layer);
      probes[i] = ws.probe_for(views[i]);
    });
    std::vector<metrics::LabeledRows> evals;
    for (const auto& v : views) evals.push_back(v.test());
    res.items[pi] = metrics::cross_task_matrix(probes, evals, plan.tasks);
    const std::string stem = fmt::format("matrix.{}.{}", prompt, layer_tag(layer));
    res.artifact.tables.push_back(ws.write_output(fmt::format("tables/{}.csv", stem), res.items[pi].to_csv()));
    res.artifact.plots.push_back(ws.write_output(
        fmt::format("plots/{}.svg", stem),
        svg::heatmap(fmt::format("Cross-task AUROC, layer {} ({})", layer, prompt), res.items[pi])));
  }
  return res;
}

Result<PolarityPoint> polarity_sweep(Workspace& ws) {
  const auto& plan = ws.plan();
  const auto pairs = plan_pairs(plan, {plan.affirmative_task, plan.negated_task});
  const auto layers = ws.resolve_layers(pairs);
  ws.check_inputs(pairs, layers);

  Result<PolarityPoint> res;
  for (const auto& prompt : plan.prompts)
    for (const uint32_t layer : layers) res.items.push_back({prompt, layer, 0.0, 0.0, false});
  parallel_for(res.items.size(), plan.jobs, [&](size_t i) {
    auto& pt = res.items[i];
    const auto aff = ws.load(plan.affirmative_task, pt.prompt, pt.layer);
    const auto neg = ws.load(plan.negated_task, pt.prompt, pt.layer);
    const auto aff_test = aff.test();
    const auto neg_test = neg.test();
    const auto dec = metrics::polarity_decompose(aff.train(), neg.train(), plan.hyper, plan.seed, &aff_test, &neg_test);
    pt.frac_general = dec.frac_general;
    pt.frac_polarity = dec.frac_polarity;
    pt.degenerate = dec.degenerate;
  });

  res.artifact.operation = "polarity";
  res.artifact.params["affirmative"] = plan.affirmative_task;
  res.artifact.params["negated"] = plan.negated_task;
  for (const auto& prompt : plan.prompts) {
    std::string csv = "layer,frac_G,frac_p\n";
    svg::Series g{"t_G (polarity-invariant)", {}, {}, false};
    svg::Series p{"t_p (affirmative only)", {}, {}, false};
    for (const auto& pt : res.items) {
      if (pt.prompt != prompt) continue;
      csv += fmt::format("{},{},{}\n", pt.layer, num(pt.frac_general), num(pt.frac_polarity));
      g.x.push_back(pt.layer);
      g.y.push_back(pt.frac_general);
      p.x.push_back(pt.layer);
      p.y.push_back(pt.frac_polarity);
    }
    res.artifact.tables.push_back(ws.write_output(fmt::format("tables/polarity.{}.csv", prompt), csv));
    res.artifact.plots.push_back(ws.write_output(
        fmt::format("plots/polarity.{}.svg", prompt),
        svg::line_plot({fmt::format("Truth-related variance explained ({})", prompt), "layer", "fraction"}, {g, p})));
  }
  return res;
}

Result<ProjectionSet> projection_report(Workspace& ws, uint32_t layer) {
  const auto& plan = ws.plan();
  require_tasks(plan);
  const auto pairs = plan_pairs(plan, plan.tasks);
  ws.check_inputs(pairs, {layer});

  Result<ProjectionSet> res;
  for (const auto& [task, prompt] : pairs) res.items.push_back({task, prompt, layer, {}, {}, {}});
  parallel_for(res.items.size(), plan.jobs, [&](size_t i) {
    auto& set = res.items[i];
    const auto view = ws.load(set.task, set.prompt, layer);
    const auto model = ws.probe_for(view);
    set.projection = metrics::project_2d(view.batch, model, view.test_rows);
    set.labels = view.test_labels;
    for (const size_t r : view.test_rows) set.ids.push_back(view.batch.example_ids[r]);
  });

  res.artifact.operation = "project";
  res.artifact.params["layer"] = layer;
  for (const auto& set : res.items) {
    std::string csv = "id,x,y,label\n";
    for (size_t k = 0; k < set.ids.size(); ++k)
      csv += fmt::format("{},{},{},{}\n", set.ids[k], num(set.projection.x[k]), num(set.projection.y[k]),
                         int(set.labels[k]));
    res.artifact.tables.push_back(ws.write_output(
        fmt::format("tables/projection.{}.{}.{}.csv", set.task, set.prompt, layer_tag(layer)), csv));
  }
  for (const auto& prompt : plan.prompts) {
    std::vector<svg::ScatterPanel> panels;
    for (const auto& set : res.items)
      if (set.prompt == prompt) panels.push_back({set.task, set.projection.x, set.projection.y, set.labels});
    res.artifact.plots.push_back(
        ws.write_output(fmt::format("plots/projection.{}.{}.svg", prompt, layer_tag(layer)),
                        svg::scatter_grid(fmt::format("Layer {} projections ({})", layer, prompt), panels)));
  }
  return res;
}

Result<metrics::EvalMatrix> probe_similarity(Workspace& ws, const std::string& task, const std::string& prompt) {
  const auto& plan = ws.plan();
  const Pairs pairs = {{task, prompt}};
  const auto layers = ws.resolve_layers(pairs);
  ws.check_inputs(pairs, layers);
  std::vector<probe::ProbeModel> probes(layers.size());
  parallel_for(layers.size(), plan.jobs, [&](size_t i) { probes[i] = ws.probe_for(ws.load(task, prompt, layers[i])); });
  Result<metrics::EvalMatrix> res;
  res.items.push_back(metrics::probe_similarity_heatmap(probes));
  res.artifact.operation = "similarity";
  res.artifact.params["task"] = task;
  res.artifact.params["prompt"] = prompt;
  const std::string stem = fmt::format("similarity.{}.{}", task, prompt);
  res.artifact.tables.push_back(ws.write_output(fmt::format("tables/{}.csv", stem), res.items[0].to_csv()));
  res.artifact.plots.push_back(ws.write_output(
      fmt::format("plots/{}.svg", stem),
      svg::heatmap(fmt::format("Probe cosine across layers, {} ({})", task, prompt), res.items[0])));
  return res;
}

void emit_report(const Workspace& ws, const std::vector<Artifact>& artifacts, bool merge) {
  std::map<std::string, nlohmann::ordered_json> entries;
  const auto index_path = ws.out() / "index.json";
  if (merge && std::filesystem::exists(index_path)) {
    try {
      std::ifstream in(index_path);
      const auto old = nlohmann::ordered_json::parse(in);
      for (const auto& e : old.at("entries"))
        entries[e.at("operation").get<std::string>() + e.at("params").dump()] = e;
    } catch (const std::exception&) {
      // A corrupt index is replaced.
    }
  }
  for (const auto& a : artifacts) entries[a.operation + a.params.dump()] = a.to_json();
  nlohmann::ordered_json index;
  index["format"] = "truthlens.report";
  index["version"] = 1;
  index["plan"] = ws.plan().to_json();
  index["entries"] = nlohmann::ordered_json::array();
  for (auto& [_, e] : entries) index["entries"].push_back(e);
  ws.write_output("index.json", index.dump(2) + "\n");
}

std::vector<Artifact> run_plan(Workspace& ws) {
  std::vector<Artifact> artifacts;
  for (const auto& op : ws.plan().operations) {
    if (op.op == "sweep") {
      artifacts.push_back(layer_sweep(ws).artifact);
    } else if (op.op == "xgen") {
      artifacts.push_back(generalization_sweep(ws, op.source).artifact);
    } else if (op.op == "matrix") {
      artifacts.push_back(full_matrix(ws, *op.layer).artifact);
    } else if (op.op == "transfer") {
      artifacts.push_back(prompt_transfer(ws, op.task, op.source_prompt, op.target_prompt).artifact);
    } else if (op.op == "polarity") {
      artifacts.push_back(polarity_sweep(ws).artifact);
    } else if (op.op == "project") {
      artifacts.push_back(projection_report(ws, *op.layer).artifact);
    } else if (op.op == "similarity") {
      artifacts.push_back(
          probe_similarity(ws, op.task, op.prompt.empty() ? ws.plan().prompts.front() : op.prompt).artifact);
    }
  }
  emit_report(ws, artifacts, false);
  return artifacts;
}

}  // namespace truthlens::experiments
