// ehrgraph: impute unary patient x event matrices with a bipartite graph model.
//
//   ehrgraph generate          write a synthetic dataset as triplet files
//   ehrgraph split             filter rare events and split patients
//   ehrgraph train             fit the graph model
//   ehrgraph evaluate          sensitivity/specificity tables for any imputer
//   ehrgraph compare-samplers  uniform vs degree-preserving negative sampling
//   ehrgraph export-embeddings event latents and cosine neighbours

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ehrgraph/pipeline.hpp"

namespace {

using namespace ehrgraph;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> workers;
  std::string run_dir;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool training) {
  cmd->add_option("-c,--config", o.config, "JSON run config, or a run manifest to replay (default: built-in)");
  cmd->add_option("--set", o.sets, "Override a config field, e.g. --set train.learning_rate=0.01")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", o.seed, "Top-level seed (overrides the config)");
  if (training) {
    cmd->add_option("--epochs", o.epochs, "Training iterations (overrides train.epochs)");
  }
  cmd->add_option("--workers", o.workers, "Worker threads, 0 = all cores (overrides runtime.workers)");
  cmd->add_option("--run-dir", o.run_dir, "Output directory (default: <output_dir>/<timestamp>-seed<seed>-<command>)");
  cmd->add_flag("-q,--quiet", o.quiet, "No progress output on stderr");
}

json config_document(const CommonOptions& o) {
  json doc = o.config.empty() ? default_config_document() : read_config_document(o.config);
  apply_overrides(doc, o.sets);
  if (o.seed) {
    doc["seed"] = *o.seed;
  }
  if (o.epochs) {
    apply_overrides(doc, {"train.epochs=" + std::to_string(*o.epochs)});
  }
  if (o.workers) {
    apply_overrides(doc, {"runtime.workers=" + std::to_string(*o.workers)});
  }
  return doc;
}

RunConfig load_config(const CommonOptions& o) { return parse_run_config(config_document(o)); }

std::string utc_stamp(const char* format) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, format);
  return out.str();
}

std::filesystem::path make_run_dir(const CommonOptions& o, const std::filesystem::path& output_dir,
                                   std::uint64_t seed, const std::string& command) {
  namespace fs = std::filesystem;
  if (!o.run_dir.empty()) {
    const fs::path dir = o.run_dir;
    if (fs::exists(dir / "manifest.json")) {
      throw ConfigError("run directory " + dir.string() + " already holds a run");
    }
    fs::create_directories(dir);
    return dir;
  }
  const std::string base = utc_stamp("%Y%m%dT%H%M%SZ") + "-seed" + std::to_string(seed) + "-" + command;
  for (int attempt = 1;; ++attempt) {
    const fs::path dir = output_dir / (attempt == 1 ? base : base + "-" + std::to_string(attempt));
    fs::create_directories(dir.parent_path());
    if (fs::create_directory(dir)) {
      return dir;
    }
  }
}

json seeds_json(const RunConfig& c) {
  return {{"run", c.seed},
          {"split", c.split.seed},
          {"train", c.train.seed},
          {"init", derive_seed(c.seed, "init")},
          {"synthetic", c.data.synthetic.seed}};
}

json split_counts(const SplitDataset& s) {
  return {{"events", s.train.num_events},
          {"train_patients", s.train.num_patients},
          {"train_positives", s.train.positives.size()},
          {"test_patients", s.test_visible.num_patients},
          {"test_visible_positives", s.test_visible.positives.size()},
          {"test_heldout_positives", s.test_heldout.size()}};
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

json manifest(const std::string& command, const RunConfig& c, const std::vector<std::string>& argv) {
  return {{"command", command},
          {"created_utc", utc_stamp("%Y-%m-%dT%H:%M:%SZ")},
          {"argv", argv},
          {"config", to_json(c)},
          {"seeds", seeds_json(c)}};
}

void progress(const CommonOptions& o, const std::string& text) {
  if (!o.quiet) {
    std::cerr << text << '\n';
  }
}

std::function<void(const EpochLog&)> epoch_printer(const CommonOptions& o, std::size_t epochs,
                                                   const std::string& label) {
  if (o.quiet) {
    return {};
  }
  const std::size_t every = std::max<std::size_t>(1, epochs / 20);
  return [every, epochs, label](const EpochLog& log) {
    if (log.epoch % every == 0 || log.epoch + 1 == epochs) {
      std::cerr << label << "epoch " << log.epoch + 1 << '/' << epochs << " loss " << std::fixed
                << std::setprecision(4) << log.loss << " invisible " << log.invisible << " relaxed_rate "
                << std::setprecision(3) << log.relaxed_rate << std::defaultfloat << '\n';
    }
  };
}

std::size_t workers_of(const RunConfig& c) { return resolve_workers(c.runtime.workers, 1u << 20); }

// ---------------------------------------------------------------- generate

int cmd_generate(const CommonOptions& o, const std::vector<std::string>& argv) {
  auto c = load_config(o);
  if (c.data.kind != DataSource::Kind::synthetic) {
    throw ConfigError("generate needs data.source = \"synthetic\"");
  }
  const auto dir = make_run_dir(o, c.output_dir, c.seed, "generate");
  const auto synthetic = generate_synthetic(c.data.synthetic);
  const auto& d = synthetic.dataset;
  write_triplets(dir / "triplets.csv", d);
  write_demographics(dir / "demographics.csv", d);
  write_events(dir / "events.csv", d);
  write_edges(dir / "ground_truth.csv", synthetic.ground_truth, d.patient_ids, d.event_labels);
  auto m = manifest("generate", c, argv);
  m["counts"] = {{"patients", d.num_patients},
                 {"events", d.num_events},
                 {"observed_positives", d.positives.size()},
                 {"ground_truth_positives", synthetic.ground_truth.size()},
                 {"observed_density", d.density()}};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << d.num_patients << " patients, " << d.num_events << " events, " << d.positives.size()
            << " observed positives (density " << d.density() << ") to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- split

int cmd_split(const CommonOptions& o, const std::vector<std::string>& argv) {
  auto c = load_config(o);
  const auto dir = make_run_dir(o, c.output_dir, c.seed, "split");
  const auto s = prepare_split(c);
  save_split(dir / "split", s, c.split);
  auto m = manifest("split", c, argv);
  m["counts"] = split_counts(s);
  write_json(dir / "manifest.json", m);
  std::cout << "split: " << s.train.num_patients << " train / " << s.test_visible.num_patients
            << " test patients, " << s.train.num_events << " events, " << s.test_heldout.size()
            << " held-out positives -> " << (dir / "split").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const CommonOptions& o, const std::string& split_dir, const std::vector<std::string>& argv) {
  auto c = load_config(o);
  const auto dir = make_run_dir(o, c.output_dir, c.seed, "train");
  const auto start = Clock::now();
  const SplitDataset s = split_dir.empty() ? prepare_split(c) : load_split(split_dir);
  save_split(dir / "split", s, c.split);
  progress(o, "split ready: " + std::to_string(s.train.num_patients) + " train patients, " +
                  std::to_string(s.train.num_events) + " events");
  const auto train_start = Clock::now();
  auto model = fit_model(s, c.model, c.train, derive_seed(c.seed, "init"), epoch_printer(o, c.train.epochs, ""));
  const double train_seconds = seconds_since(train_start);
  save_checkpoint(dir / "checkpoint.bin", model.config, model.params);
  write_training_log(dir / "train_log.csv", model.history);

  auto m = manifest("train", c, argv);
  m["counts"] = split_counts(s);
  m["counts"]["parameters"] = model.params.parameter_count();
  m["counts"]["svd_noise_columns"] = model.noise_columns;
  if (!split_dir.empty()) {
    m["inputs"] = {{"split", split_dir}};
  }
  m["final_loss"] = model.history.empty() ? json(nullptr) : json(model.history.back().loss);
  m["timing"] = {{"train_seconds", train_seconds}, {"total_seconds", seconds_since(start)}};
  write_json(dir / "manifest.json", m);
  std::cout << "trained " << model.history.size() << " epochs in " << std::fixed << std::setprecision(1)
            << train_seconds << " s, final loss " << std::setprecision(6)
            << (model.history.empty() ? 0.0 : model.history.back().loss) << std::defaultfloat << "\nrun directory "
            << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- evaluate

std::string mean_std(const SummaryStat& s) {
  if (s.count == 0) {
    return "n/a";
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << s.mean << " ± " << s.stddev;
  return out.str();
}

std::string duration(double seconds) {
  std::ostringstream out;
  out << std::fixed;
  if (seconds < 120) {
    out << std::setprecision(1) << seconds << " s";
  } else if (seconds < 7200) {
    out << std::setprecision(1) << seconds / 60 << " min";
  } else {
    out << std::setprecision(2) << seconds / 3600 << " h";
  }
  return out.str();
}

std::string display_name(Imputer imputer, std::size_t k) {
  switch (imputer) {
    case Imputer::model:
      return "Graph model";
    case Imputer::knn:
      return std::to_string(k) + "-NN";
    case Imputer::frequency:
      return "Train frequency";
  }
  return "?";
}

std::string file_tag(CutoffPolicy p) { return p == CutoffPolicy::fixed ? "cutoff0.5" : "cutoffavg"; }

struct EvaluateOptionsCli {
  std::string run;
  std::string checkpoint;
  std::string split;
  std::string cutoff = "both";
  std::vector<std::string> imputers;
};

std::vector<CutoffPolicy> policies_of(const std::string& cutoff) {
  if (cutoff == "both") {
    return {CutoffPolicy::fixed, CutoffPolicy::train_frequency};
  }
  return {parse_cutoff_policy(cutoff)};
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  auto display_width = [](const std::string& s) {
    // "±" is two bytes in UTF-8 but one column.
    std::size_t w = 0;
    for (unsigned char ch : s) {
      w += (ch & 0xC0) != 0x80;
    }
    return w;
  };
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      width[k] = std::max(width[k], display_width(row[k]));
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].size(); ++k) {
      out << rows[r][k] << std::string(width[k] - display_width(rows[r][k]) + (k + 1 < rows[r].size() ? 2 : 0), ' ');
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) {
        total += w + 2;
      }
      out << std::string(total - 2, '-') << '\n';
    }
  }
}

int cmd_evaluate(CommonOptions o, const EvaluateOptionsCli& e, const std::vector<std::string>& argv) {
  namespace fs = std::filesystem;
  std::optional<json> source_manifest;
  std::string checkpoint = e.checkpoint;
  std::string split_dir = e.split;
  if (!e.run.empty()) {
    const fs::path run = e.run;
    if (!fs::exists(run / "manifest.json")) {
      throw ConfigError("no manifest.json in " + run.string());
    }
    std::ifstream in(run / "manifest.json");
    source_manifest = json::parse(in);
    if (o.config.empty()) {
      o.config = (run / "manifest.json").string();
    }
    if (checkpoint.empty() && fs::exists(run / "checkpoint.bin")) {
      checkpoint = (run / "checkpoint.bin").string();
    }
    if (split_dir.empty()) {
      split_dir = (run / "split").string();
    }
  }
  auto c = load_config(o);
  std::vector<Imputer> imputers;
  for (const auto& name : e.imputers) {
    imputers.push_back(parse_imputer(name));
  }
  if (imputers.empty()) {
    imputers.push_back(Imputer::model);
  }
  const auto policies = policies_of(e.cutoff);
  const bool needs_model = std::find(imputers.begin(), imputers.end(), Imputer::model) != imputers.end();
  if (needs_model && checkpoint.empty()) {
    throw ConfigError("the graph imputer needs --run or --checkpoint");
  }

  const auto dir = make_run_dir(o, c.output_dir, c.seed, "evaluate");
  const SplitDataset s = split_dir.empty() ? prepare_split(c) : load_split(split_dir);
  std::optional<TrainedModel> model;
  if (needs_model) {
    model.emplace();
    load_checkpoint(checkpoint, model->config, model->params);
  }
  const std::size_t workers = workers_of(c);

  std::vector<MethodReports> all;
  std::vector<std::vector<std::string>> table{
      {"Method", "Cutoff", "Sensitivity", "Specificity", "Balanced accuracy", "Runtime"}};
  json summary = json::object();
  for (const auto imputer : imputers) {
    const auto start = Clock::now();
    const Matrix scores = imputer_score_grid(imputer, s, c.knn, workers, model ? &*model : nullptr);
    MethodReports method{to_string(imputer), {}};
    for (const auto policy : policies) {
      method.reports.push_back(evaluate_split(scores, s, policy, workers));
    }
    double runtime = seconds_since(start);
    if (imputer == Imputer::model && source_manifest && source_manifest->contains("timing")) {
      runtime += (*source_manifest)["timing"].value("train_seconds", 0.0);
    }
    json& entry = summary[method.method];
    entry["runtime_seconds"] = runtime;
    for (const auto& r : method.reports) {
      write_per_event_csv(dir / ("per_event_" + method.method + "_" + file_tag(r.policy) + ".csv"), r,
                          s.train.event_labels);
      auto stat = [](const SummaryStat& st) { return json{{"mean", st.mean}, {"std", st.stddev}, {"count", st.count}}; };
      entry[to_string(r.policy)] = {{"sensitivity", stat(r.sensitivity)},
                                    {"specificity", stat(r.specificity)},
                                    {"balanced_accuracy", stat(r.balanced_accuracy)},
                                    {"events_without_positives", r.events_without_positives}};
      table.push_back({display_name(imputer, c.knn.k_neighbors), to_string(r.policy), mean_std(r.sensitivity),
                       mean_std(r.specificity), mean_std(r.balanced_accuracy), duration(runtime)});
    }
    all.push_back(std::move(method));
  }
  write_summary_csv(dir / "summary.csv", all);
  write_json(dir / "summary.json", summary);

  auto m = manifest("evaluate", c, argv);
  m["inputs"] = {{"run", e.run}, {"checkpoint", checkpoint}, {"split", split_dir}};
  m["options"] = {{"cutoff", e.cutoff}, {"imputers", e.imputers}};
  m["counts"] = split_counts(s);
  write_json(dir / "manifest.json", m);

  print_table(std::cout, table);
  std::cout << "\nrun directory " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- compare-samplers

void write_marginal_table(const std::filesystem::path& path, const SplitDataset& s, const RunConfig& c) {
  const auto g = BipartiteGraph::build(s.train.positives, s.train.num_patients, s.train.num_events);
  // The first training iteration's batch under each sampler.
  const auto seed = derive_seed(c.train.seed, "train.batch", 0);
  const auto v1 = sample_batch(g, c.train.mask_probability, NegativeSampler::uniform, seed, c.train.max_repair_sweeps);
  const auto v2 = sample_batch(g, c.train.mask_probability, NegativeSampler::degree_preserving, seed,
                               c.train.max_repair_sweeps);
  const auto t1 = marginals(v1.invisible, v1.negative, g.num_patients(), g.num_events());
  const auto t2 = marginals(v2.invisible, v2.negative, g.num_patients(), g.num_events());
  const auto freq = event_frequencies(s.train);
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "event_id,train_frequency,invisible_v1,negative_v1,invisible_v2,negative_v2\n";
  for (std::size_t j = 0; j < g.num_events(); ++j) {
    out << s.train.event_labels[j] << ',' << format_double(freq[j]) << ',' << t1.invisible_per_event[j] << ','
        << t1.negative_per_event[j] << ',' << t2.invisible_per_event[j] << ',' << t2.negative_per_event[j] << '\n';
  }
}

int cmd_compare_samplers(const CommonOptions& o, const std::string& cutoff, const std::vector<std::string>& argv) {
  auto c = load_config(o);
  const auto policy = parse_cutoff_policy(cutoff);
  const auto dir = make_run_dir(o, c.output_dir, c.seed, "compare-samplers");
  const auto s = prepare_split(c);
  save_split(dir / "split", s, c.split);
  write_marginal_table(dir / "marginals_events.csv", s, c);
  const std::size_t workers = workers_of(c);

  auto m = manifest("compare-samplers", c, argv);
  m["counts"] = split_counts(s);
  m["options"] = {{"cutoff", cutoff}};
  std::vector<MetricsReport> reports;
  std::vector<MethodReports> summaries;
  for (const auto sampler : {NegativeSampler::uniform, NegativeSampler::degree_preserving}) {
    const std::string tag = sampler == NegativeSampler::uniform ? "v1" : "v2";
    RunConfig variant = c;
    variant.train.negative_sampler = sampler;
    m["config_" + tag] = to_json(variant);
    const auto start = Clock::now();
    auto model = fit_model(s, variant.model, variant.train, derive_seed(c.seed, "init"),
                           epoch_printer(o, variant.train.epochs, tag + " (" + to_string(sampler) + ") "));
    m["timing"]["train_seconds_" + tag] = seconds_since(start);
    save_checkpoint(dir / ("checkpoint_" + tag + ".bin"), model.config, model.params);
    write_training_log(dir / ("train_log_" + tag + ".csv"), model.history);
    const Matrix scores = model_score_grid(model.config, model.params, s, workers);
    reports.push_back(evaluate_split(scores, s, policy, workers));
    write_per_event_csv(dir / ("per_event_" + tag + ".csv"), reports.back(), s.train.event_labels);
    summaries.push_back({"graph_" + tag, {reports.back()}});
  }
  const auto profile = bias_profile(reports[0], reports[1]);
  write_bias_csv(dir / "bias_profile.csv", profile);
  write_summary_csv(dir / "summary.csv", summaries);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json spearman_json = {{"spearman_v1", opt(profile.spearman_v1)}, {"spearman_v2", opt(profile.spearman_v2)}};
  if (profile.spearman_v1 && profile.spearman_v2) {
    spearman_json["difference"] = *profile.spearman_v1 - *profile.spearman_v2;
  }
  write_json(dir / "summary.json", spearman_json);
  m["results"] = spearman_json;
  write_json(dir / "manifest.json", m);

  auto show = [](const std::optional<double>& v) {
    std::ostringstream out;
    if (v) {
      out << std::fixed << std::setprecision(3) << *v;
    } else {
      out << "undefined";
    }
    return out.str();
  };
  std::vector<std::vector<std::string>> table{{"Sampler", "Sensitivity", "Specificity", "Balanced accuracy",
                                               "Spearman(freq, recall)"}};
  table.push_back({"V1 uniform", mean_std(reports[0].sensitivity), mean_std(reports[0].specificity),
                   mean_std(reports[0].balanced_accuracy), show(profile.spearman_v1)});
  table.push_back({"V2 degree-preserving", mean_std(reports[1].sensitivity), mean_std(reports[1].specificity),
                   mean_std(reports[1].balanced_accuracy), show(profile.spearman_v2)});
  print_table(std::cout, table);
  std::cout << "\nrecall by train-frequency bin (cutoff " << to_string(policy) << ")\n";
  std::vector<std::vector<std::string>> bins{{"Frequency", "Events", "Recall V1", "Recall V2"}};
  for (const auto& b : profile.bins) {
    std::ostringstream range;
    range << std::setprecision(3) << b.lower << "-" << b.upper;
    bins.push_back({range.str(), std::to_string(b.events), show(b.recall_v1), show(b.recall_v2)});
  }
  print_table(std::cout, bins);
  std::cout << "\nrun directory " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- export-embeddings

int cmd_export(CommonOptions o, const std::string& run, std::size_t neighbors, bool initial,
               const std::vector<std::string>& argv) {
  namespace fs = std::filesystem;
  const fs::path source = run;
  if (!fs::exists(source / "checkpoint.bin")) {
    throw ConfigError("no checkpoint.bin in " + source.string());
  }
  if (o.config.empty()) {
    o.config = (source / "manifest.json").string();
  }
  auto c = load_config(o);
  const auto dir = make_run_dir(o, c.output_dir, c.seed, "export-embeddings");
  const auto s = load_split(source / "split");
  ModelConfig mc;
  ModelParams params;
  load_checkpoint(source / "checkpoint.bin", mc, params);
  const Matrix embeddings = initial ? params.event_embeddings : inference_latents(mc, params, s).events;
  export_event_embeddings(dir / "events", embeddings, s.train.event_labels, s.train.event_categories, neighbors);
  auto m = manifest("export-embeddings", c, argv);
  m["inputs"] = {{"run", run}};
  m["options"] = {{"neighbors", neighbors}, {"stage", initial ? "initial" : "message_passed"}};
  m["counts"] = {{"events", embeddings.rows()}, {"dimension", embeddings.cols()}};
  write_json(dir / "manifest.json", m);
  std::cout << "wrote " << embeddings.rows() << " event embeddings to " << (dir / "events_embeddings.csv").string()
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Impute sparse unary patient x event data with a bipartite graph model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ehrgraph 1.0.0");
  const std::vector<std::string> args(argv, argv + argc);

  CommonOptions common;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as triplet and demographics files");
  add_common(generate, common, false);

  auto* split = app.add_subcommand("split", "Filter rare events and split patients into train and test");
  add_common(split, common, false);

  std::string train_split;
  auto* train = app.add_subcommand("train", "Train the graph model; writes checkpoint, log and manifest");
  add_common(train, common, true);
  train->add_option("--split", train_split, "Reuse a saved split directory instead of splitting again");

  EvaluateOptionsCli eval;
  auto* evaluate = app.add_subcommand("evaluate", "Per-event sensitivity, specificity and balanced accuracy");
  add_common(evaluate, common, false);
  evaluate->add_option("--run", eval.run, "A train run directory (checkpoint, split and config)");
  evaluate->add_option("--checkpoint", eval.checkpoint, "Model checkpoint file");
  evaluate->add_option("--split", eval.split, "Split directory");
  evaluate->add_option("--cutoff", eval.cutoff, "0.5, avg or both")
      ->check(CLI::IsMember({"0.5", "avg", "fixed", "train_frequency", "both"}))
      ->capture_default_str();
  evaluate->add_option("--imputer", eval.imputers, "graph, knn, frequency (repeat or comma-separate)")
      ->delimiter(',');

  std::string compare_cutoff = "0.5";
  auto* compare = app.add_subcommand("compare-samplers", "Train with uniform and degree-preserving negatives");
  add_common(compare, common, true);
  compare->add_option("--cutoff", compare_cutoff, "Cutoff for the recall comparison (0.5 or avg)")
      ->check(CLI::IsMember({"0.5", "avg", "fixed", "train_frequency"}))
      ->capture_default_str();

  std::string export_run;
  std::size_t export_neighbors = 10;
  bool export_initial = false;
  auto* exporter = app.add_subcommand("export-embeddings", "Write event latents and cosine neighbour lists");
  add_common(exporter, common, false);
  exporter->add_option("--run", export_run, "A train run directory")->required();
  exporter->add_option("-k,--neighbors", export_neighbors, "Neighbours per event")->capture_default_str();
  exporter->add_flag("--initial", export_initial, "Export the learned input embeddings instead of the latents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*generate) {
      return cmd_generate(common, args);
    }
    if (*split) {
      return cmd_split(common, args);
    }
    if (*train) {
      return cmd_train(common, train_split, args);
    }
    if (*evaluate) {
      return cmd_evaluate(common, eval, args);
    }
    if (*compare) {
      return cmd_compare_samplers(common, compare_cutoff, args);
    }
    if (*exporter) {
      return cmd_export(common, export_run, export_neighbors, export_initial, args);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
