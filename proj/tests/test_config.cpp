#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "ehrgraph/config.hpp"
#include "support.hpp"

using namespace ehrgraph;
using namespace ehrgraph::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

json small_config() {
  json doc = default_config_document();
  doc["data"]["synthetic"]["patients"] = 700;
  doc["data"]["synthetic"]["events"] = 50;
  doc["model"]["embedding_dim"] = 12;
  doc["train"]["epochs"] = 8;
  doc["runtime"]["workers"] = 1;
  return doc;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const auto path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string command = std::string(EHRGRAPH_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  for (std::stringstream ss(line); std::getline(ss, line, ',');) {
    header.push_back(line);
  }
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    Row row;
    std::stringstream ss(line);
    for (const auto& h : header) {
      std::string cell;
      std::getline(ss, cell, ',');
      row[h] = cell;
    }
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> cell(const Row& row, const std::string& key) {
  const auto& v = row.at(key);
  if (v.empty() || v == "nan" || v == "NA") {
    return std::nullopt;
  }
  return std::stod(v);
}

// Mean and population standard deviation over defined values.
std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) {
    var += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) {
      ++j;
    }
    for (std::size_t t = i; t <= j; ++t) {
      ranks[order[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
    }
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto [mx, sx] = mean_std(rx);
  const auto [my, sy] = mean_std(ry);
  double cov = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
  }
  return cov / static_cast<double>(rx.size()) / (sx * sy);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

}  // namespace

TEST_CASE("default config round-trips through to_json") {
  const auto c = parse_run_config(default_config_document());
  CHECK(to_json(c) == default_config_document());
  CHECK(c.model.embedding_dim == 95);
  CHECK(c.model.num_layers == 3);
  CHECK(c.train.learning_rate == doctest::Approx(0.0066));
  CHECK(c.train.mask_probability == doctest::Approx(0.2));
  CHECK(c.split.train_fraction == doctest::Approx(0.7));
  CHECK(c.split.test_mask_fraction == doctest::Approx(0.3));
  CHECK(c.split.min_event_frequency == doctest::Approx(0.001));
}

TEST_CASE("missing and unknown fields are named") {
  json doc = default_config_document();
  doc["train"].erase("learning_rate");
  CHECK(config_error(doc) == "missing config field 'train.learning_rate'");

  doc = default_config_document();
  doc.erase("seed");
  CHECK(config_error(doc) == "missing config field 'seed'");

  doc = default_config_document();
  doc["model"]["dropout"] = 0.1;
  CHECK(config_error(doc) == "unknown config field 'model.dropout'");

  doc = default_config_document();
  doc["model"]["num_layers"] = "three";
  CHECK(config_error(doc).find("model.num_layers") != std::string::npos);

  doc = default_config_document();
  doc["train"]["mask_probability"] = 1.5;
  CHECK(!config_error(doc).empty());

  doc = default_config_document();
  doc["train"]["grad_clip"] = nullptr;
  CHECK(config_error(doc).empty());
}

TEST_CASE("overrides parse values as JSON") {
  json doc = default_config_document();
  apply_overrides(doc, {"train.epochs=7", "train.negative_sampler=uniform", "runtime.deterministic=false",
                        "train.grad_clip=1.5"});
  const auto c = parse_run_config(doc);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.negative_sampler == NegativeSampler::uniform);
  CHECK(!c.runtime.deterministic);
  CHECK(c.train.grad_clip == doctest::Approx(1.5));
  CHECK_THROWS_AS(apply_overrides(doc, {"train.epochs"}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(doc, {"nosuch.section=1"}), ConfigError);
}

TEST_CASE("config files and run manifests load alike") {
  const auto dir = scratch_dir("config_files");
  json doc = small_config();
  const auto path = write_config(dir, doc);
  CHECK(read_config_document(path) == doc);
  std::ofstream(dir / "manifest.json") << json{{"command", "train"}, {"config", doc}}.dump();
  CHECK(read_config_document(dir / "manifest.json", {"seed=9"})["seed"] == 9);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(read_config_document(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(read_config_document(dir / "absent.json"), ConfigError);
}

TEST_CASE("distinct stage seeds are derived from the run seed") {
  auto a = parse_run_config(small_config());
  json doc = small_config();
  doc["seed"] = 2;
  auto b = parse_run_config(doc);
  CHECK(a.split.seed != b.split.seed);
  CHECK(a.train.seed != b.train.seed);
  CHECK(a.split.seed != a.train.seed);
  CHECK(a.data.synthetic.seed != a.split.seed);
}

TEST_CASE("cli: bad configs exit with status 2 and one error line") {
  const auto dir = scratch_dir("cli_errors");
  json doc = small_config();
  doc["model"].erase("num_layers");
  const auto path = write_config(dir, doc);
  CHECK(run_cli("train -q -c " + path.string() + " --run-dir " + (dir / "run").string(), dir / "log") == 2);
  const auto log = slurp(dir / "log");
  CHECK(log == "error: missing config field 'model.num_layers'\n");
  CHECK(!fs::exists(dir / "run" / "checkpoint.bin"));

  CHECK(run_cli("train --set nosuch.x=1", dir / "log") == 2);
  CHECK(run_cli("frobnicate", dir / "log") == 2);
  CHECK(run_cli("evaluate --cutoff 0.7", dir / "log") == 2);
}

TEST_CASE("cli: train, evaluate and export on a small synthetic run") {
  const auto dir = scratch_dir("cli_train");
  const auto config = write_config(dir, small_config());
  const std::string base = "-q -c " + config.string() + " --workers 1";
  REQUIRE(run_cli("train " + base + " --run-dir " + (dir / "a").string(), dir / "log") == 0);
  REQUIRE(run_cli("train " + base + " --run-dir " + (dir / "b").string(), dir / "log") == 0);
  for (const char* name : {"checkpoint.bin", "train_log.csv", "manifest.json", "split/manifest.txt"}) {
    CHECK(fs::exists(dir / "a" / name));
  }
  const auto log = read_csv(dir / "a" / "train_log.csv");
  REQUIRE(log.size() == 8);
  CHECK(slurp(dir / "a" / "checkpoint.bin") == slurp(dir / "b" / "checkpoint.bin"));
  const auto log_b = read_csv(dir / "b" / "train_log.csv");
  for (std::size_t t = 0; t < log.size(); ++t) {
    CHECK(log[t].at("loss") == log_b[t].at("loss"));
    CHECK(log[t].at("invisible") == log_b[t].at("invisible"));
  }
  const auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["final_loss"].get<double>() == std::stod(log.back().at("loss")));
  CHECK(manifest["seeds"]["init"].get<std::uint64_t>() == derive_seed(manifest["config"]["seed"], "init"));
  CHECK(manifest["config"] == small_config());

  // Refusing to overwrite an existing run.
  CHECK(run_cli("train " + base + " --run-dir " + (dir / "a").string(), dir / "log") == 2);

  REQUIRE(run_cli("evaluate -q --cutoff 0.5 --run " + (dir / "a").string() + " --run-dir " + (dir / "e").string(),
                  dir / "table") == 0);
  const auto summary = read_csv(dir / "e" / "summary.csv");
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].at("method") == "graph");
  CHECK(summary[0].at("cutoff") == "0.5");
  CHECK(!fs::exists(dir / "e" / "per_event_graph_cutoffavg.csv"));
  const auto table = slurp(dir / "table");
  CHECK(table.find("Graph model") != std::string::npos);
  CHECK(table.find("avg") == std::string::npos);

  REQUIRE(run_cli("export-embeddings -q -k 4 --run " + (dir / "a").string() + " --run-dir " + (dir / "x").string(),
                  dir / "log") == 0);
  const auto neighbours = read_csv(dir / "x" / "events_neighbors.csv");
  const auto embeddings = read_csv(dir / "x" / "events_embeddings.csv");
  CHECK(neighbours.size() == 4 * embeddings.size());
  CHECK(embeddings.front().count("z11") == 1);
  CHECK(embeddings.front().count("z12") == 0);
}

TEST_CASE("cli: summary means recompute from the per-event tables") {
  const auto dir = scratch_dir("cli_summary");
  const auto config = write_config(dir, small_config());
  REQUIRE(run_cli("train -q -c " + config.string() + " --run-dir " + (dir / "a").string(), dir / "log") == 0);
  REQUIRE(run_cli("evaluate -q --imputer graph,knn,frequency --run " + (dir / "a").string() + " --run-dir " +
                      (dir / "e").string(),
                  dir / "log") == 0);
  const auto summary = read_csv(dir / "e" / "summary.csv");
  CHECK(summary.size() == 6);
  for (const auto& row : summary) {
    const std::string tag = row.at("cutoff") == "0.5" ? "cutoff0.5" : "cutoffavg";
    const auto per_event = read_csv(dir / "e" / ("per_event_" + row.at("method") + "_" + tag + ".csv"));
    for (const std::string metric : {"sensitivity", "specificity", "balanced_accuracy"}) {
      std::vector<double> values;
      for (const auto& ev : per_event) {
        if (auto v = cell(ev, metric)) {
          values.push_back(*v);
        }
      }
      REQUIRE(!values.empty());
      const auto [mean, sd] = mean_std(values);
      CHECK(std::stod(row.at(metric + "_mean")) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(std::stod(row.at(metric + "_std")) == doctest::Approx(sd).epsilon(1e-9));
    }
    std::size_t without = 0;
    for (const auto& ev : per_event) {
      without += std::stoul(ev.at("tp")) + std::stoul(ev.at("fn")) == 0;
    }
    CHECK(std::stoul(row.at("events_without_positives")) == without);
  }
  const auto json_summary = read_json(dir / "e" / "summary.json");
  CHECK(json_summary.contains("graph"));
  CHECK(json_summary.contains("knn"));
  CHECK(json_summary["frequency"]["avg"]["sensitivity"]["mean"].get<double>() == 0.0);
}

TEST_CASE("cli: compare-samplers reports consistent Spearman values and deltas") {
  const auto dir = scratch_dir("cli_compare");
  const auto config = write_config(dir, small_config());
  REQUIRE(run_cli("compare-samplers -q -c " + config.string() + " --run-dir " + (dir / "c").string(), dir / "log") ==
          0);
  const auto summary = read_json(dir / "c" / "summary.json");
  for (const std::string tag : {"v1", "v2"}) {
    std::vector<double> freq;
    std::vector<double> recall;
    for (const auto& ev : read_csv(dir / "c" / ("per_event_" + tag + ".csv"))) {
      if (auto s = cell(ev, "sensitivity")) {
        freq.push_back(std::stod(ev.at("train_frequency")));
        recall.push_back(*s);
      }
    }
    const auto reported = summary["spearman_" + tag];
    if (reported.is_null()) {
      MESSAGE("spearman ", tag, " undefined (constant recall)");
    } else {
      CHECK(reported.get<double>() == doctest::Approx(spearman(freq, recall)).epsilon(1e-9));
    }
  }
  std::size_t binned = 0;
  for (const auto& row : read_csv(dir / "c" / "bias_profile.csv")) {
    binned += std::stoul(row.at("events"));
    const auto r1 = cell(row, "recall_v1");
    const auto r2 = cell(row, "recall_v2");
    if (r1 && r2) {
      CHECK(*cell(row, "recall_delta") == doctest::Approx(*r1 - *r2).epsilon(1e-12));
    }
  }
  const auto marginals = read_csv(dir / "c" / "marginals_events.csv");
  CHECK(binned == marginals.size());
  std::size_t inv = 0;
  std::size_t neg1 = 0;
  std::size_t neg2 = 0;
  bool v2_exact = true;
  for (const auto& row : marginals) {
    inv += std::stoul(row.at("invisible_v1"));
    neg1 += std::stoul(row.at("negative_v1"));
    neg2 += std::stoul(row.at("negative_v2"));
    v2_exact = v2_exact && row.at("invisible_v2") == row.at("negative_v2");
  }
  CHECK(neg1 == inv);
  CHECK(neg2 == inv);
  CHECK(v2_exact);
  const auto manifest = read_json(dir / "c" / "manifest.json");
  CHECK(manifest["config_v1"]["train"]["negative_sampler"] == "uniform");
  CHECK(manifest["config_v2"]["train"]["negative_sampler"] == "degree_preserving");
}
