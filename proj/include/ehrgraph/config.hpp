#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ehrgraph/baselines.hpp"
#include "ehrgraph/dataset.hpp"
#include "ehrgraph/model.hpp"
#include "ehrgraph/training.hpp"

namespace ehrgraph {

struct DataSource {
  enum class Kind { synthetic, files } kind = Kind::synthetic;
  std::filesystem::path triplets;
  std::filesystem::path demographics;
  SyntheticSpec synthetic;  // seed unused; derived from the run seed
};

struct RuntimeConfig {
  std::size_t workers = 0;  // 0 = all cores
  bool deterministic = true;
};

/// Everything a run needs, loaded from one JSON file. Every field is
/// required (train.grad_clip may be null) and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DataSource data;
  SplitSpec split;
  ModelConfig model;
  TrainConfig train;
  KnnConfig knn;
  RuntimeConfig runtime;
  std::filesystem::path output_dir = "runs";

  /// Propagates the top-level seed into the per-stage specs.
  void resolve_seeds();
  void validate() const;
};

/// Parses and validates. Throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);

/// Applies `key.path=value` overrides in place. Values are parsed as JSON,
/// falling back to plain strings; the parent section must already exist.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Reads a config file, or the "config" member of a run manifest, then
/// applies `key.path=value` overrides (values parsed as JSON, falling back to
/// plain strings).
nlohmann::json read_config_document(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// The built-in synthetic benchmark configuration.
nlohmann::json default_config_document();

}  // namespace ehrgraph
