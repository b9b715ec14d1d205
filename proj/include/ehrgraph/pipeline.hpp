#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ehrgraph/baselines.hpp"
#include "ehrgraph/config.hpp"
#include "ehrgraph/dataset.hpp"
#include "ehrgraph/evaluation.hpp"
#include "ehrgraph/graph.hpp"
#include "ehrgraph/model.hpp"
#include "ehrgraph/training.hpp"

namespace ehrgraph {

/// Source dataset of a run: generated or read from triplet files.
Dataset load_source(const RunConfig& config);

/// load_source, rare-event filter, split.
SplitDataset prepare_split(const RunConfig& config);

struct TrainedModel {
  ModelConfig config;
  ModelParams params;
  std::vector<EpochLog> history;
  std::size_t noise_columns = 0;
};

/// Initializes from the train graph and runs the configured epochs.
TrainedModel fit_model(const SplitDataset& split, const ModelConfig& model_config, const TrainConfig& train_config,
                       std::uint64_t init_seed, const std::function<void(const EpochLog&)>& on_epoch = {});

/// Train patients followed by test patients, with train positives plus the
/// test patients' visible positives as edges.
struct InferenceGraph {
  BipartiteGraph graph;
  Matrix demographics;
  std::size_t test_offset = 0;
};

InferenceGraph inference_graph(const SplitDataset& split);

/// Message-passed latents on the inference graph.
Latents inference_latents(const ModelConfig& config, const ModelParams& params, const SplitDataset& split);

/// Model probabilities for every (test patient, event) pair.
Matrix model_score_grid(const ModelConfig& config, const ModelParams& params, const SplitDataset& split,
                        std::size_t workers = 1);

enum class Imputer { model, knn, frequency };
std::string to_string(Imputer imputer);
Imputer parse_imputer(const std::string& name);

/// Scores of any imputer for every (test patient, event) pair. The model
/// imputer needs `model`; the others ignore it.
Matrix imputer_score_grid(Imputer imputer, const SplitDataset& split, const KnnConfig& knn, std::size_t workers,
                          const TrainedModel* model = nullptr);

/// evaluate() against the split's held-out positives and train frequencies.
MetricsReport evaluate_split(const Matrix& scores, const SplitDataset& split, CutoffPolicy policy,
                             std::size_t workers = 1);

}  // namespace ehrgraph
