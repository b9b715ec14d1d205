#include "ehrgraph/pipeline.hpp"

namespace ehrgraph {

Dataset load_source(const RunConfig& config) {
  if (config.data.kind == DataSource::Kind::synthetic) {
    return generate_synthetic(config.data.synthetic).dataset;
  }
  return load_triplets(config.data.triplets, config.data.demographics);
}

SplitDataset prepare_split(const RunConfig& config) { return filter_and_split(load_source(config), config.split); }

TrainedModel fit_model(const SplitDataset& split, const ModelConfig& model_config, const TrainConfig& train_config,
                       std::uint64_t init_seed, const std::function<void(const EpochLog&)>& on_epoch) {
  const auto graph = BipartiteGraph::build(split.train.positives, split.train.num_patients, split.train.num_events);
  TrainedModel out;
  out.config = model_config;
  auto state = make_train_state(init_model(model_config, graph, init_seed, &out.noise_columns));
  train(state, model_config, graph, split.train.demographics, train_config, on_epoch);
  out.params = std::move(state.params);
  out.history = std::move(state.history);
  return out;
}

InferenceGraph inference_graph(const SplitDataset& split) {
  const std::size_t m_train = split.train.num_patients;
  const std::size_t m_test = split.test_visible.num_patients;
  EdgeList edges = split.train.positives;
  edges.reserve(edges.size() + split.test_visible.positives.size());
  for (const auto& e : split.test_visible.positives) {
    edges.push_back({static_cast<std::uint32_t>(e.patient + m_train), e.event});
  }
  InferenceGraph out;
  out.graph = BipartiteGraph::build(edges, m_train + m_test, split.train.num_events);
  out.demographics.resize(static_cast<Eigen::Index>(m_train + m_test), split.train.demographics.cols());
  out.demographics.topRows(static_cast<Eigen::Index>(m_train)) = split.train.demographics;
  out.demographics.bottomRows(static_cast<Eigen::Index>(m_test)) = split.test_visible.demographics;
  out.test_offset = m_train;
  return out;
}

Latents inference_latents(const ModelConfig& config, const ModelParams& params, const SplitDataset& split) {
  if (params.num_events() != split.train.num_events) {
    throw Error("checkpoint has " + std::to_string(params.num_events()) + " events but the split has " +
                std::to_string(split.train.num_events));
  }
  const auto g = inference_graph(split);
  return forward(params, config, g.graph, g.demographics);
}

Matrix model_score_grid(const ModelConfig& config, const ModelParams& params, const SplitDataset& split,
                        std::size_t workers) {
  const auto latents = inference_latents(config, params, split);
  const auto proj = project_for_scoring(params, latents);
  const std::size_t begin = split.train.num_patients;
  return score_grid(params, proj, begin, begin + split.test_visible.num_patients, workers);
}

std::string to_string(Imputer imputer) {
  switch (imputer) {
    case Imputer::model:
      return "graph";
    case Imputer::knn:
      return "knn";
    case Imputer::frequency:
      return "frequency";
  }
  return "unknown";
}

Imputer parse_imputer(const std::string& name) {
  if (name == "model" || name == "graph") {
    return Imputer::model;
  }
  if (name == "knn") {
    return Imputer::knn;
  }
  if (name == "frequency") {
    return Imputer::frequency;
  }
  throw ConfigError("unknown imputer '" + name + "' (expected model, knn or frequency)");
}

Matrix imputer_score_grid(Imputer imputer, const SplitDataset& split, const KnnConfig& knn, std::size_t workers,
                          const TrainedModel* model) {
  switch (imputer) {
    case Imputer::model:
      if (model == nullptr) {
        throw ConfigError("the graph imputer needs a trained model");
      }
      return model_score_grid(model->config, model->params, split, workers);
    case Imputer::knn:
      return knn_score_grid(split.train, split.test_visible, knn, workers);
    case Imputer::frequency:
      return frequency_score_grid(split.train, split.test_visible.num_patients);
  }
  throw Error("unknown imputer");
}

MetricsReport evaluate_split(const Matrix& scores, const SplitDataset& split, CutoffPolicy policy,
                             std::size_t workers) {
  EvaluateOptions options;
  options.workers = workers;
  return evaluate(scores, split.test_visible, split.test_heldout, policy, event_frequencies(split.train), options);
}

}  // namespace ehrgraph
