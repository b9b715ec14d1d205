#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ehrgraph/graph.hpp"
#include "ehrgraph/model.hpp"
#include "ehrgraph/sampler.hpp"

namespace ehrgraph {

struct TrainConfig {
  double learning_rate = 0.0066;
  double mask_probability = 0.2;
  std::size_t epochs = 200;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Global L2 norm cap on the gradient; 0 freezes the parameters.
  std::optional<double> grad_clip;
  NegativeSampler negative_sampler = NegativeSampler::degree_preserving;
  std::size_t max_repair_sweeps = 10;

  void validate() const;
};

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t invisible = 0;
  bool relaxed = false;
  double relaxed_rate = 0.0;  // fraction of relaxed batches so far
  double wall_time_ms = 0.0;
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::vector<EpochLog> history;
};

TrainState make_train_state(ModelParams params);

/// -(1/2k) [ sum log p_inv + sum log(1 - p_neg) ], logs floored at log(1e-12).
double balanced_bce(std::span<const double> p_inv, std::span<const double> p_neg);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

/// Forward on `visible` (message-passing structure), balanced BCE on the
/// invisible/negative pairs, and exact reverse-mode gradients for every
/// parameter tensor. Throws naming the tensor if a gradient is not finite.
LossAndGradient loss_and_gradient(const ModelParams& params, const ModelConfig& config,
                                  const BipartiteGraph& visible, const Matrix& demographics,
                                  std::span<const Edge> invisible, std::span<const Edge> negative);

/// Loss only, same computation path as loss_and_gradient.
double batch_loss(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& visible,
                  const Matrix& demographics, std::span<const Edge> invisible, std::span<const Edge> negative);

/// Scales `gradient` in place so its global L2 norm is at most `max_norm`.
void clip_gradient(ModelParams& gradient, double max_norm);

/// Bias-corrected Adam step.
void adam_update(ModelParams& params, AdamState& adam, ModelParams& gradient, const TrainConfig& config);

/// One update on a fixed batch: gradient, optional clipping, Adam. Returns
/// the loss before the update.
double train_step(TrainState& state, const ModelConfig& model_config, const TrainConfig& config,
                  const BipartiteGraph& visible, const Matrix& demographics, std::span<const Edge> invisible,
                  std::span<const Edge> negative);

/// One full-batch iteration: mask, negatives, forward on the visible edges,
/// loss, backward, Adam. The epoch index is history.size(); all randomness
/// derives from (config.seed, epoch).
void train_epoch(TrainState& state, const ModelConfig& model_config, const BipartiteGraph& train_graph,
                 const Matrix& demographics, const TrainConfig& config);

/// Runs config.epochs epochs, calling `on_epoch` after each (may be empty).
void train(TrainState& state, const ModelConfig& model_config, const BipartiteGraph& train_graph,
           const Matrix& demographics, const TrainConfig& config,
           const std::function<void(const EpochLog&)>& on_epoch = {});

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> history);

}  // namespace ehrgraph
