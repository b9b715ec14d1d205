#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ehrgraph/common.hpp"
#include "ehrgraph/dataset.hpp"
#include "ehrgraph/graph.hpp"

namespace ehrgraph {

enum class EmbeddingInit { svd, random };

std::string to_string(EmbeddingInit init);
EmbeddingInit parse_embedding_init(const std::string& name);

struct ModelConfig {
  std::size_t embedding_dim = 95;
  std::size_t num_layers = 3;
  std::size_t scorer_hidden = 32;
  std::size_t demographics_dim = kDemographicsDim;
  /// Per-layer bias vectors. Off gives the bias-free two-sided mean update.
  bool layer_bias = true;
  EmbeddingInit embedding_init = EmbeddingInit::svd;
  std::size_t svd_power_iters = 20;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Weights of one message-passing layer. Patient rows update from their own
/// state (self) and the mean of their event neighbours (neigh); events
/// symmetrically.
struct LayerParams {
  Matrix patient_self;   // d x d
  Matrix patient_neigh;  // d x d
  Matrix event_self;     // d x d
  Matrix event_neigh;    // d x d
  Vector patient_bias;   // d, or empty when layer_bias is off
  Vector event_bias;
};

/// Named flat view of one parameter tensor.
struct TensorView {
  std::string name;
  std::span<double> values;
  Eigen::Index rows;
  Eigen::Index cols;
};

struct ModelParams {
  Matrix event_embeddings;  // n x d, initial event node states
  Matrix encoder_weight;    // d x demographics_dim
  Vector encoder_bias;      // d
  std::vector<LayerParams> layers;
  Matrix scorer_hidden_weight;  // h x 2d; columns [0,d) patient, [d,2d) event
  Vector scorer_hidden_bias;    // h
  Vector scorer_out_weight;     // h
  Vector scorer_out_bias;       // 1

  /// All-zero parameters with the shapes implied by the config.
  static ModelParams zeros(const ModelConfig& config, std::size_t num_events);

  std::size_t num_events() const { return static_cast<std::size_t>(event_embeddings.rows()); }
  std::size_t embedding_dim() const { return static_cast<std::size_t>(event_embeddings.cols()); }

  /// Every tensor in a fixed order. Empty tensors (disabled biases) are skipped.
  std::vector<TensorView> tensors();
  std::size_t parameter_count();
  bool all_finite();
};

/// Xavier-uniform weights, zero biases, N(0, 1/d) event embeddings.
ModelParams init_params(const ModelConfig& config, std::size_t num_events, std::uint64_t seed);

struct SvdEmbeddings {
  Matrix embeddings;  // n x d
  Vector singular_values;
  std::size_t noise_columns = 0;  // columns beyond the numerical rank
};

/// Top-d right singular vectors of the binary train matrix, each scaled by
/// sqrt(singular value), via randomized subspace iteration on the sparse
/// matrix. Columns beyond the numerical rank are filled with small Gaussian
/// noise and counted in noise_columns.
SvdEmbeddings init_event_embeddings_svd(const BipartiteGraph& train, std::size_t d, std::size_t power_iters,
                                        std::uint64_t seed);

/// Initializes parameters and, for EmbeddingInit::svd, overwrites the event
/// embeddings with the SVD of the train graph.
ModelParams init_model(const ModelConfig& config, const BipartiteGraph& train, std::uint64_t seed,
                       std::size_t* noise_columns = nullptr);

/// rectifier(demographics * W^T + b), one row per patient.
Matrix encode_patients(const ModelParams& params, const Matrix& demographics);

/// Row i = mean of rows of `event_states` over i's event neighbours; zero
/// for isolated patients.
Matrix neighbor_mean_patients(const BipartiteGraph& g, const Matrix& event_states);
/// Row j = mean of rows of `patient_states` over j's patient neighbours.
Matrix neighbor_mean_events(const BipartiteGraph& g, const Matrix& patient_states);

struct Latents {
  Matrix patients;  // m x d
  Matrix events;    // n x d
};

/// Intermediates kept for the backward pass: the inputs, neighbour means and
/// pre-activations of every layer.
struct ForwardTrace {
  std::vector<Matrix> patient_in;
  std::vector<Matrix> event_in;
  std::vector<Matrix> patient_mean;
  std::vector<Matrix> event_mean;
  std::vector<Matrix> patient_pre;
  std::vector<Matrix> event_pre;
};

/// Stacked synchronous two-sided mean aggregation with a rectifier between
/// layers (none after the last).
Latents message_pass(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& g,
                     const Matrix& patient_init, const Matrix& event_init, ForwardTrace* trace = nullptr);

/// Full forward pass: encoder, event embeddings, message passing.
Latents forward(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& g,
                const Matrix& demographics, ForwardTrace* trace = nullptr);

/// Scorer first layer split into its patient and event halves so each pair
/// costs O(h) instead of O(h * d).
struct ScorerProjections {
  Matrix patients;  // m x h, includes the hidden bias
  Matrix events;    // n x h
};

ScorerProjections project_for_scoring(const ModelParams& params, const Latents& latents);

/// sigmoid(w2 . relu(W1 [hp ; he] + b1) + b2) for each pair.
std::vector<double> score_edges(const ModelParams& params, const Latents& latents, std::span<const Edge> pairs);

/// Logits instead of probabilities.
std::vector<double> score_logits(const ModelParams& params, const ScorerProjections& proj,
                                 std::span<const Edge> pairs);

/// Probabilities for patients [begin, end) against every event.
Matrix score_grid(const ModelParams& params, const ScorerProjections& proj, std::size_t begin, std::size_t end,
                  std::size_t workers = 1);

/// Binary checkpoint: magic, version, config, then every tensor with its name
/// and shape. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, ModelParams& params);
void load_checkpoint(const std::filesystem::path& path, ModelConfig& config, ModelParams& params);

}  // namespace ehrgraph
