#include "ehrgraph/model.hpp"

#include <algorithm>
#include <cmath>

namespace ehrgraph {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void xavier(Matrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    w.data()[k] = (2.0 * uniform01(rng) - 1.0) * bound;
  }
}

void xavier(Vector& w, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + 1));
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    w[k] = (2.0 * uniform01(rng) - 1.0) * bound;
  }
}

}  // namespace

std::string to_string(EmbeddingInit init) { return init == EmbeddingInit::svd ? "svd" : "random"; }

EmbeddingInit parse_embedding_init(const std::string& name) {
  if (name == "svd") {
    return EmbeddingInit::svd;
  }
  if (name == "random") {
    return EmbeddingInit::random;
  }
  throw ConfigError("unknown embedding init '" + name + "' (expected svd or random)");
}

void ModelConfig::validate() const {
  if (embedding_dim == 0) {
    throw ConfigError("model.embedding_dim must be >= 1");
  }
  if (num_layers == 0) {
    throw ConfigError("model.num_layers must be >= 1");
  }
  if (scorer_hidden == 0) {
    throw ConfigError("model.scorer_hidden must be >= 1");
  }
  if (demographics_dim == 0) {
    throw ConfigError("model.demographics_dim must be >= 1");
  }
}

ModelParams ModelParams::zeros(const ModelConfig& config, std::size_t num_events) {
  config.validate();
  const auto d = idx(config.embedding_dim);
  const auto h = idx(config.scorer_hidden);
  ModelParams p;
  p.event_embeddings = Matrix::Zero(idx(num_events), d);
  p.encoder_weight = Matrix::Zero(d, idx(config.demographics_dim));
  p.encoder_bias = Vector::Zero(d);
  p.layers.resize(config.num_layers);
  for (auto& layer : p.layers) {
    layer.patient_self = Matrix::Zero(d, d);
    layer.patient_neigh = Matrix::Zero(d, d);
    layer.event_self = Matrix::Zero(d, d);
    layer.event_neigh = Matrix::Zero(d, d);
    layer.patient_bias = Vector::Zero(config.layer_bias ? d : 0);
    layer.event_bias = Vector::Zero(config.layer_bias ? d : 0);
  }
  p.scorer_hidden_weight = Matrix::Zero(h, 2 * d);
  p.scorer_hidden_bias = Vector::Zero(h);
  p.scorer_out_weight = Vector::Zero(h);
  p.scorer_out_bias = Vector::Zero(1);
  return p;
}

std::vector<TensorView> ModelParams::tensors() {
  std::vector<TensorView> out;
  auto add = [&](std::string name, auto& t) {
    if (t.size() > 0) {
      out.push_back({std::move(name), std::span<double>(t.data(), static_cast<std::size_t>(t.size())), t.rows(),
                     t.cols()});
    }
  };
  add("event_embeddings", event_embeddings);
  add("encoder.weight", encoder_weight);
  add("encoder.bias", encoder_bias);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    add(prefix + "patient_self", layers[l].patient_self);
    add(prefix + "patient_neigh", layers[l].patient_neigh);
    add(prefix + "event_self", layers[l].event_self);
    add(prefix + "event_neigh", layers[l].event_neigh);
    add(prefix + "patient_bias", layers[l].patient_bias);
    add(prefix + "event_bias", layers[l].event_bias);
  }
  add("scorer.hidden_weight", scorer_hidden_weight);
  add("scorer.hidden_bias", scorer_hidden_bias);
  add("scorer.out_weight", scorer_out_weight);
  add("scorer.out_bias", scorer_out_bias);
  return out;
}

std::size_t ModelParams::parameter_count() {
  std::size_t total = 0;
  for (const auto& t : tensors()) {
    total += t.values.size();
  }
  return total;
}

bool ModelParams::all_finite() {
  for (const auto& t : tensors()) {
    for (const double v : t.values) {
      if (!std::isfinite(v)) {
        return false;
      }
    }
  }
  return true;
}

ModelParams init_params(const ModelConfig& config, std::size_t num_events, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(config, num_events);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.embedding_dim)));
  for (Eigen::Index k = 0; k < p.event_embeddings.size(); ++k) {
    p.event_embeddings.data()[k] = normal(rng);
  }
  xavier(p.encoder_weight, rng);
  for (auto& layer : p.layers) {
    xavier(layer.patient_self, rng);
    xavier(layer.patient_neigh, rng);
    xavier(layer.event_self, rng);
    xavier(layer.event_neigh, rng);
  }
  xavier(p.scorer_hidden_weight, rng);
  xavier(p.scorer_out_weight, p.scorer_out_weight.size(), rng);
  return p;
}

ModelParams init_model(const ModelConfig& config, const BipartiteGraph& train, std::uint64_t seed,
                       std::size_t* noise_columns) {
  ModelParams p = init_params(config, train.num_events(), derive_seed(seed, "init.weights"));
  if (config.embedding_init == EmbeddingInit::svd) {
    auto svd = init_event_embeddings_svd(train, config.embedding_dim, config.svd_power_iters,
                                         derive_seed(seed, "init.svd"));
    p.event_embeddings = std::move(svd.embeddings);
    if (noise_columns != nullptr) {
      *noise_columns = svd.noise_columns;
    }
  } else if (noise_columns != nullptr) {
    *noise_columns = 0;
  }
  return p;
}

Matrix encode_patients(const ModelParams& params, const Matrix& demographics) {
  if (demographics.cols() != params.encoder_weight.cols()) {
    throw Error("demographics have " + std::to_string(demographics.cols()) + " columns, encoder expects " +
                std::to_string(params.encoder_weight.cols()));
  }
  Matrix out = demographics * params.encoder_weight.transpose();
  out.rowwise() += params.encoder_bias.transpose();
  return out.cwiseMax(0.0);
}

Matrix neighbor_mean_patients(const BipartiteGraph& g, const Matrix& event_states) {
  Matrix out = Matrix::Zero(idx(g.num_patients()), event_states.cols());
  for (std::size_t i = 0; i < g.num_patients(); ++i) {
    const auto row = g.events_of(i);
    if (row.empty()) {
      continue;
    }
    auto acc = out.row(idx(i));
    for (const auto j : row) {
      acc += event_states.row(j);
    }
    acc /= static_cast<double>(row.size());
  }
  return out;
}

Matrix neighbor_mean_events(const BipartiteGraph& g, const Matrix& patient_states) {
  Matrix out = Matrix::Zero(idx(g.num_events()), patient_states.cols());
  for (std::size_t j = 0; j < g.num_events(); ++j) {
    const auto col = g.patients_of(j);
    if (col.empty()) {
      continue;
    }
    auto acc = out.row(idx(j));
    for (const auto i : col) {
      acc += patient_states.row(i);
    }
    acc /= static_cast<double>(col.size());
  }
  return out;
}

Latents message_pass(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& g,
                     const Matrix& patient_init, const Matrix& event_init, ForwardTrace* trace) {
  if (static_cast<std::size_t>(patient_init.rows()) != g.num_patients() ||
      static_cast<std::size_t>(event_init.rows()) != g.num_events()) {
    throw Error("node state rows do not match graph partitions");
  }
  if (trace != nullptr) {
    *trace = ForwardTrace{};
  }
  Matrix hp = patient_init;
  Matrix he = event_init;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const LayerParams& layer = params.layers[l];
    Matrix mean_p = neighbor_mean_patients(g, he);
    Matrix mean_e = neighbor_mean_events(g, hp);
    Matrix zp = hp * layer.patient_self.transpose();
    zp.noalias() += mean_p * layer.patient_neigh.transpose();
    Matrix ze = he * layer.event_self.transpose();
    ze.noalias() += mean_e * layer.event_neigh.transpose();
    if (layer.patient_bias.size() > 0) {
      zp.rowwise() += layer.patient_bias.transpose();
      ze.rowwise() += layer.event_bias.transpose();
    }
    const bool last = l + 1 == config.num_layers;
    Matrix next_p = last ? zp : Matrix(zp.cwiseMax(0.0));
    Matrix next_e = last ? ze : Matrix(ze.cwiseMax(0.0));
    if (trace != nullptr) {
      trace->patient_in.push_back(std::move(hp));
      trace->event_in.push_back(std::move(he));
      trace->patient_mean.push_back(std::move(mean_p));
      trace->event_mean.push_back(std::move(mean_e));
      trace->patient_pre.push_back(std::move(zp));
      trace->event_pre.push_back(std::move(ze));
    }
    hp = std::move(next_p);
    he = std::move(next_e);
  }
  return {std::move(hp), std::move(he)};
}

Latents forward(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& g,
                const Matrix& demographics, ForwardTrace* trace) {
  if (params.num_events() != g.num_events()) {
    throw Error("model has " + std::to_string(params.num_events()) + " events, graph has " +
                std::to_string(g.num_events()));
  }
  return message_pass(params, config, g, encode_patients(params, demographics), params.event_embeddings, trace);
}

ScorerProjections project_for_scoring(const ModelParams& params, const Latents& latents) {
  const auto d = latents.patients.cols();
  ScorerProjections proj;
  proj.patients = latents.patients * params.scorer_hidden_weight.leftCols(d).transpose();
  proj.patients.rowwise() += params.scorer_hidden_bias.transpose();
  proj.events = latents.events * params.scorer_hidden_weight.rightCols(d).transpose();
  return proj;
}

std::vector<double> score_logits(const ModelParams& params, const ScorerProjections& proj,
                                 std::span<const Edge> pairs) {
  std::vector<double> out(pairs.size());
  const auto h = proj.patients.cols();
  const double b2 = params.scorer_out_bias[0];
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double* a = proj.patients.row(pairs[k].patient).data();
    const double* b = proj.events.row(pairs[k].event).data();
    double z = b2;
    for (Eigen::Index t = 0; t < h; ++t) {
      z += params.scorer_out_weight[t] * std::max(0.0, a[t] + b[t]);
    }
    out[k] = z;
  }
  return out;
}

std::vector<double> score_edges(const ModelParams& params, const Latents& latents, std::span<const Edge> pairs) {
  for (const auto& e : pairs) {
    if (e.patient >= latents.patients.rows() || e.event >= latents.events.rows()) {
      throw Error("scored pair out of range");
    }
  }
  auto out = score_logits(params, project_for_scoring(params, latents), pairs);
  for (auto& z : out) {
    z = sigmoid(z);
  }
  return out;
}

Matrix score_grid(const ModelParams& params, const ScorerProjections& proj, std::size_t begin, std::size_t end,
                  std::size_t workers) {
  const auto n = proj.events.rows();
  const auto h = proj.events.cols();
  Matrix out(idx(end - begin), n);
  const double b2 = params.scorer_out_bias[0];
  // Event-major copy of the event projections so the inner loop over events
  // is contiguous.
  const Matrix events_t = proj.events.transpose();  // h x n
  parallel_chunks(end - begin, workers, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Vector hidden(n);
    for (std::size_t r = lo; r < hi; ++r) {
      auto logits = out.row(idx(r));
      logits.setConstant(b2);
      const auto prow = proj.patients.row(idx(begin + r));
      for (Eigen::Index t = 0; t < h; ++t) {
        hidden = (events_t.row(t).transpose().array() + prow[t]).cwiseMax(0.0);
        logits += params.scorer_out_weight[t] * hidden.transpose();
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        logits[j] = sigmoid(logits[j]);
      }
    }
  });
  return out;
}

}  // namespace ehrgraph
