#include "ehrgraph/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace ehrgraph {

namespace {

const double kLogFloor = std::log(1e-12);

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Clamped -log p for a positive target (label 1) or -log(1-p) for a negative
// target, from the logit. Also returns the derivative of the unclamped term
// with respect to the logit, so saturated mistakes still get a gradient.
std::pair<double, double> bce_term(double logit, bool positive) {
  const double log_p = log_sigmoid(positive ? logit : -logit);
  const double p = sigmoid(logit);
  return {-std::max(log_p, kLogFloor), positive ? -(1.0 - p) : p};
}

void scorer_forward_backward(const ModelParams& params, const ScorerProjections& proj, std::span<const Edge> pairs,
                             bool positive, double scale, double& loss, Matrix& d_proj_p, Matrix& d_proj_e,
                             ModelParams* grad) {
  const auto h = proj.patients.cols();
  const double b2 = params.scorer_out_bias[0];
  Vector hidden(h);
  for (const auto& e : pairs) {
    const Vector a = (proj.patients.row(e.patient) + proj.events.row(e.event)).transpose();
    hidden = a.cwiseMax(0.0);
    const double z = b2 + params.scorer_out_weight.dot(hidden);
    const auto [term, dterm] = bce_term(z, positive);
    loss += scale * term;
    if (grad == nullptr || dterm == 0.0) {
      continue;
    }
    const double dz = scale * dterm;
    grad->scorer_out_weight += dz * hidden;
    grad->scorer_out_bias[0] += dz;
    for (Eigen::Index t = 0; t < h; ++t) {
      if (a[t] > 0.0) {
        const double da = dz * params.scorer_out_weight[t];
        d_proj_p(e.patient, t) += da;
        d_proj_e(e.event, t) += da;
      }
    }
  }
}

double run(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& visible,
           const Matrix& demographics, std::span<const Edge> invisible, std::span<const Edge> negative,
           ModelParams* grad) {
  if (invisible.empty()) {
    throw Error("empty batch");
  }
  if (invisible.size() != negative.size()) {
    throw Error("invisible and negative sets must have equal size (" + std::to_string(invisible.size()) + " vs " +
                std::to_string(negative.size()) + ")");
  }
  if (static_cast<std::size_t>(demographics.rows()) != visible.num_patients()) {
    throw Error("demographics rows do not match graph patients");
  }
  for (const auto* set : {&invisible, &negative}) {
    for (const auto& e : *set) {
      if (e.patient >= visible.num_patients() || e.event >= visible.num_events()) {
        throw Error("batch pair out of range");
      }
    }
  }
  ForwardTrace trace;
  const Latents latents = forward(params, config, visible, demographics, grad != nullptr ? &trace : nullptr);
  const ScorerProjections proj = project_for_scoring(params, latents);
  const double scale = 1.0 / (2.0 * static_cast<double>(invisible.size()));

  const auto h = proj.patients.cols();
  Matrix d_proj_p;
  Matrix d_proj_e;
  if (grad != nullptr) {
    *grad = ModelParams::zeros(config, params.num_events());
    d_proj_p = Matrix::Zero(proj.patients.rows(), h);
    d_proj_e = Matrix::Zero(proj.events.rows(), h);
  }
  double loss = 0.0;
  scorer_forward_backward(params, proj, invisible, true, scale, loss, d_proj_p, d_proj_e, grad);
  scorer_forward_backward(params, proj, negative, false, scale, loss, d_proj_p, d_proj_e, grad);
  if (grad == nullptr) {
    return loss;
  }

  const auto d = latents.patients.cols();
  grad->scorer_hidden_bias = d_proj_p.colwise().sum().transpose();
  grad->scorer_hidden_weight.leftCols(d) = d_proj_p.transpose() * latents.patients;
  grad->scorer_hidden_weight.rightCols(d) = d_proj_e.transpose() * latents.events;
  Matrix d_hp = d_proj_p * params.scorer_hidden_weight.leftCols(d);
  Matrix d_he = d_proj_e * params.scorer_hidden_weight.rightCols(d);

  for (std::size_t l = config.num_layers; l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    LayerParams& g = grad->layers[l];
    if (l + 1 < config.num_layers) {
      d_hp.array() *= (trace.patient_pre[l].array() > 0.0).cast<double>();
      d_he.array() *= (trace.event_pre[l].array() > 0.0).cast<double>();
    }
    g.patient_self.noalias() = d_hp.transpose() * trace.patient_in[l];
    g.patient_neigh.noalias() = d_hp.transpose() * trace.patient_mean[l];
    g.event_self.noalias() = d_he.transpose() * trace.event_in[l];
    g.event_neigh.noalias() = d_he.transpose() * trace.event_mean[l];
    if (layer.patient_bias.size() > 0) {
      g.patient_bias = d_hp.colwise().sum().transpose();
      g.event_bias = d_he.colwise().sum().transpose();
    }
    const Matrix d_mean_p = d_hp * layer.patient_neigh;
    const Matrix d_mean_e = d_he * layer.event_neigh;
    Matrix d_hp_in = d_hp * layer.patient_self;
    Matrix d_he_in = d_he * layer.event_self;
    for (std::size_t i = 0; i < visible.num_patients(); ++i) {
      const auto row = visible.events_of(i);
      if (row.empty()) {
        continue;
      }
      const double w = 1.0 / static_cast<double>(row.size());
      for (const auto j : row) {
        d_he_in.row(j) += w * d_mean_p.row(idx(i));
      }
    }
    for (std::size_t j = 0; j < visible.num_events(); ++j) {
      const auto col = visible.patients_of(j);
      if (col.empty()) {
        continue;
      }
      const double w = 1.0 / static_cast<double>(col.size());
      for (const auto i : col) {
        d_hp_in.row(i) += w * d_mean_e.row(idx(j));
      }
    }
    d_hp = std::move(d_hp_in);
    d_he = std::move(d_he_in);
  }

  grad->event_embeddings = std::move(d_he);
  Matrix pre = demographics * params.encoder_weight.transpose();
  pre.rowwise() += params.encoder_bias.transpose();
  d_hp.array() *= (pre.array() > 0.0).cast<double>();
  grad->encoder_weight = d_hp.transpose() * demographics;
  grad->encoder_bias = d_hp.colwise().sum().transpose();

  for (const auto& t : grad->tensors()) {
    for (const double v : t.values) {
      if (!std::isfinite(v)) {
        throw Error("non-finite gradient in tensor " + t.name);
      }
    }
  }
  return loss;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be >= 0");
  }
  if (!(mask_probability > 0.0 && mask_probability < 1.0)) {
    throw ConfigError("train.mask_probability must lie in (0,1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train.adam_beta1/adam_beta2 must lie in [0,1)");
  }
  if (!(adam_epsilon > 0.0)) {
    throw ConfigError("train.adam_epsilon must be > 0");
  }
  if (grad_clip && !(*grad_clip >= 0.0)) {
    throw ConfigError("train.grad_clip must be >= 0");
  }
}

TrainState make_train_state(ModelParams params) {
  TrainState state;
  state.adam.first_moment = params;
  state.adam.second_moment = params;
  for (ModelParams* moment : {&state.adam.first_moment, &state.adam.second_moment}) {
    for (auto& t : moment->tensors()) {
      std::fill(t.values.begin(), t.values.end(), 0.0);
    }
  }
  state.params = std::move(params);
  return state;
}

double balanced_bce(std::span<const double> p_inv, std::span<const double> p_neg) {
  if (p_inv.empty() || p_neg.empty()) {
    throw Error("empty batch");
  }
  if (p_inv.size() != p_neg.size()) {
    throw Error("invisible and negative sets must have equal size");
  }
  const double floor = 1e-12;
  double sum = 0.0;
  for (const double p : p_inv) {
    sum += std::log(std::max(p, floor));
  }
  for (const double p : p_neg) {
    sum += std::log(std::max(1.0 - p, floor));
  }
  return -sum / (2.0 * static_cast<double>(p_inv.size()));
}

LossAndGradient loss_and_gradient(const ModelParams& params, const ModelConfig& config,
                                  const BipartiteGraph& visible, const Matrix& demographics,
                                  std::span<const Edge> invisible, std::span<const Edge> negative) {
  LossAndGradient out;
  out.loss = run(params, config, visible, demographics, invisible, negative, &out.gradient);
  return out;
}

double batch_loss(const ModelParams& params, const ModelConfig& config, const BipartiteGraph& visible,
                  const Matrix& demographics, std::span<const Edge> invisible, std::span<const Edge> negative) {
  return run(params, config, visible, demographics, invisible, negative, nullptr);
}

void clip_gradient(ModelParams& gradient, double max_norm) {
  double sq = 0.0;
  for (const auto& t : gradient.tensors()) {
    for (const double v : t.values) {
      sq += v * v;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) {
    return;
  }
  const double factor = max_norm / norm;
  for (auto& t : gradient.tensors()) {
    for (double& v : t.values) {
      v *= factor;
    }
  }
}

void adam_update(ModelParams& params, AdamState& adam, ModelParams& gradient, const TrainConfig& config) {
  ++adam.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(adam.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(adam.step));
  auto p = params.tensors();
  auto g = gradient.tensors();
  auto m = adam.first_moment.tensors();
  auto v = adam.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw Error("optimizer state does not match parameters");
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t k = 0; k < p[t].values.size(); ++k) {
      const double gk = g[t].values[k];
      double& mk = m[t].values[k];
      double& vk = v[t].values[k];
      mk = b1 * mk + (1.0 - b1) * gk;
      vk = b2 * vk + (1.0 - b2) * gk * gk;
      p[t].values[k] -= config.learning_rate * (mk / correction1) / (std::sqrt(vk / correction2) + config.adam_epsilon);
    }
  }
}

double train_step(TrainState& state, const ModelConfig& model_config, const TrainConfig& config,
                  const BipartiteGraph& visible, const Matrix& demographics, std::span<const Edge> invisible,
                  std::span<const Edge> negative) {
  auto result = loss_and_gradient(state.params, model_config, visible, demographics, invisible, negative);
  if (config.grad_clip) {
    clip_gradient(result.gradient, *config.grad_clip);
  }
  adam_update(state.params, state.adam, result.gradient, config);
  if (!state.params.all_finite()) {
    throw Error("parameters became non-finite after update");
  }
  return result.loss;
}

void train_epoch(TrainState& state, const ModelConfig& model_config, const BipartiteGraph& train_graph,
                 const Matrix& demographics, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t epoch = state.history.size();
  if (train_graph.edge_count() == 0) {
    throw Error("empty batch: training graph has no edges");
  }
  const std::uint64_t epoch_seed = derive_seed(config.seed, "train.batch", epoch);
  EdgeBatch batch;
  // An all-visible mask carries no targets; redraw from a retry substream.
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const auto seed = attempt == 0 ? epoch_seed : derive_seed(epoch_seed, "retry", attempt);
    batch = sample_batch(train_graph, config.mask_probability, config.negative_sampler, seed,
                         config.max_repair_sweeps);
    if (!batch.invisible.empty()) {
      break;
    }
  }
  if (batch.invisible.empty()) {
    throw Error("empty batch: no invisible edges after 64 mask draws");
  }
  const auto visible = BipartiteGraph::build(batch.visible, train_graph.num_patients(), train_graph.num_events());
  const double loss = train_step(state, model_config, config, visible, demographics, batch.invisible, batch.negative);

  EpochLog log;
  log.epoch = epoch;
  log.loss = loss;
  log.invisible = batch.invisible.size();
  log.relaxed = batch.relaxed;
  std::size_t relaxed = batch.relaxed ? 1 : 0;
  for (const auto& h : state.history) {
    relaxed += h.relaxed ? 1 : 0;
  }
  log.relaxed_rate = static_cast<double>(relaxed) / static_cast<double>(epoch + 1);
  log.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  state.history.push_back(log);
}

void train(TrainState& state, const ModelConfig& model_config, const BipartiteGraph& train_graph,
           const Matrix& demographics, const TrainConfig& config,
           const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  for (std::size_t e = 0; e < config.epochs; ++e) {
    train_epoch(state, model_config, train_graph, demographics, config);
    if (on_epoch) {
      on_epoch(state.history.back());
    }
  }
}

void write_training_log(const std::filesystem::path& path, std::span<const EpochLog> history) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "epoch,loss,invisible,relaxed_rate,wall_time_ms\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.loss) << ',' << h.invisible << ',' << format_double(h.relaxed_rate)
        << ',' << format_double(h.wall_time_ms) << '\n';
  }
}

}  // namespace ehrgraph
