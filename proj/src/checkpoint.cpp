#include <cstring>
#include <fstream>

#include "ehrgraph/model.hpp"

namespace ehrgraph {

namespace {

constexpr char kMagic[8] = {'E', 'H', 'R', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw Error("truncated checkpoint");
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write checkpoint " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, config.embedding_dim);
  put<std::uint64_t>(out, config.num_layers);
  put<std::uint64_t>(out, config.scorer_hidden);
  put<std::uint64_t>(out, config.demographics_dim);
  put<std::uint8_t>(out, config.layer_bias ? 1 : 0);
  put<std::uint8_t>(out, config.embedding_init == EmbeddingInit::svd ? 0 : 1);
  put<std::uint64_t>(out, config.svd_power_iters);
  put<std::uint64_t>(out, params.num_events());
  const auto tensors = params.tensors();
  put<std::uint64_t>(out, tensors.size());
  for (const auto& t : tensors) {
    put<std::uint64_t>(out, t.name.size());
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!out) {
    throw Error("failed writing checkpoint " + path.string());
  }
}

void load_checkpoint(const std::filesystem::path& path, ModelConfig& config, ModelParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open checkpoint " + path.string());
  }
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + " is not a checkpoint");
  }
  if (const auto version = get<std::uint32_t>(in); version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.embedding_dim = get<std::uint64_t>(in);
  c.num_layers = get<std::uint64_t>(in);
  c.scorer_hidden = get<std::uint64_t>(in);
  c.demographics_dim = get<std::uint64_t>(in);
  c.layer_bias = get<std::uint8_t>(in) != 0;
  c.embedding_init = get<std::uint8_t>(in) == 0 ? EmbeddingInit::svd : EmbeddingInit::random;
  c.svd_power_iters = get<std::uint64_t>(in);
  const auto num_events = get<std::uint64_t>(in);
  ModelParams p = ModelParams::zeros(c, num_events);
  auto tensors = p.tensors();
  if (get<std::uint64_t>(in) != tensors.size()) {
    throw Error("checkpoint tensor count does not match its config");
  }
  for (auto& t : tensors) {
    const auto name_len = get<std::uint64_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (name != t.name || rows != static_cast<std::uint64_t>(t.rows) || cols != static_cast<std::uint64_t>(t.cols)) {
      throw Error("checkpoint tensor '" + name + "' does not match expected '" + t.name + "' " +
                  std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!in) {
      throw Error("truncated checkpoint");
    }
  }
  config = c;
  params = std::move(p);
}

}  // namespace ehrgraph
