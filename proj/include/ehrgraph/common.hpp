#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ehrgraph {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Runtime failure inside the library (bad data, infeasible request, I/O).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage; the CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// One patient-event pair. Ordering is patient-major.
struct Edge {
  std::uint32_t patient = 0;
  std::uint32_t event = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// Sorts patient-major and drops duplicates.
void normalize_edges(EdgeList& edges);

/// Deterministic substream seed: mixes a parent seed with a stream name and
/// an index so that independent pipeline stages never share randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound) by rejection; bound must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

template <class T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[uniform_index(rng, i)]);
  }
}

/// Splits [0, n) into at most `workers` contiguous chunks and runs them on
/// separate threads. Chunk boundaries depend only on (n, workers), so callers
/// that merge per-chunk results in chunk order get deterministic output.
/// workers == 0 means hardware concurrency.
void parallel_chunks(std::size_t n, std::size_t workers,
                     const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn);

std::size_t resolve_workers(std::size_t workers, std::size_t n);

inline double sigmoid(double z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(sigmoid(z)) without overflow.
double log_sigmoid(double z);

/// Formats a double so that parsing it back yields the same bits.
std::string format_double(double value);

}  // namespace ehrgraph
