#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "ehrgraph/common.hpp"
#include "ehrgraph/dataset.hpp"
#include "ehrgraph/graph.hpp"
#include "ehrgraph/model.hpp"

namespace ehrgraph::testing {

/// Each edge present independently with probability `density`.
inline EdgeList random_edges(std::size_t m, std::size_t n, double density, std::uint64_t seed) {
  Rng rng(seed);
  EdgeList edges;
  for (std::uint32_t i = 0; i < m; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (uniform01(rng) < density) {
        edges.push_back({i, j});
      }
    }
  }
  return edges;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = scale * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return out;
}

inline Dataset make_dataset(std::size_t m, std::size_t n, EdgeList edges, std::uint64_t seed = 7) {
  Dataset d;
  d.num_patients = m;
  d.num_events = n;
  normalize_edges(edges);
  d.positives = std::move(edges);
  d.demographics = random_matrix(static_cast<Eigen::Index>(m), kDemographicsDim, seed);
  for (std::size_t i = 0; i < m; ++i) {
    d.patient_ids.push_back("P" + std::to_string(i));
  }
  for (std::size_t j = 0; j < n; ++j) {
    d.event_labels.push_back("E" + std::to_string(j));
  }
  return d;
}

/// Parameters with every tensor, biases included, filled from U(-scale, scale).
inline ModelParams random_params(const ModelConfig& config, std::size_t n, std::uint64_t seed, double scale = 0.5) {
  auto params = ModelParams::zeros(config, n);
  Rng rng(seed);
  for (auto& t : params.tensors()) {
    for (auto& v : t.values) {
      v = scale * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return params;
}

inline double max_relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ehrgraph_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ehrgraph::testing
