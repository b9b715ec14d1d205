#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ehrgraph/common.hpp"
#include "ehrgraph/dataset.hpp"

namespace ehrgraph {

enum class Distance { hamming, jaccard };

std::string to_string(Distance distance);
Distance parse_distance(const std::string& name);

struct KnnConfig {
  std::size_t k_neighbors = 10;
  Distance distance = Distance::hamming;

  void validate() const;
};

/// Patients as bit-packed binary event vectors.
class BinaryRows {
 public:
  BinaryRows(const Dataset& data);

  std::size_t rows() const { return rows_; }
  std::span<const std::uint64_t> row(std::size_t i) const {
    return {bits_.data() + i * words_, words_};
  }
  std::size_t popcount(std::size_t i) const { return counts_[i]; }

 private:
  std::size_t rows_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::size_t> counts_;
};

/// Score grid (test patients x events): fraction of the k nearest train
/// patients carrying each event. Ties at equal distance go to the lower
/// train index.
Matrix knn_score_grid(const Dataset& train, const Dataset& test_visible, const KnnConfig& config,
                      std::size_t workers = 1);

/// Same scores, for an explicit list of (test patient, event) pairs.
std::vector<double> knn_impute(const Dataset& train, const Dataset& test_visible, const KnnConfig& config,
                               std::span<const Edge> pairs);

/// Indices of the k nearest train patients to one query row, nearest first.
std::vector<std::size_t> nearest_train_patients(const BinaryRows& train, std::span<const std::uint64_t> query,
                                                std::size_t query_count, const KnnConfig& config);

/// score(i, j) = train frequency of j, for every test patient.
Matrix frequency_score_grid(const Dataset& train, std::size_t num_test_patients);
std::vector<double> frequency_baseline(const Dataset& train, std::span<const Edge> pairs);

}  // namespace ehrgraph
