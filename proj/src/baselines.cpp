#include "ehrgraph/baselines.hpp"

#include <algorithm>
#include <bit>

namespace ehrgraph {

std::string to_string(Distance distance) { return distance == Distance::hamming ? "hamming" : "jaccard"; }

Distance parse_distance(const std::string& name) {
  if (name == "hamming") {
    return Distance::hamming;
  }
  if (name == "jaccard") {
    return Distance::jaccard;
  }
  throw ConfigError("unknown distance '" + name + "' (expected hamming or jaccard)");
}

void KnnConfig::validate() const {
  if (k_neighbors == 0) {
    throw ConfigError("knn.k_neighbors must be >= 1");
  }
}

BinaryRows::BinaryRows(const Dataset& data)
    : rows_(data.num_patients),
      words_((data.num_events + 63) / 64),
      bits_(rows_ * words_, 0),
      counts_(rows_, 0) {
  for (const auto& e : data.positives) {
    bits_[e.patient * words_ + e.event / 64] |= std::uint64_t{1} << (e.event % 64);
    ++counts_[e.patient];
  }
}

std::vector<std::size_t> nearest_train_patients(const BinaryRows& train, std::span<const std::uint64_t> query,
                                                std::size_t query_count, const KnnConfig& config) {
  const std::size_t m = train.rows();
  const std::size_t k = std::min(config.k_neighbors, m);
  // (primary key, secondary key, index); smaller sorts nearer.
  struct Candidate {
    std::uint64_t shared;
    std::uint64_t total;
    std::uint32_t index;
  };
  std::vector<Candidate> cand(m);
  for (std::size_t r = 0; r < m; ++r) {
    const auto row = train.row(r);
    std::uint64_t shared = 0;
    std::uint64_t differ = 0;
    for (std::size_t w = 0; w < row.size(); ++w) {
      shared += static_cast<std::uint64_t>(std::popcount(row[w] & query[w]));
      differ += static_cast<std::uint64_t>(std::popcount(row[w] ^ query[w]));
    }
    if (config.distance == Distance::hamming) {
      cand[r] = {differ, 0, static_cast<std::uint32_t>(r)};
    } else {
      cand[r] = {shared, train.popcount(r) + query_count - shared, static_cast<std::uint32_t>(r)};
    }
  }
  auto nearer = [&](const Candidate& a, const Candidate& b) {
    if (config.distance == Distance::hamming) {
      return a.shared != b.shared ? a.shared < b.shared : a.index < b.index;
    }
    // Jaccard similarity shared/total, exact via cross-multiplication; an
    // empty union counts as similarity 1.
    const std::uint64_t at = a.total == 0 ? 1 : a.total;
    const std::uint64_t as = a.total == 0 ? 1 : a.shared;
    const std::uint64_t bt = b.total == 0 ? 1 : b.total;
    const std::uint64_t bs = b.total == 0 ? 1 : b.shared;
    const auto lhs = as * bt;
    const auto rhs = bs * at;
    return lhs != rhs ? lhs > rhs : a.index < b.index;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), nearer);
  std::vector<std::size_t> out(k);
  for (std::size_t t = 0; t < k; ++t) {
    out[t] = cand[t].index;
  }
  return out;
}

Matrix knn_score_grid(const Dataset& train, const Dataset& test_visible, const KnnConfig& config,
                      std::size_t workers) {
  config.validate();
  if (train.num_patients == 0) {
    throw Error("k-NN needs a non-empty train set");
  }
  if (config.k_neighbors > train.num_patients) {
    throw ConfigError("knn.k_neighbors exceeds the number of train patients");
  }
  if (train.num_events != test_visible.num_events) {
    throw Error("train and test event spaces differ");
  }
  const BinaryRows train_rows(train);
  const BinaryRows test_rows(test_visible);
  const auto n = static_cast<Eigen::Index>(train.num_events);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(test_visible.num_patients), n);
  const auto k = static_cast<double>(config.k_neighbors);
  parallel_chunks(test_visible.num_patients, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto neighbors = nearest_train_patients(train_rows, test_rows.row(i), test_rows.popcount(i), config);
      std::vector<std::uint32_t> hits(train.num_events, 0);
      for (const auto r : neighbors) {
        const auto row = train_rows.row(r);
        for (std::size_t w = 0; w < row.size(); ++w) {
          std::uint64_t bits = row[w];
          while (bits != 0) {
            ++hits[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))];
            bits &= bits - 1;
          }
        }
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        out(static_cast<Eigen::Index>(i), j) = hits[static_cast<std::size_t>(j)] / k;
      }
    }
  });
  return out;
}

std::vector<double> knn_impute(const Dataset& train, const Dataset& test_visible, const KnnConfig& config,
                               std::span<const Edge> pairs) {
  const Matrix grid = knn_score_grid(train, test_visible, config);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& e : pairs) {
    if (e.patient >= grid.rows() || e.event >= grid.cols()) {
      throw Error("k-NN pair out of range");
    }
    out.push_back(grid(e.patient, e.event));
  }
  return out;
}

Matrix frequency_score_grid(const Dataset& train, std::size_t num_test_patients) {
  const auto freq = event_frequencies(train);
  Matrix out(static_cast<Eigen::Index>(num_test_patients), static_cast<Eigen::Index>(freq.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    out.col(j).setConstant(freq[static_cast<std::size_t>(j)]);
  }
  return out;
}

std::vector<double> frequency_baseline(const Dataset& train, std::span<const Edge> pairs) {
  const auto freq = event_frequencies(train);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& e : pairs) {
    if (e.event >= freq.size()) {
      throw Error("frequency baseline pair out of range");
    }
    out.push_back(freq[e.event]);
  }
  return out;
}

}  // namespace ehrgraph
