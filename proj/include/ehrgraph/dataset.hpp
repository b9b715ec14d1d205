#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehrgraph/common.hpp"

namespace ehrgraph {

/// Demographic columns. Age is standardized after splitting; sex is {0,1}.
inline constexpr std::size_t kAgeColumn = 0;
inline constexpr std::size_t kSexColumn = 1;
inline constexpr std::size_t kDemographicsDim = 2;

/// Unary patient x event matrix stored as its positive entries.
struct Dataset {
  std::size_t num_patients = 0;
  std::size_t num_events = 0;
  EdgeList positives;  // sorted patient-major, unique
  Matrix demographics;  // num_patients x kDemographicsDim
  std::vector<std::string> patient_ids;
  std::vector<std::string> event_labels;
  std::vector<std::string> event_categories;  // may be empty

  double density() const;
  /// Number of distinct patients carrying each event.
  std::vector<std::size_t> event_counts() const;
  std::vector<std::size_t> patient_counts() const;
  /// Throws if an index is out of range, positives are unsorted/duplicated,
  /// or metadata sizes disagree with the matrix shape.
  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.7;
  double test_mask_fraction = 0.3;
  double min_event_frequency = 0.001;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EventFilterResult {
  Dataset dataset;
  /// original event index -> filtered index, or -1 when dropped
  std::vector<std::int64_t> event_index_map;
};

struct AgeScaler {
  double mean = 0.0;
  double stddev = 1.0;
};

struct SplitDataset {
  Dataset train;
  Dataset test_visible;
  EdgeList test_heldout;  // indexed like test_visible
  std::vector<std::int64_t> event_index_map;
  std::vector<std::size_t> train_patients;  // source patient indices
  std::vector<std::size_t> test_patients;
  AgeScaler age_scaler;
};

struct SyntheticSpec {
  std::size_t num_patients = 5000;
  std::size_t num_events = 500;
  std::size_t rank = 10;
  double target_density = 0.02;
  double observe_probability = 0.7;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset dataset;
  EdgeList ground_truth;
};

/// Reads `patient_id,event_id` triplets and `patient_id,age,sex`
/// demographics. Patients are indexed in demographics order, events in order
/// of first appearance. Duplicate triplets collapse to one positive.
Dataset load_triplets(const std::filesystem::path& triplets,
                      const std::filesystem::path& demographics);

/// Drops events carried by fewer than ceil(min_event_frequency * m) patients.
EventFilterResult filter_rare_events(const Dataset& data, double min_event_frequency);

/// Patient-level train/test split plus per-test-patient masking. Age is
/// standardized with train statistics. event_index_map is the identity.
SplitDataset split(const Dataset& data, const SplitSpec& spec);

/// filter_rare_events followed by split, with the filter's event map kept.
SplitDataset filter_and_split(const Dataset& data, const SplitSpec& spec);

/// Low-rank logistic generator with heavy-tailed event prevalences and
/// unary missingness. Observed positives are a subset of the ground truth.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Number of held-out positives for a test patient of the given degree.
std::size_t heldout_count(std::size_t degree, double mask_fraction);

/// Train frequency of every event: (1/m) * sum_i x_ij.
std::vector<double> event_frequencies(const Dataset& train);

// File I/O used by the CLI. Split directories store dense indices so that
// reloading is exact.
void write_triplets(const std::filesystem::path& path, const Dataset& data);
void write_demographics(const std::filesystem::path& path, const Dataset& data);
void write_edges(const std::filesystem::path& path, const EdgeList& edges,
                 const std::vector<std::string>& patient_ids,
                 const std::vector<std::string>& event_labels);
void write_events(const std::filesystem::path& path, const Dataset& data);

void save_split(const std::filesystem::path& dir, const SplitDataset& split, const SplitSpec& spec);
SplitDataset load_split(const std::filesystem::path& dir);

}  // namespace ehrgraph
