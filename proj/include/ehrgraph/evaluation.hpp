#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ehrgraph/common.hpp"
#include "ehrgraph/dataset.hpp"

namespace ehrgraph {

enum class CutoffPolicy {
  fixed,            // impute positive iff score > 0.5
  train_frequency,  // impute positive iff score > train frequency of the event
};

std::string to_string(CutoffPolicy policy);
/// Accepts "0.5"/"fixed" and "avg"/"train_frequency".
CutoffPolicy parse_cutoff_policy(const std::string& name);

struct EventMetrics {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  double train_frequency = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> balanced_accuracy;
};

struct SummaryStat {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
};

struct FrequencyBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t events = 0;
  std::optional<double> mean_recall;
  std::optional<double> mean_specificity;
};

struct MetricsReport {
  CutoffPolicy policy = CutoffPolicy::fixed;
  std::vector<EventMetrics> per_event;
  SummaryStat sensitivity;
  SummaryStat specificity;
  SummaryStat balanced_accuracy;
  /// Events with no held-out positives (sensitivity undefined).
  std::size_t events_without_positives = 0;
  std::vector<FrequencyBin> frequency_bins;
};

struct EvaluateOptions {
  /// Fraction of unmeasured entries kept as negatives; 1 keeps all of them.
  double negative_sample_rate = 1.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Confusion counts per event over the test patients. Positives are the
/// held-out pairs; negatives are the pairs with no observed positive in the
/// patient's record (visible pairs are not scored). `scores` is
/// test-patients x events.
MetricsReport evaluate(const Matrix& scores, const Dataset& test_visible, std::span<const Edge> heldout,
                       CutoffPolicy policy, std::span<const double> train_frequencies,
                       const EvaluateOptions& options = {});

/// Mean and population standard deviation of the defined per-event values.
void summarize(MetricsReport& report);

/// Ten log-spaced bins over the positive train frequencies; events with zero
/// frequency land in the first bin. Equal frequencies give one bin.
std::vector<FrequencyBin> frequency_bins(std::span<const EventMetrics> per_event, std::size_t bins = 10);

/// Spearman rank correlation with average ranks for ties; nullopt when
/// either side is constant or fewer than two points.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct BiasRow {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t events = 0;
  std::optional<double> recall_v1;
  std::optional<double> recall_v2;
  std::optional<double> specificity_v1;
  std::optional<double> specificity_v2;
};

struct BiasProfile {
  std::vector<BiasRow> bins;
  std::optional<double> spearman_v1;  // frequency vs recall
  std::optional<double> spearman_v2;
};

/// Spearman correlation between train frequency and per-event recall over
/// events with defined recall.
std::optional<double> frequency_recall_correlation(const MetricsReport& report);

/// Per-bin recall/specificity for a uniform-sampler report (v1) against a
/// degree-preserving one (v2) on the same test data.
BiasProfile bias_profile(const MetricsReport& v1, const MetricsReport& v2);

void write_per_event_csv(const std::filesystem::path& path, const MetricsReport& report,
                         const std::vector<std::string>& event_labels);
/// Reports of one imputer under one or more cutoff policies.
struct MethodReports {
  std::string method;
  std::vector<MetricsReport> reports;
};

/// One summary row per (method, report); runtime is not written so that
/// repeated runs produce identical files.
void write_summary_csv(const std::filesystem::path& path, std::span<const MethodReports> methods);
void write_bias_csv(const std::filesystem::path& path, const BiasProfile& profile);

/// Cosine-similarity neighbours of each row, most similar first, ties to
/// the lower index; the row itself is excluded. Zero rows have cosine 0.
std::vector<std::vector<std::pair<std::size_t, double>>> cosine_neighbors(const Matrix& embeddings, std::size_t k);

/// Writes `<prefix>_embeddings.csv` (event id, category, coordinates) and
/// `<prefix>_neighbors.csv` (top-k cosine neighbours per event).
void export_event_embeddings(const std::filesystem::path& prefix, const Matrix& embeddings,
                             const std::vector<std::string>& event_labels,
                             const std::vector<std::string>& event_categories, std::size_t k = 10);

}  // namespace ehrgraph
