#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ehrgraph/common.hpp"

namespace ehrgraph {

/// Patient/event bipartite adjacency, stored CSR-style in both directions.
/// Immutable after construction.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  /// Duplicate pairs collapse to one edge; out-of-range indices throw.
  static BipartiteGraph build(std::span<const Edge> edges, std::size_t num_patients, std::size_t num_events);

  std::size_t num_patients() const { return patient_offsets_.empty() ? 0 : patient_offsets_.size() - 1; }
  std::size_t num_events() const { return event_offsets_.empty() ? 0 : event_offsets_.size() - 1; }
  std::size_t edge_count() const { return patient_targets_.size(); }

  /// Sorted event indices of patient i.
  std::span<const std::uint32_t> events_of(std::size_t patient) const {
    return {patient_targets_.data() + patient_offsets_[patient],
            patient_targets_.data() + patient_offsets_[patient + 1]};
  }
  /// Sorted patient indices of event j.
  std::span<const std::uint32_t> patients_of(std::size_t event) const {
    return {event_targets_.data() + event_offsets_[event], event_targets_.data() + event_offsets_[event + 1]};
  }

  std::size_t patient_degree(std::size_t patient) const {
    return patient_offsets_[patient + 1] - patient_offsets_[patient];
  }
  std::size_t event_degree(std::size_t event) const { return event_offsets_[event + 1] - event_offsets_[event]; }

  /// Binary search in the patient's row; O(log degree).
  bool contains(std::size_t patient, std::size_t event) const;

  /// Returns a copy without `edges`. Every removed edge must be present
  /// exactly once in `edges`.
  BipartiteGraph remove_edges(std::span<const Edge> edges) const;

  /// All edges, patient-major.
  EdgeList edges() const;

  bool operator==(const BipartiteGraph&) const = default;

 private:
  std::vector<std::size_t> patient_offsets_;
  std::vector<std::uint32_t> patient_targets_;
  std::vector<std::size_t> event_offsets_;
  std::vector<std::uint32_t> event_targets_;
};

}  // namespace ehrgraph
