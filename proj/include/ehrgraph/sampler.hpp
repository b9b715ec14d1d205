#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ehrgraph/common.hpp"
#include "ehrgraph/graph.hpp"

namespace ehrgraph {

enum class NegativeSampler {
  degree_preserving,  // matches invisible per-patient and per-event counts
  uniform,            // only the total count matches
};

std::string to_string(NegativeSampler sampler);
NegativeSampler parse_negative_sampler(const std::string& name);

struct MaskedEdges {
  EdgeList invisible;
  EdgeList visible;
};

struct NegativeSample {
  EdgeList edges;
  bool relaxed = false;
  /// sum_j |negatives on j - invisible on j|; zero unless relaxed
  std::size_t event_marginal_l1_gap = 0;
  std::size_t swaps = 0;
};

/// One training iteration's edge partition.
struct EdgeBatch {
  EdgeList visible;
  EdgeList invisible;
  EdgeList negative;
  bool relaxed = false;
  std::size_t event_marginal_l1_gap = 0;
};

/// Hides each edge independently with probability p. Both outputs are
/// patient-major and partition g's edges.
MaskedEdges sample_invisible(const BipartiteGraph& g, double p, std::uint64_t seed);

/// Draws |invisible| non-edges of `full` whose per-patient counts equal the
/// invisible per-patient counts exactly and whose per-event counts match
/// whenever the greedy pass plus swap repair can reach them.
///
/// Patients are visited in random order; each draws its events without
/// replacement with probability proportional to the events' remaining
/// demand. A patient left short is repaired by moving a placed negative
/// (i', j') to (i, j') and giving i' an event that still has demand. After
/// `max_repair_sweeps` sweeps, leftover patient demand is filled with
/// uniform valid non-edges and the result is flagged relaxed.
NegativeSample sample_negative_degree_preserving(const BipartiteGraph& full, std::span<const Edge> invisible,
                                                 std::uint64_t seed, std::size_t max_repair_sweeps = 10);

/// k distinct non-edges drawn uniformly from the complement of `full`.
EdgeList sample_negative_uniform(const BipartiteGraph& full, std::size_t k, std::uint64_t seed);

/// Masks with probability p, then draws negatives with the chosen sampler.
/// Mask and negative seeds are derived from `seed` as separate substreams.
EdgeBatch sample_batch(const BipartiteGraph& full, double p, NegativeSampler sampler, std::uint64_t seed,
                       std::size_t max_repair_sweeps = 10);

/// Per-node counts of a batch, used by tests and the sampler comparison.
struct MarginalTable {
  std::vector<std::size_t> invisible_per_patient;
  std::vector<std::size_t> negative_per_patient;
  std::vector<std::size_t> invisible_per_event;
  std::vector<std::size_t> negative_per_event;
};

MarginalTable marginals(std::span<const Edge> invisible, std::span<const Edge> negative, std::size_t num_patients,
                        std::size_t num_events);

}  // namespace ehrgraph
