#include "ehrgraph/graph.hpp"

#include <algorithm>
#include <string>

namespace ehrgraph {

BipartiteGraph BipartiteGraph::build(std::span<const Edge> edges, std::size_t num_patients,
                                     std::size_t num_events) {
  EdgeList sorted(edges.begin(), edges.end());
  for (const auto& e : sorted) {
    if (e.patient >= num_patients || e.event >= num_events) {
      throw Error("edge (" + std::to_string(e.patient) + "," + std::to_string(e.event) +
                  ") out of range for " + std::to_string(num_patients) + "x" + std::to_string(num_events) +
                  " graph");
    }
  }
  normalize_edges(sorted);

  BipartiteGraph g;
  g.patient_offsets_.assign(num_patients + 1, 0);
  g.event_offsets_.assign(num_events + 1, 0);
  for (const auto& e : sorted) {
    ++g.patient_offsets_[e.patient + 1];
    ++g.event_offsets_[e.event + 1];
  }
  for (std::size_t i = 0; i < num_patients; ++i) {
    g.patient_offsets_[i + 1] += g.patient_offsets_[i];
  }
  for (std::size_t j = 0; j < num_events; ++j) {
    g.event_offsets_[j + 1] += g.event_offsets_[j];
  }
  g.patient_targets_.resize(sorted.size());
  g.event_targets_.resize(sorted.size());
  std::vector<std::size_t> cursor(g.event_offsets_.begin(), g.event_offsets_.end() - 1);
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    g.patient_targets_[k] = sorted[k].event;
    // Patient-major input keeps every event row sorted by patient.
    g.event_targets_[cursor[sorted[k].event]++] = sorted[k].patient;
  }
  return g;
}

bool BipartiteGraph::contains(std::size_t patient, std::size_t event) const {
  const auto row = events_of(patient);
  return std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(event));
}

BipartiteGraph BipartiteGraph::remove_edges(std::span<const Edge> removed) const {
  EdgeList drop(removed.begin(), removed.end());
  std::sort(drop.begin(), drop.end());
  for (std::size_t k = 0; k < drop.size(); ++k) {
    const auto& e = drop[k];
    if (e.patient >= num_patients() || e.event >= num_events() || !contains(e.patient, e.event)) {
      throw Error("cannot remove missing edge (" + std::to_string(e.patient) + "," + std::to_string(e.event) + ")");
    }
    if (k > 0 && drop[k - 1] == e) {
      throw Error("edge (" + std::to_string(e.patient) + "," + std::to_string(e.event) + ") removed twice");
    }
  }
  EdgeList kept;
  kept.reserve(edge_count() - drop.size());
  auto it = drop.begin();
  for (std::size_t i = 0; i < num_patients(); ++i) {
    for (const auto j : events_of(i)) {
      const Edge e{static_cast<std::uint32_t>(i), j};
      if (it != drop.end() && *it == e) {
        ++it;
      } else {
        kept.push_back(e);
      }
    }
  }
  return build(kept, num_patients(), num_events());
}

EdgeList BipartiteGraph::edges() const {
  EdgeList out;
  out.reserve(edge_count());
  for (std::size_t i = 0; i < num_patients(); ++i) {
    for (const auto j : events_of(i)) {
      out.push_back({static_cast<std::uint32_t>(i), j});
    }
  }
  return out;
}

}  // namespace ehrgraph
