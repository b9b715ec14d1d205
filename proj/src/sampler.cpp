#include "ehrgraph/sampler.hpp"

#include <algorithm>
#include <unordered_set>

namespace ehrgraph {

std::string to_string(NegativeSampler sampler) {
  switch (sampler) {
    case NegativeSampler::degree_preserving:
      return "degree_preserving";
    case NegativeSampler::uniform:
      return "uniform";
  }
  return "unknown";
}

NegativeSampler parse_negative_sampler(const std::string& name) {
  if (name == "degree_preserving") {
    return NegativeSampler::degree_preserving;
  }
  if (name == "uniform") {
    return NegativeSampler::uniform;
  }
  throw ConfigError("unknown negative sampler '" + name + "' (expected degree_preserving or uniform)");
}

MaskedEdges sample_invisible(const BipartiteGraph& g, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("mask probability must lie in (0,1)");
  }
  Rng rng(seed);
  MaskedEdges out;
  out.invisible.reserve(static_cast<std::size_t>(p * static_cast<double>(g.edge_count())) + 16);
  out.visible.reserve(g.edge_count());
  for (std::size_t i = 0; i < g.num_patients(); ++i) {
    for (const auto j : g.events_of(i)) {
      const Edge e{static_cast<std::uint32_t>(i), j};
      (uniform01(rng) < p ? out.invisible : out.visible).push_back(e);
    }
  }
  return out;
}

namespace {

// Mutable state of one degree-preserving draw.
class DegreeSampler {
 public:
  DegreeSampler(const BipartiteGraph& full, std::span<const Edge> invisible, std::uint64_t seed)
      : full_(full),
        rng_(seed),
        patient_demand_(full.num_patients(), 0),
        event_demand_(full.num_events(), 0),
        event_target_(full.num_events(), 0),
        negatives_of_(full.num_patients()),
        holders_of_(full.num_events()),
        mark_(full.num_events(), 0) {
    EdgeList sorted(invisible.begin(), invisible.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const auto& e = sorted[k];
      if (e.patient >= full.num_patients() || e.event >= full.num_events() || !full.contains(e.patient, e.event)) {
        throw Error("invisible edge (" + std::to_string(e.patient) + "," + std::to_string(e.event) +
                    ") is not an edge of the graph");
      }
      if (k > 0 && sorted[k - 1] == e) {
        throw Error("invisible set contains a duplicate edge");
      }
      ++patient_demand_[e.patient];
      ++event_demand_[e.event];
    }
    event_target_ = event_demand_;
    for (std::size_t i = 0; i < full.num_patients(); ++i) {
      if (patient_demand_[i] > full.num_events() - full.patient_degree(i)) {
        throw Error("patient " + std::to_string(i) + " needs " + std::to_string(patient_demand_[i]) +
                    " negatives but has only " + std::to_string(full.num_events() - full.patient_degree(i)) +
                    " non-edges");
      }
    }
  }

  NegativeSample run(std::size_t max_repair_sweeps) {
    std::vector<std::uint32_t> order;
    for (std::size_t i = 0; i < patient_demand_.size(); ++i) {
      if (patient_demand_[i] > 0) {
        order.push_back(static_cast<std::uint32_t>(i));
      }
    }
    shuffle(order, rng_);
    std::vector<std::size_t> deficit(patient_demand_.size(), 0);
    for (const auto i : order) {
      deficit[i] = greedy_fill(i, patient_demand_[i]);
    }

    NegativeSample out;
    for (std::size_t sweep = 0; sweep < max_repair_sweeps; ++sweep) {
      bool pending = false;
      bool progress = false;
      for (const auto i : order) {
        while (deficit[i] > 0 && repair_one(i)) {
          --deficit[i];
          ++out.swaps;
          progress = true;
        }
        pending = pending || deficit[i] > 0;
      }
      if (!pending || !progress) {
        break;
      }
    }
    for (const auto i : order) {
      if (deficit[i] > 0) {
        relax_fill(i, deficit[i]);
      }
    }

    for (std::size_t i = 0; i < negatives_of_.size(); ++i) {
      for (const auto j : negatives_of_[i]) {
        out.edges.push_back({static_cast<std::uint32_t>(i), j});
      }
    }
    std::sort(out.edges.begin(), out.edges.end());
    std::vector<std::size_t> placed(event_target_.size(), 0);
    for (const auto& e : out.edges) {
      ++placed[e.event];
    }
    for (std::size_t j = 0; j < placed.size(); ++j) {
      out.event_marginal_l1_gap += placed[j] > event_target_[j] ? placed[j] - event_target_[j]
                                                                : event_target_[j] - placed[j];
    }
    out.relaxed = out.event_marginal_l1_gap > 0;
    return out;
  }

 private:
  // Marks i's graph neighbours and current negatives; mark_[j] == stamp_
  // means j is not a valid negative for i.
  void mark_blocked(std::uint32_t i) {
    ++stamp_;
    for (const auto j : full_.events_of(i)) {
      mark_[j] = stamp_;
    }
    for (const auto j : negatives_of_[i]) {
      mark_[j] = stamp_;
    }
  }

  bool blocked_for(std::uint32_t i, std::uint32_t j) const {
    if (full_.contains(i, j)) {
      return true;
    }
    const auto& negs = negatives_of_[i];
    return std::find(negs.begin(), negs.end(), j) != negs.end();
  }

  void place(std::uint32_t i, std::uint32_t j) {
    negatives_of_[i].push_back(j);
    holders_of_[j].push_back(i);
    if (event_demand_[j] > 0) {
      --event_demand_[j];
    }
  }

  void unplace(std::uint32_t i, std::uint32_t j) {
    auto& negs = negatives_of_[i];
    negs.erase(std::find(negs.begin(), negs.end(), j));
    auto& holders = holders_of_[j];
    holders.erase(std::find(holders.begin(), holders.end(), i));
    ++event_demand_[j];
  }

  // Draws up to `need` events for patient i, weighted by remaining demand.
  std::size_t greedy_fill(std::uint32_t i, std::size_t need) {
    mark_blocked(i);
    candidates_.clear();
    std::uint64_t total = 0;
    for (std::uint32_t j = 0; j < event_demand_.size(); ++j) {
      if (event_demand_[j] > 0 && mark_[j] != stamp_) {
        candidates_.push_back(j);
        total += event_demand_[j];
      }
    }
    while (need > 0 && total > 0) {
      std::uint64_t ticket = uniform_index(rng_, total);
      std::size_t pick = 0;
      while (ticket >= event_demand_[candidates_[pick]]) {
        ticket -= event_demand_[candidates_[pick]];
        ++pick;
      }
      const auto j = candidates_[pick];
      total -= event_demand_[j];
      candidates_[pick] = candidates_.back();
      candidates_.pop_back();
      place(i, j);
      --need;
    }
    return need;
  }

  // One swap that gives patient i an extra negative while keeping every
  // event's count on target. Returns false when no such swap exists.
  bool repair_one(std::uint32_t i) {
    open_events_.clear();
    for (std::uint32_t j = 0; j < event_demand_.size(); ++j) {
      if (event_demand_[j] > 0) {
        open_events_.push_back(j);
      }
    }
    if (open_events_.empty()) {
      return false;
    }
    mark_blocked(i);
    for (const auto j : open_events_) {
      if (mark_[j] != stamp_) {
        place(i, j);
        return true;
      }
    }
    const std::size_t n = event_demand_.size();
    const std::size_t start = uniform_index(rng_, n);
    for (std::size_t step = 0; step < n; ++step) {
      const auto moved = static_cast<std::uint32_t>((start + step) % n);
      if (mark_[moved] == stamp_ || holders_of_[moved].empty()) {
        continue;
      }
      const auto& holders = holders_of_[moved];
      const std::size_t offset = uniform_index(rng_, holders.size());
      for (std::size_t h = 0; h < holders.size(); ++h) {
        const auto other = holders[(offset + h) % holders.size()];
        for (const auto alt : open_events_) {
          if (!blocked_for(other, alt)) {
            unplace(other, moved);
            place(other, alt);
            place(i, moved);
            return true;
          }
        }
      }
    }
    return false;
  }

  void relax_fill(std::uint32_t i, std::size_t need) {
    mark_blocked(i);
    candidates_.clear();
    for (std::uint32_t j = 0; j < event_demand_.size(); ++j) {
      if (mark_[j] != stamp_) {
        candidates_.push_back(j);
      }
    }
    if (candidates_.size() < need) {
      throw Error("patient " + std::to_string(i) + " has no valid non-edges left for negative sampling");
    }
    for (std::size_t t = 0; t < need; ++t) {
      const std::size_t pick = t + uniform_index(rng_, candidates_.size() - t);
      std::swap(candidates_[t], candidates_[pick]);
      place(i, candidates_[t]);
    }
  }

  const BipartiteGraph& full_;
  Rng rng_;
  std::vector<std::size_t> patient_demand_;
  std::vector<std::size_t> event_demand_;
  std::vector<std::size_t> event_target_;
  std::vector<std::vector<std::uint32_t>> negatives_of_;
  std::vector<std::vector<std::uint32_t>> holders_of_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t stamp_ = 0;
  std::vector<std::uint32_t> candidates_;
  std::vector<std::uint32_t> open_events_;
};

}  // namespace

NegativeSample sample_negative_degree_preserving(const BipartiteGraph& full, std::span<const Edge> invisible,
                                                 std::uint64_t seed, std::size_t max_repair_sweeps) {
  DegreeSampler sampler(full, invisible, seed);
  return sampler.run(max_repair_sweeps);
}

EdgeList sample_negative_uniform(const BipartiteGraph& full, std::size_t k, std::uint64_t seed) {
  const std::size_t m = full.num_patients();
  const std::size_t n = full.num_events();
  const std::size_t non_edges = m * n - full.edge_count();
  if (k > non_edges) {
    throw Error("cannot draw " + std::to_string(k) + " negatives from " + std::to_string(non_edges) + " non-edges");
  }
  Rng rng(seed);
  EdgeList out;
  out.reserve(k);
  if (2 * k > non_edges) {
    // Dense request: partial Fisher-Yates over the explicit complement.
    EdgeList pool;
    pool.reserve(non_edges);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = full.events_of(i);
      auto it = row.begin();
      for (std::uint32_t j = 0; j < n; ++j) {
        if (it != row.end() && *it == j) {
          ++it;
        } else {
          pool.push_back({static_cast<std::uint32_t>(i), j});
        }
      }
    }
    for (std::size_t t = 0; t < k; ++t) {
      std::swap(pool[t], pool[t + uniform_index(rng, pool.size() - t)]);
    }
    out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(2 * k);
    while (out.size() < k) {
      const auto i = static_cast<std::uint32_t>(uniform_index(rng, m));
      const auto j = static_cast<std::uint32_t>(uniform_index(rng, n));
      if (full.contains(i, j)) {
        continue;
      }
      if (chosen.insert(static_cast<std::uint64_t>(i) * n + j).second) {
        out.push_back({i, j});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

EdgeBatch sample_batch(const BipartiteGraph& full, double p, NegativeSampler sampler, std::uint64_t seed,
                       std::size_t max_repair_sweeps) {
  auto masked = sample_invisible(full, p, derive_seed(seed, "batch.mask"));
  EdgeBatch batch;
  const std::uint64_t negative_seed = derive_seed(seed, "batch.negative");
  if (sampler == NegativeSampler::degree_preserving) {
    auto negatives = sample_negative_degree_preserving(full, masked.invisible, negative_seed, max_repair_sweeps);
    batch.negative = std::move(negatives.edges);
    batch.relaxed = negatives.relaxed;
    batch.event_marginal_l1_gap = negatives.event_marginal_l1_gap;
  } else {
    batch.negative = sample_negative_uniform(full, masked.invisible.size(), negative_seed);
  }
  batch.visible = std::move(masked.visible);
  batch.invisible = std::move(masked.invisible);
  return batch;
}

MarginalTable marginals(std::span<const Edge> invisible, std::span<const Edge> negative, std::size_t num_patients,
                        std::size_t num_events) {
  MarginalTable t;
  t.invisible_per_patient.assign(num_patients, 0);
  t.negative_per_patient.assign(num_patients, 0);
  t.invisible_per_event.assign(num_events, 0);
  t.negative_per_event.assign(num_events, 0);
  for (const auto& e : invisible) {
    ++t.invisible_per_patient[e.patient];
    ++t.invisible_per_event[e.event];
  }
  for (const auto& e : negative) {
    ++t.negative_per_patient[e.patient];
    ++t.negative_per_event[e.event];
  }
  return t;
}

}  // namespace ehrgraph
