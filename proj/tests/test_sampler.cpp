#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ehrgraph/sampler.hpp"
#include "support.hpp"

using namespace ehrgraph;
using namespace ehrgraph::testing;

namespace {

struct BatchCheck {
  bool disjoint_from_graph = true;
  bool unique = true;
  bool patient_exact = true;
  bool event_exact = true;
  std::size_t event_gap = 0;
};

// Independent marginal checker: counts by direct tallies over the pair lists.
BatchCheck check_negatives(const BipartiteGraph& g, std::span<const Edge> invisible, std::span<const Edge> negative) {
  BatchCheck c;
  std::vector<long> patient(g.num_patients(), 0);
  std::vector<long> event(g.num_events(), 0);
  for (const auto& e : invisible) {
    ++patient[e.patient];
    ++event[e.event];
  }
  std::set<Edge> seen;
  for (const auto& e : negative) {
    const auto row = g.events_of(e.patient);
    if (std::find(row.begin(), row.end(), e.event) != row.end()) {
      c.disjoint_from_graph = false;
    }
    if (!seen.insert(e).second) {
      c.unique = false;
    }
    --patient[e.patient];
    --event[e.event];
  }
  c.patient_exact = std::all_of(patient.begin(), patient.end(), [](long v) { return v == 0; });
  for (const long v : event) {
    c.event_gap += static_cast<std::size_t>(std::abs(v));
  }
  c.event_exact = c.event_gap == 0;
  return c;
}

}  // namespace

TEST_CASE("sample_invisible partitions the edges") {
  const auto g = BipartiteGraph::build(random_edges(200, 100, 0.1, 3), 200, 100);
  const auto masked = sample_invisible(g, 0.2, 77);
  CHECK(masked.invisible.size() + masked.visible.size() == g.edge_count());
  EdgeList all = masked.invisible;
  all.insert(all.end(), masked.visible.begin(), masked.visible.end());
  normalize_edges(all);
  CHECK(all == g.edges());
  CHECK(std::is_sorted(masked.invisible.begin(), masked.invisible.end()));

  const auto again = sample_invisible(g, 0.2, 77);
  CHECK(again.invisible == masked.invisible);
  CHECK(sample_invisible(g, 0.2, 78).invisible != masked.invisible);
}

TEST_CASE("sample_invisible near-zero probability hides nothing") {
  const auto g = BipartiteGraph::build(random_edges(100, 100, 1.01, 1), 100, 100);
  REQUIRE(g.edge_count() == 10000);
  CHECK(sample_invisible(g, 1e-12, 5).invisible.empty());
}

TEST_CASE("sample_invisible concentrates within 4 sigma") {
  // Exactly 10^5 edges: 500 x 200 complete.
  const auto g = BipartiteGraph::build(random_edges(500, 200, 1.01, 0), 500, 200);
  REQUIRE(g.edge_count() == 100000);
  const double mean = 0.2 * 1e5;
  const double sigma = std::sqrt(1e5 * 0.2 * 0.8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto k = static_cast<double>(sample_invisible(g, 0.2, seed).invisible.size());
    CHECK(std::abs(k - mean) <= 4.0 * sigma);
  }
}

TEST_CASE("degree-preserving sampler on the 2x2 complete-minus-diagonal graph") {
  const auto g = BipartiteGraph::build(EdgeList{{0, 1}, {1, 0}}, 2, 2);
  const EdgeList invisible{{0, 1}, {1, 0}};
  // Enumerate every 2-subset of the four cells; keep those meeting the
  // marginals and avoiding edges.
  std::vector<EdgeList> valid;
  const EdgeList cells{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = a + 1; b < cells.size(); ++b) {
      const EdgeList cand{cells[a], cells[b]};
      const auto c = check_negatives(g, invisible, cand);
      if (c.disjoint_from_graph && c.patient_exact && c.event_exact) {
        valid.push_back(cand);
      }
    }
  }
  REQUIRE(valid.size() == 1);
  CHECK(valid[0] == EdgeList{{0, 0}, {1, 1}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = sample_negative_degree_preserving(g, invisible, seed);
    normalize_edges(s.edges);
    CHECK(s.edges == valid[0]);
    CHECK(!s.relaxed);
    CHECK(s.event_marginal_l1_gap == 0);
  }
}

TEST_CASE("degree-preserving sampler with nothing hidden") {
  const auto g = BipartiteGraph::build(random_edges(10, 10, 0.3, 2), 10, 10);
  const auto s = sample_negative_degree_preserving(g, {}, 1);
  CHECK(s.edges.empty());
  CHECK(!s.relaxed);
}

TEST_CASE("degree-preserving sampler names an infeasible patient") {
  // Patient 1 is linked to every event, so it has no non-edges at all.
  const auto g = BipartiteGraph::build(EdgeList{{0, 0}, {1, 0}, {1, 1}, {1, 2}}, 2, 3);
  try {
    sample_negative_degree_preserving(g, EdgeList{{1, 1}}, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("patient 1") != std::string::npos);
  }
}

TEST_CASE("degree-preserving sampler marginals over 100 random graphs") {
  std::size_t disjoint = 0;
  std::size_t patient_exact = 0;
  std::size_t event_exact = 0;
  std::size_t worst_gap = 0;
  std::size_t flag_agrees = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = BipartiteGraph::build(random_edges(500, 200, 0.05, 1000 + seed), 500, 200);
    const auto masked = sample_invisible(g, 0.2, seed);
    const auto s = sample_negative_degree_preserving(g, masked.invisible, seed);
    const auto c = check_negatives(g, masked.invisible, s.edges);
    disjoint += c.disjoint_from_graph && c.unique;
    patient_exact += c.patient_exact;
    event_exact += c.event_exact;
    worst_gap = std::max(worst_gap, c.event_gap);
    flag_agrees += (s.relaxed == !c.event_exact) && s.event_marginal_l1_gap == c.event_gap;
    CHECK(s.edges.size() == masked.invisible.size());
  }
  MESSAGE("event marginals exact in ", event_exact, "/100, worst gap ", worst_gap);
  CHECK(disjoint == 100);
  CHECK(patient_exact == 100);
  CHECK(flag_agrees == 100);
  CHECK(event_exact >= 95);
}

TEST_CASE("degree-preserving sampler on a dense graph stays patient-exact") {
  // Dense rows leave few non-edges, forcing repair and possibly relaxation.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = BipartiteGraph::build(random_edges(60, 20, 0.6, seed), 60, 20);
    const auto masked = sample_invisible(g, 0.2, seed);
    bool feasible = true;
    for (std::size_t i = 0; i < 60; ++i) {
      std::size_t inv = 0;
      for (const auto& e : masked.invisible) {
        inv += e.patient == i;
      }
      feasible = feasible && inv <= 20 - g.patient_degree(i);
    }
    if (!feasible) {
      continue;
    }
    const auto s = sample_negative_degree_preserving(g, masked.invisible, seed);
    const auto c = check_negatives(g, masked.invisible, s.edges);
    CHECK(c.disjoint_from_graph);
    CHECK(c.unique);
    CHECK(c.patient_exact);
    CHECK(s.relaxed == !c.event_exact);
    CHECK(s.event_marginal_l1_gap == c.event_gap);
  }
}

TEST_CASE("degree-preserving sampler is deterministic given the seed") {
  const auto g = BipartiteGraph::build(random_edges(100, 50, 0.1, 6), 100, 50);
  const auto masked = sample_invisible(g, 0.2, 1);
  const auto a = sample_negative_degree_preserving(g, masked.invisible, 9);
  const auto b = sample_negative_degree_preserving(g, masked.invisible, 9);
  CHECK(a.edges == b.edges);
  CHECK(sample_negative_degree_preserving(g, masked.invisible, 10).edges != a.edges);
}

TEST_CASE("uniform sampler edge cases") {
  const auto g = BipartiteGraph::build(random_edges(7, 6, 0.4, 3), 7, 6);
  CHECK(sample_negative_uniform(g, 0, 1).empty());
  const std::size_t complement = 7 * 6 - g.edge_count();
  auto all = sample_negative_uniform(g, complement, 2);
  normalize_edges(all);
  EdgeList expected;
  for (std::uint32_t i = 0; i < 7; ++i) {
    for (std::uint32_t j = 0; j < 6; ++j) {
      if (!g.contains(i, j)) {
        expected.push_back({i, j});
      }
    }
  }
  CHECK(all == expected);
  CHECK_THROWS_AS(sample_negative_uniform(g, complement + 1, 2), Error);

  const auto few = sample_negative_uniform(g, 3, 4);
  CHECK(few.size() == 3);
  CHECK(check_negatives(g, {}, few).disjoint_from_graph);
  CHECK(check_negatives(g, {}, few).unique);
}

TEST_CASE("uniform sampler per-event counts follow the non-edge counts") {
  const std::size_t m = 40;
  const std::size_t n = 20;
  const auto g = BipartiteGraph::build(random_edges(m, n, 0.3, 12), m, n);
  std::vector<double> observed(n, 0.0);
  const std::size_t k = 60;
  const std::size_t runs = 2000;
  for (std::uint64_t seed = 0; seed < runs; ++seed) {
    for (const auto& e : sample_negative_uniform(g, k, seed)) {
      observed[e.event] += 1.0;
    }
  }
  const double non_edges = static_cast<double>(m * n - g.edge_count());
  double chi2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double expected = static_cast<double>(k * runs) * static_cast<double>(m - g.event_degree(j)) / non_edges;
    chi2 += (observed[j] - expected) * (observed[j] - expected) / expected;
  }
  // 99.9% quantile of chi-square with 19 degrees of freedom.
  MESSAGE("chi-square ", chi2);
  CHECK(chi2 < 43.82);
}

TEST_CASE("sample_batch invariants for both samplers") {
  const auto g = BipartiteGraph::build(random_edges(300, 120, 0.05, 4), 300, 120);
  for (const auto sampler : {NegativeSampler::degree_preserving, NegativeSampler::uniform}) {
    const auto b = sample_batch(g, 0.2, sampler, 31);
    CHECK(b.visible.size() + b.invisible.size() == g.edge_count());
    CHECK(b.negative.size() == b.invisible.size());
    const auto c = check_negatives(g, b.invisible, b.negative);
    CHECK(c.disjoint_from_graph);
    CHECK(c.unique);
    if (sampler == NegativeSampler::degree_preserving) {
      CHECK(c.patient_exact);
      CHECK(b.relaxed == !c.event_exact);
    }
    const auto t = marginals(b.invisible, b.negative, 300, 120);
    std::size_t total = 0;
    for (auto v : t.negative_per_patient) {
      total += v;
    }
    CHECK(total == b.negative.size());
  }
  CHECK(parse_negative_sampler(to_string(NegativeSampler::uniform)) == NegativeSampler::uniform);
  CHECK_THROWS_AS(parse_negative_sampler("bogus"), ConfigError);
}
