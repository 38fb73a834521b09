#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "crimeflow/flownet.hpp"
#include "support.hpp"

using namespace crimeflow;
using testsupport::node_ids;
using testsupport::path_graph;

namespace {

ODNetwork single_od(std::size_t n, int s, int d, int hour, std::int64_t w) {
    ODNetwork od;
    od.nodes = n;
    ODEdge e{s, d, zero_hours()};
    e.weight[hour] = w;
    od.edges.push_back(e);
    return od;
}

/// Sum over OD edges of weight x hop length of the chosen path, per hour.
std::vector<std::int64_t> expected_sp_mass(const RoutedFlows& r, const ODNetwork& od) {
    std::vector<std::int64_t> m(kHoursPerWeek, 0);
    for (std::size_t e = 0; e < od.edges.size(); ++e) {
        if (!r.paths[e]) continue;
        auto hops = static_cast<std::int64_t>(r.paths[e]->size() - 1);
        for (int t = 0; t < kHoursPerWeek; ++t) m[t] += od.edges[e].weight[t] * hops;
    }
    return m;
}

}  // namespace

TEST(QueenAdjacency, GridShapes) {
    EXPECT_EQ(build_queen_adjacency(testsupport::grid_tracts(2, 2)).edge_count(), 6u);
    EXPECT_EQ(build_queen_adjacency(testsupport::grid_tracts(3, 1)).edge_count(), 2u);
    // 3x3 queen grid: 12 rook + 8 diagonal edges.
    EXPECT_EQ(build_queen_adjacency(testsupport::grid_tracts(3, 3)).edge_count(), 20u);
    TractSet apart({make_tract("A", geo::rectangle(0, 0, 1, 1), 1), make_tract("B", geo::rectangle(11, 0, 12, 1), 1)});
    EXPECT_EQ(build_queen_adjacency(apart).edge_count(), 0u);
}

TEST(QueenAdjacency, SymmetricNoSelfEdges) {
    auto adj = build_queen_adjacency(testsupport::grid_tracts(6, 4));
    for (std::size_t i = 0; i < adj.size(); ++i) {
        EXPECT_FALSE(adj.has_edge(int(i), int(i)));
        for (int j : adj.neighbors(int(i))) EXPECT_TRUE(adj.has_edge(j, int(i)));
    }
}

TEST(QueenAdjacency, DegeneratePolygonRejected) {
    TractSet ts({make_tract("A", geo::rectangle(0, 0, 1, 1), 1), make_tract("B", geo::rectangle(1, 0, 1, 1), 1)});
    EXPECT_THROW(build_queen_adjacency(ts), ValidationError);
}

TEST(CustomAdjacency, SymmetrisedAndValidated) {
    auto dir = testsupport::scratch("custom_adj");
    TractSet ts({make_tract("A", geo::rectangle(0, 0, 1, 1), 1), make_tract("B", geo::rectangle(5, 0, 6, 1), 1)});
    Diagnostics diag;
    auto adj = load_custom_adjacency(testsupport::write(dir / "a.csv", "A,B\n"), ts, diag);
    EXPECT_TRUE(adj.has_edge(0, 1));
    EXPECT_TRUE(adj.has_edge(1, 0));
    EXPECT_THROW(load_custom_adjacency(testsupport::write(dir / "self.csv", "A,A\n"), ts, diag), ValidationError);
    try {
        load_custom_adjacency(testsupport::write(dir / "unk.csv", "A,B\nA,Q\n"), ts, diag);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    auto empty = load_custom_adjacency(testsupport::write(dir / "empty.csv", ""), ts, diag);
    EXPECT_EQ(empty.size(), 2u);
    EXPECT_EQ(empty.edge_count(), 0u);
    EXPECT_GT(diag.count("adjacency_empty"), 0);
}

TEST(ODNetwork, AggregationAndDirectedness) {
    std::vector<ResolvedTransition> ts;
    for (int k = 0; k < 5; ++k) ts.push_back({0, 1, 9, 10});
    ts.push_back({1, 0, 3, 3});
    ts.push_back({0, 0, 4, 4});
    Diagnostics diag;
    auto od = build_od_network(ts, 2, diag);
    ASSERT_EQ(od.edges.size(), 2u);
    EXPECT_EQ(od.find(0, 1)->weight[9], 5);
    EXPECT_EQ(od.find(0, 1)->total(), 5);
    EXPECT_EQ(od.find(1, 0)->weight[3], 1);
    EXPECT_EQ(od.find(0, 0), nullptr);
}

TEST(ShortestPath, TieBreakAndIdentity) {
    AdjacencyNetwork p4 = path_graph(4);
    EXPECT_EQ(*shortest_path(p4, 0, 3), (std::vector<int>{0, 1, 2, 3}));
    AdjacencyNetwork cyc(std::vector<TractId>{"A", "B", "C", "D"});
    cyc.add_edge(0, 1);
    cyc.add_edge(1, 2);
    cyc.add_edge(2, 3);
    cyc.add_edge(3, 0);
    EXPECT_EQ(*shortest_path(cyc, TractId("A"), TractId("C")), (std::vector<TractId>{"A", "B", "C"}));
    EXPECT_EQ(*shortest_path(cyc, TractId("A"), TractId("A")), (std::vector<TractId>{"A"}));
    AdjacencyNetwork split(node_ids(3));
    split.add_edge(0, 1);
    EXPECT_FALSE(shortest_path(split, 0, 2));
}

TEST(ShortestPathNetwork, SinglePathWeights) {
    auto adj = path_graph(4);
    auto od = single_od(4, 0, 3, 10, 3);
    Diagnostics diag;
    auto r = route_od_flows(adj, od, diag);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ((*r.sp.find(i, i + 1))[10], 3);
        EXPECT_EQ(r.sp.find(i, i + 1)->at(9), 0);
        EXPECT_EQ((*r.sp.find(i + 1, i))[10], 0);
    }
    EXPECT_EQ(r.passthrough[1][10], 3);
    EXPECT_EQ(r.passthrough[2][10], 3);
    EXPECT_EQ(r.passthrough[0][10], 0);
    EXPECT_EQ(r.passthrough[3][10], 0);
}

TEST(ShortestPathNetwork, ToyGraphAgainstEnumeration) {
    auto adj = path_graph(3);
    ODNetwork od;
    od.nodes = 3;
    ODEdge ac{0, 2, zero_hours()}, bc{1, 2, zero_hours()};
    ac.weight[0] = 2;
    bc.weight[0] = 1;
    od.edges = {ac, bc};
    Diagnostics diag;
    auto sp = build_shortest_path_network(adj, od, diag);
    EXPECT_EQ((*sp.find(1, 2))[0], 3);
    EXPECT_EQ((*sp.find(0, 1))[0], 2);
}

TEST(ShortestPathNetwork, EmptyOdAndAdjacentEndpoints) {
    auto adj = path_graph(4);
    ODNetwork od;
    od.nodes = 4;
    Diagnostics diag;
    auto r = route_od_flows(adj, od, diag);
    for (const auto& w : r.sp.weights) EXPECT_EQ(w, zero_hours());
    auto adjacent = route_od_flows(adj, single_od(4, 1, 2, 5, 7), diag);
    for (const auto& p : adjacent.passthrough) EXPECT_EQ(p, zero_hours());
}

TEST(PassThrough, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> nodes(2, 12);
    std::uniform_real_distribution<double> dens(0.1, 0.6);
    for (int g = 0; g < 60; ++g) {
        int n = nodes(rng);
        auto adj = testsupport::random_graph(rng, n, dens(rng));
        auto od = testsupport::random_od(rng, n, 0.4, 9);
        Diagnostics diag;
        auto r = route_od_flows(adj, od, diag);
        for (std::size_t e = 0; e < od.edges.size(); ++e)
            EXPECT_EQ(r.paths[e], testsupport::brute_force_path(adj, od.edges[e].src, od.edges[e].dst));
        EXPECT_EQ(r.passthrough, testsupport::brute_force_passthrough(adj, od));
    }
}

TEST(PassThrough, ConservationBoundAndUnreachable) {
    std::mt19937_64 rng(7);
    for (int g = 0; g < 40; ++g) {
        auto adj = testsupport::random_graph(rng, 10, 0.25);
        auto od = testsupport::random_od(rng, 10, 0.5, 20);
        Diagnostics diag;
        auto r = route_od_flows(adj, od, diag);
        auto mass = expected_sp_mass(r, od);
        for (int t = 0; t < kHoursPerWeek; ++t) {
            EXPECT_EQ(r.sp.total_at(t), mass[t]);
            for (const auto& p : r.passthrough) EXPECT_LE(p[t], od.total_at(t));
        }
        std::int64_t unreachable = 0;
        for (std::size_t e = 0; e < od.edges.size(); ++e)
            if (!r.paths[e]) unreachable += od.edges[e].total();
        EXPECT_EQ(r.stats.unreachable_transitions, unreachable);
        // Every E_SP edge is an adjacency edge.
        for (std::size_t i = 0; i < adj.size(); ++i)
            for (std::size_t k = r.sp.offsets[i]; k < r.sp.offsets[i + 1]; ++k)
                EXPECT_TRUE(adj.has_edge(int(i), r.sp.targets[k]));
    }
}

TEST(PassThrough, OrderAndThreadInvariant) {
    std::mt19937_64 rng(99);
    auto adj = testsupport::random_graph(rng, 12, 0.3);
    std::vector<ResolvedTransition> ts;
    std::uniform_int_distribution<int> node(0, 11), hour(0, 167);
    for (int k = 0; k < 3000; ++k) {
        std::int16_t h = static_cast<std::int16_t>(hour(rng));
        ts.push_back({node(rng), node(rng), h, h});
    }
    Diagnostics d1, d2;
    auto od1 = build_od_network(ts, 12, d1);
    std::shuffle(ts.begin(), ts.end(), rng);
    auto od2 = build_od_network(ts, 12, d2);
    auto r1 = route_od_flows(adj, od1, d1, 1);
    auto r2 = route_od_flows(adj, od2, d2, 4);
    EXPECT_EQ(r1.passthrough, r2.passthrough);
    EXPECT_EQ(r1.sp.weights, r2.sp.weights);
    EXPECT_EQ(sp_to_csv(r1.sp, adj.ids()), sp_to_csv(r2.sp, adj.ids()));
}

TEST(PassThrough, MonotoneInOdWeight) {
    std::mt19937_64 rng(5);
    for (int g = 0; g < 30; ++g) {
        auto adj = testsupport::random_graph(rng, 9, 0.35);
        auto od = testsupport::random_od(rng, 9, 0.3, 5);
        Diagnostics diag;
        auto before = pass_through_counts(adj, od, diag);
        std::uniform_int_distribution<int> node(0, 8), hour(0, 167);
        int s = node(rng), d = node(rng);
        if (s == d) continue;
        auto* e = od.find(s, d);
        if (e) {
            const_cast<ODEdge*>(e)->weight[hour(rng)] += 1;
        } else {
            ODEdge ne{s, d, zero_hours()};
            ne.weight[hour(rng)] = 1;
            od.edges.push_back(ne);
            std::sort(od.edges.begin(), od.edges.end(),
                      [](const ODEdge& a, const ODEdge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
        }
        auto after = pass_through_counts(adj, od, diag);
        for (std::size_t i = 0; i < before.size(); ++i)
            for (int t = 0; t < kHoursPerWeek; ++t) EXPECT_GE(after[i][t], before[i][t]);
    }
}

TEST(PassThrough, EvenCycleSymmetricDemandMultiset) {
    // 6-cycle with every antipodal pair in both directions: each route has two
    // equal-length options; only the multiset of counts is symmetric.
    AdjacencyNetwork c6(node_ids(6));
    for (int i = 0; i < 6; ++i) c6.add_edge(i, (i + 1) % 6);
    ODNetwork od;
    od.nodes = 6;
    for (int i = 0; i < 6; ++i) {
        ODEdge e{i, (i + 3) % 6, zero_hours()};
        e.weight[0] = 1;
        od.edges.push_back(e);
    }
    std::sort(od.edges.begin(), od.edges.end(),
              [](const ODEdge& a, const ODEdge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
    Diagnostics diag;
    auto p = pass_through_counts(c6, od, diag);
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;
    for (const auto& row : p) {
        counts.push_back(row[0]);
        total += row[0];
    }
    EXPECT_EQ(total, 12);  // each route has two interior nodes
    auto oracle = testsupport::brute_force_passthrough(c6, od);
    std::vector<std::int64_t> oc;
    for (const auto& row : oracle) oc.push_back(row[0]);
    std::sort(counts.begin(), counts.end());
    std::sort(oc.begin(), oc.end());
    EXPECT_EQ(counts, oc);
}

TEST(Export, PassthroughCsvRoundTrip) {
    auto dir = testsupport::scratch("pt_csv");
    auto tracts = testsupport::grid_tracts(4, 3);
    auto adj = build_queen_adjacency(tracts);
    std::mt19937_64 rng(1);
    auto od = testsupport::random_od(rng, 12, 0.5, 4);
    Diagnostics diag;
    auto p = pass_through_counts(adj, od, diag);
    auto path = testsupport::write(dir / "p.csv", passthrough_to_csv(p, tracts.ids()));
    EXPECT_EQ(read_passthrough_csv(path, tracts), p);
}
