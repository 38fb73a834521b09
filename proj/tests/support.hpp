#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "crimeflow/flownet.hpp"
#include "crimeflow/ingest.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// Fresh scratch directory per test name, under the system temp dir.
inline fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("crimeflow_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
}

inline std::string node_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "n%03d", i);
    return buf;
}

inline std::vector<std::string> node_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(node_id(i));
    return ids;
}

inline crimeflow::AdjacencyNetwork path_graph(int n) {
    crimeflow::AdjacencyNetwork a(node_ids(n));
    for (int i = 0; i + 1 < n; ++i) a.add_edge(i, i + 1);
    return a;
}

inline crimeflow::AdjacencyNetwork random_graph(std::mt19937_64& rng, int n, double p) {
    crimeflow::AdjacencyNetwork a(node_ids(n));
    std::bernoulli_distribution coin(p);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng)) a.add_edge(i, j);
    return a;
}

inline crimeflow::ODNetwork random_od(std::mt19937_64& rng, int n, double density, int max_w) {
    crimeflow::ODNetwork od;
    od.nodes = static_cast<std::size_t>(n);
    std::bernoulli_distribution coin(density);
    std::uniform_int_distribution<int> hour(0, crimeflow::kHoursPerWeek - 1), w(1, max_w), k(1, 4);
    for (int s = 0; s < n; ++s)
        for (int d = 0; d < n; ++d) {
            if (s == d || !coin(rng)) continue;
            crimeflow::ODEdge e{s, d, crimeflow::zero_hours()};
            int cells = k(rng);
            for (int c = 0; c < cells; ++c) e.weight[hour(rng)] += w(rng);
            od.edges.push_back(e);
        }
    return od;
}

/// Oracle: enumerate every simple path from s to d by DFS, keep the shortest
/// ones and pick the lexicographically smallest id sequence.
inline std::optional<std::vector<int>> brute_force_path(const crimeflow::AdjacencyNetwork& adj, int s, int d) {
    const int n = static_cast<int>(adj.size());
    std::optional<std::vector<std::string>> best_ids;
    std::optional<std::vector<int>> best;
    std::vector<int> stack{s};
    std::vector<bool> used(n, false);
    used[s] = true;
    auto dfs = [&](auto&& self, int u) -> void {
        if (u == d) {
            std::vector<std::string> ids;
            for (int v : stack) ids.push_back(adj.ids()[v]);
            if (!best_ids || ids.size() < best_ids->size() || (ids.size() == best_ids->size() && ids < *best_ids)) {
                best_ids = ids;
                best = stack;
            }
            return;
        }
        for (int v = 0; v < n; ++v) {
            if (used[v] || !adj.has_edge(u, v)) continue;
            used[v] = true;
            stack.push_back(v);
            self(self, v);
            stack.pop_back();
            used[v] = false;
        }
    };
    dfs(dfs, s);
    return best;
}

inline crimeflow::PassThroughCounts brute_force_passthrough(const crimeflow::AdjacencyNetwork& adj,
                                                            const crimeflow::ODNetwork& od) {
    crimeflow::PassThroughCounts p(adj.size(), crimeflow::zero_hours());
    for (const auto& e : od.edges) {
        auto path = brute_force_path(adj, e.src, e.dst);
        if (!path) continue;
        for (std::size_t k = 1; k + 1 < path->size(); ++k)
            for (int t = 0; t < crimeflow::kHoursPerWeek; ++t) p[(*path)[k]][t] += e.weight[t];
    }
    return p;
}

/// Unit-square grid tracts "g{row}{col}" style ids sortable in row-major order.
inline crimeflow::TractSet grid_tracts(int w, int h, std::int64_t population = 1000) {
    std::vector<crimeflow::Tract> ts;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            ts.push_back(crimeflow::make_tract(node_id(r * w + c), crimeflow::geo::rectangle(c, r, c + 1, r + 1),
                                               population));
    return crimeflow::TractSet(std::move(ts));
}

}  // namespace testsupport
