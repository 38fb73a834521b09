#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/geometry.hpp"
#include "crimeflow/ingest.hpp"
#include "crimeflow/util/csv.hpp"
#include "crimeflow/util/io.hpp"
#include "crimeflow/util/parallel.hpp"

namespace crimeflow {

/// Undirected, unweighted contiguity graph over tract indices. Neighbour lists
/// are sorted ascending, which the routing tie-break relies on.
class AdjacencyNetwork {
public:
    AdjacencyNetwork() = default;
    explicit AdjacencyNetwork(std::vector<TractId> ids) : ids_(std::move(ids)), neighbors_(ids_.size()) {}

    std::size_t size() const { return ids_.size(); }
    const std::vector<TractId>& ids() const { return ids_; }
    const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

    /// Adds the undirected edge {i, j}; duplicates are ignored.
    void add_edge(int i, int j) {
        if (i == j) throw ValidationError("self-edge on tract '" + ids_[i] + "'");
        insert_sorted(neighbors_[i], j);
        insert_sorted(neighbors_[j], i);
    }

    bool has_edge(int i, int j) const {
        const auto& n = neighbors_[i];
        return std::binary_search(n.begin(), n.end(), j);
    }

    /// Number of undirected edges.
    std::size_t edge_count() const {
        std::size_t s = 0;
        for (const auto& n : neighbors_) s += n.size();
        return s / 2;
    }

    /// Undirected edges as (i, j) with i < j, in lexicographic order.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (std::size_t i = 0; i < neighbors_.size(); ++i)
            for (int j : neighbors_[i])
                if (static_cast<int>(i) < j) out.emplace_back(static_cast<int>(i), j);
        return out;
    }

private:
    static void insert_sorted(std::vector<int>& v, int x) {
        auto it = std::lower_bound(v.begin(), v.end(), x);
        if (it == v.end() || *it != x) v.insert(it, x);
    }

    std::vector<TractId> ids_;
    std::vector<std::vector<int>> neighbors_;
};

/// Queen contiguity: an edge wherever two tract boundaries share a point.
inline AdjacencyNetwork build_queen_adjacency(const TractSet& tracts) {
    for (const auto& t : tracts)
        if (!(geo::area(t.polygon) > 0)) throw ValidationError("tract '" + t.id + "': degenerate polygon (zero area)");
    AdjacencyNetwork adj(tracts.ids());
    std::vector<int> order(tracts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return tracts[a].box.min_x < tracts[b].box.min_x; });
    for (std::size_t a = 0; a < order.size(); ++a) {
        const auto& ta = tracts[order[a]];
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const auto& tb = tracts[order[b]];
            if (tb.box.min_x > ta.box.max_x + geo::kEps) break;
            if (!ta.box.intersects(tb.box, geo::kEps)) continue;
            if (geo::boundaries_touch(ta.polygon, tb.polygon)) adj.add_edge(order[a], order[b]);
        }
    }
    return adj;
}

/// Reads `tract_a,tract_b` lines (an optional header with those names is
/// skipped) and symmetrises them. Unknown ids and self-edges are rejected
/// with the offending line.
inline AdjacencyNetwork load_custom_adjacency(const std::string& path, const TractSet& tracts, Diagnostics& diag) {
    auto text = csv::read_file(path);
    AdjacencyNetwork adj(tracts.ids());
    std::size_t line_no = 0, pos = 0;
    std::vector<std::string> fields;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        csv::split_record(line, fields);
        if (fields.size() == 1 && fields[0].find_first_not_of(" \t\r") == std::string::npos) continue;
        if (fields.size() != 2) throw ParseError(path, line_no, "expected tract_a,tract_b");
        for (auto& f : fields) {
            auto b = f.find_first_not_of(" \t\r");
            auto e = f.find_last_not_of(" \t\r");
            f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
        }
        if (line_no == 1 && fields[0] == "tract_a" && fields[1] == "tract_b") continue;
        int a = tracts.index_of(fields[0]);
        int b = tracts.index_of(fields[1]);
        if (a < 0) throw ParseError(path, line_no, "unknown tract_id '" + fields[0] + "'");
        if (b < 0) throw ParseError(path, line_no, "unknown tract_id '" + fields[1] + "'");
        if (a == b) throw ParseError(path, line_no, "self-edge '" + fields[0] + "," + fields[1] + "' rejected");
        adj.add_edge(a, b);
    }
    if (adj.edge_count() == 0) diag.warn("adjacency_empty", "custom adjacency has no edges; every OD pair is unreachable");
    return adj;
}

// ---------------------------------------------------------------------------
// Origin-destination network

struct ODEdge {
    int src = 0;
    int dst = 0;
    HourVector weight{};

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto w : weight) s += w;
        return s;
    }
};

/// Directed weighted OD network; edges sorted by (src, dst), each with at
/// least one positive hour.
struct ODNetwork {
    std::size_t nodes = 0;
    std::vector<ODEdge> edges;

    const ODEdge* find(int src, int dst) const {
        auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(src, dst),
                                   [](const ODEdge& e, const std::pair<int, int>& k) {
                                       return std::make_pair(e.src, e.dst) < k;
                                   });
        return (it != edges.end() && it->src == src && it->dst == dst) ? &*it : nullptr;
    }

    std::int64_t total_at(int hour) const {
        std::int64_t s = 0;
        for (const auto& e : edges) s += e.weight[hour];
        return s;
    }
};

/// Counts cross-tract transitions per ordered tract pair at the start hour.
/// Same-tract transitions are left to the panel; transitions with an endpoint
/// outside the kept tracts are skipped and counted.
inline ODNetwork build_od_network(const std::vector<ResolvedTransition>& transitions, std::size_t n_tracts,
                                  Diagnostics& diag) {
    std::unordered_map<std::int64_t, HourVector> acc;
    for (const auto& t : transitions) {
        if (t.src < 0 || t.dst < 0) {
            diag.warn("od_skipped_dropped_endpoint");
            continue;
        }
        if (t.src == t.dst) continue;
        auto key = static_cast<std::int64_t>(t.src) * static_cast<std::int64_t>(n_tracts) + t.dst;
        auto [it, fresh] = acc.try_emplace(key);
        if (fresh) it->second.fill(0);
        ++it->second[t.start_hour];
    }
    ODNetwork od;
    od.nodes = n_tracts;
    od.edges.reserve(acc.size());
    for (auto& [key, w] : acc)
        od.edges.push_back({static_cast<int>(key / static_cast<std::int64_t>(n_tracts)),
                            static_cast<int>(key % static_cast<std::int64_t>(n_tracts)), w});
    std::sort(od.edges.begin(), od.edges.end(),
              [](const ODEdge& a, const ODEdge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
    return od;
}

// ---------------------------------------------------------------------------
// Shortest paths

/// Hop distances to `target` over the adjacency network (-1 = unreachable).
inline std::vector<int> bfs_distances(const AdjacencyNetwork& adj, int target) {
    std::vector<int> dist(adj.size(), -1);
    std::deque<int> queue{target};
    dist[target] = 0;
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int v : adj.neighbors(u))
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }
    return dist;
}

/// Walks from `orig` to the target of `dist_to_target`, always stepping to the
/// smallest-index neighbour one hop closer. Because index order is id order,
/// this yields the lexicographically smallest minimum-hop node sequence.
inline std::optional<std::vector<int>> walk_shortest_path(const AdjacencyNetwork& adj,
                                                          const std::vector<int>& dist_to_target, int orig) {
    if (dist_to_target[orig] < 0) return std::nullopt;
    std::vector<int> path{orig};
    int u = orig;
    while (dist_to_target[u] > 0) {
        for (int v : adj.neighbors(u))
            if (dist_to_target[v] == dist_to_target[u] - 1) {
                u = v;
                break;
            }
        path.push_back(u);
    }
    return path;
}

/// Minimum-hop path from orig to dest, lexicographically smallest among ties;
/// nullopt when unreachable. (orig, orig) yields the single-node path.
inline std::optional<std::vector<int>> shortest_path(const AdjacencyNetwork& adj, int orig, int dest) {
    return walk_shortest_path(adj, bfs_distances(adj, dest), orig);
}

inline std::optional<std::vector<TractId>> shortest_path(const AdjacencyNetwork& adj, const TractId& orig,
                                                         const TractId& dest) {
    const auto& ids = adj.ids();
    auto find = [&](const TractId& id) {
        auto it = std::lower_bound(ids.begin(), ids.end(), id);
        if (it == ids.end() || *it != id) throw ValidationError("unknown tract_id '" + id + "'");
        return static_cast<int>(it - ids.begin());
    };
    auto p = shortest_path(adj, find(orig), find(dest));
    if (!p) return std::nullopt;
    std::vector<TractId> out;
    for (int i : *p) out.push_back(ids[i]);
    return out;
}

/// Directed edge weights of the shortest-path network, stored over the
/// directed version of E_adj in CSR order (node i's outgoing edges follow its
/// sorted neighbour list).
struct ShortestPathNetwork {
    std::vector<std::size_t> offsets;  // size n + 1
    std::vector<int> targets;
    std::vector<HourVector> weights;

    std::size_t nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }

    /// Weight vector of directed edge i -> j, or nullptr when {i, j} is not an
    /// adjacency edge.
    const HourVector* find(int i, int j) const {
        auto b = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
        auto e = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
        auto it = std::lower_bound(b, e, j);
        if (it == e || *it != j) return nullptr;
        return &weights[static_cast<std::size_t>(it - targets.begin())];
    }

    std::int64_t total_at(int hour) const {
        std::int64_t s = 0;
        for (const auto& w : weights) s += w[hour];
        return s;
    }
};

/// Per-tract, per-hour pass-through counts (indexed [tract][hour]).
using PassThroughCounts = std::vector<HourVector>;

struct RoutingStats {
    std::size_t od_pairs = 0;           // distinct OD edges routed
    std::size_t path_computations = 0;  // paths walked (one per distinct OD pair)
    std::size_t bfs_runs = 0;           // one per distinct destination
    std::size_t unreachable_pairs = 0;
    std::int64_t unreachable_transitions = 0;
};

/// Output of routing every OD edge once along its chosen shortest path.
struct RoutedFlows {
    ShortestPathNetwork sp;
    PassThroughCounts passthrough;
    std::vector<std::optional<std::vector<int>>> paths;  // parallel to od.edges
    RoutingStats stats;
};

/// Routes each OD edge along its deterministic shortest path. Paths are
/// computed once per OD pair (one BFS per destination, possibly in parallel);
/// accumulation then runs in OD-edge order with integer additions, so the
/// result does not depend on the thread count.
inline RoutedFlows route_od_flows(const AdjacencyNetwork& adj, const ODNetwork& od, Diagnostics& diag,
                                  unsigned threads = 1) {
    const std::size_t n = adj.size();
    if (od.nodes != 0 && od.nodes != n) throw ValidationError("OD network and adjacency network differ in node count");
    RoutedFlows out;

    // E_SP <- directed E_adj, zero weights.
    out.sp.offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) out.sp.offsets[i + 1] = out.sp.offsets[i] + adj.neighbors(int(i)).size();
    out.sp.targets.reserve(out.sp.offsets[n]);
    for (std::size_t i = 0; i < n; ++i)
        for (int j : adj.neighbors(int(i))) out.sp.targets.push_back(j);
    out.sp.weights.assign(out.sp.offsets[n], zero_hours());
    out.passthrough.assign(n, zero_hours());

    // Group OD edges by destination; one BFS per destination.
    std::map<int, std::vector<std::size_t>> by_dest;
    for (std::size_t e = 0; e < od.edges.size(); ++e) by_dest[od.edges[e].dst].push_back(e);
    std::vector<std::pair<int, std::vector<std::size_t>>> groups(by_dest.begin(), by_dest.end());
    out.paths.assign(od.edges.size(), std::nullopt);
    parallel_for(groups.size(), threads, [&](std::size_t g) {
        auto dist = bfs_distances(adj, groups[g].first);
        for (std::size_t e : groups[g].second) out.paths[e] = walk_shortest_path(adj, dist, od.edges[e].src);
    });
    out.stats.od_pairs = od.edges.size();
    out.stats.path_computations = od.edges.size();
    out.stats.bfs_runs = groups.size();

    for (std::size_t e = 0; e < od.edges.size(); ++e) {
        const auto& edge = od.edges[e];
        const auto& path = out.paths[e];
        if (!path) {
            ++out.stats.unreachable_pairs;
            out.stats.unreachable_transitions += edge.total();
            diag.warn("od_pair_unreachable", adj.ids()[edge.src] + " -> " + adj.ids()[edge.dst] + " is unreachable");
            continue;
        }
        for (std::size_t k = 0; k + 1 < path->size(); ++k) {
            auto& w = out.sp.weights[static_cast<std::size_t>(
                std::lower_bound(out.sp.targets.begin() + static_cast<std::ptrdiff_t>(out.sp.offsets[(*path)[k]]),
                                 out.sp.targets.begin() + static_cast<std::ptrdiff_t>(out.sp.offsets[(*path)[k] + 1]),
                                 (*path)[k + 1]) -
                out.sp.targets.begin())];
            for (int t = 0; t < kHoursPerWeek; ++t) w[t] += edge.weight[t];
        }
        for (std::size_t k = 1; k + 1 < path->size(); ++k) {
            auto& p = out.passthrough[(*path)[k]];
            for (int t = 0; t < kHoursPerWeek; ++t) p[t] += edge.weight[t];
        }
    }
    return out;
}

inline ShortestPathNetwork build_shortest_path_network(const AdjacencyNetwork& adj, const ODNetwork& od,
                                                       Diagnostics& diag, unsigned threads = 1) {
    return route_od_flows(adj, od, diag, threads).sp;
}

inline PassThroughCounts pass_through_counts(const AdjacencyNetwork& adj, const ODNetwork& od, Diagnostics& diag,
                                             unsigned threads = 1) {
    return route_od_flows(adj, od, diag, threads).passthrough;
}

// ---------------------------------------------------------------------------
// Exports

inline std::string adjacency_to_csv(const AdjacencyNetwork& adj) {
    std::string out = "tract_a,tract_b\n";
    for (auto [i, j] : adj.edges()) out += csv::escape(adj.ids()[i]) + "," + csv::escape(adj.ids()[j]) + "\n";
    return out;
}

/// `src,dst,hour,weight`, non-zero cells only.
inline std::string od_to_csv(const ODNetwork& od, const std::vector<TractId>& ids) {
    std::string out = "src,dst,hour,weight\n";
    for (const auto& e : od.edges)
        for (int t = 0; t < kHoursPerWeek; ++t)
            if (e.weight[t] != 0)
                out += csv::escape(ids[e.src]) + "," + csv::escape(ids[e.dst]) + "," + std::to_string(t) + "," +
                       std::to_string(e.weight[t]) + "\n";
    return out;
}

inline std::string sp_to_csv(const ShortestPathNetwork& sp, const std::vector<TractId>& ids) {
    std::string out = "src,dst,hour,weight\n";
    for (std::size_t i = 0; i + 1 < sp.offsets.size(); ++i)
        for (std::size_t e = sp.offsets[i]; e < sp.offsets[i + 1]; ++e)
            for (int t = 0; t < kHoursPerWeek; ++t)
                if (sp.weights[e][t] != 0)
                    out += csv::escape(ids[i]) + "," + csv::escape(ids[sp.targets[e]]) + "," + std::to_string(t) +
                           "," + std::to_string(sp.weights[e][t]) + "\n";
    return out;
}

/// `tract_id,t,passthrough_flow`, non-zero cells only.
inline std::string passthrough_to_csv(const PassThroughCounts& p, const std::vector<TractId>& ids) {
    std::string out = "tract_id,t,passthrough_flow\n";
    for (std::size_t i = 0; i < p.size(); ++i)
        for (int t = 0; t < kHoursPerWeek; ++t)
            if (p[i][t] != 0) out += csv::escape(ids[i]) + "," + std::to_string(t) + "," + std::to_string(p[i][t]) + "\n";
    return out;
}

inline PassThroughCounts read_passthrough_csv(const std::string& path, const TractSet& tracts) {
    auto r = csv::Reader::open(path);
    r.require_header({"tract_id", "t", "passthrough_flow"});
    PassThroughCounts p(tracts.size(), zero_hours());
    while (r.next()) {
        int i = tracts.index_of(std::string(r.field("tract_id")));
        if (i < 0) r.fail("unknown tract_id '" + std::string(r.field("tract_id")) + "'");
        auto t = r.integer("t");
        if (t < 0 || t >= kHoursPerWeek) r.fail("hour out of range");
        p[i][t] = r.integer("passthrough_flow");
    }
    return p;
}

}  // namespace crimeflow
