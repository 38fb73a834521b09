#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "crimeflow/flownet.hpp"
#include "crimeflow/ingest.hpp"
#include "crimeflow/panel.hpp"

namespace crimeflow {

/// Mobility aggregates of one study year, computed from the transitions that
/// start in that year.
struct Mobility {
    int year = 0;
    std::vector<ResolvedTransition> resolved;
    ODNetwork od;
    RoutedFlows routed;
    CheckinCounts checkins;
    FlowDecomposition flows;
};

inline Mobility compute_mobility(const TractSet& tracts, const AdjacencyNetwork& adj, const TransitionSet& transitions,
                                 const VenueSet& venues, int year, unsigned threads, Diagnostics& diag) {
    if (adj.size() != tracts.size()) throw ValidationError("adjacency network does not match the tract set");
    Mobility m;
    m.year = year;
    m.resolved = resolve_transitions(transitions, venues, tracts, year, diag);
    m.od = build_od_network(m.resolved, tracts.size(), diag);
    m.routed = route_od_flows(adj, m.od, diag, threads);
    m.checkins = aggregate_checkins(m.resolved, tracts.size(), diag);
    m.flows = decompose_flows(m.resolved, tracts.size());
    return m;
}

/// Panel of `year` from its mobility and the incidents of year and year - 1.
inline Panel panel_from_mobility(const TractSet& tracts, const Mobility& m, const CrimeSet& crimes,
                                 const PanelBuildOptions& opt, Diagnostics& diag) {
    PanelInputs in;
    in.tracts = &tracts;
    in.year = m.year;
    in.crime = aggregate_crime(crimes, tracts, m.year, diag, opt.crime_types);
    in.past_crime = aggregate_crime(crimes, tracts, m.year - 1, diag, opt.crime_types);
    in.checkins = m.checkins;
    in.flows = m.flows;
    in.passthrough = m.routed.passthrough;
    in.activity_split = opt.activity_split;
    in.covariates = opt.covariates;
    return assemble_panel(in);
}

/// Tract filter over several study years: a tract is kept when its
/// population and its check-ins in every listed year reach the thresholds.
inline TractSet filter_tracts_for_years(const TractSet& tracts, const TransitionSet& transitions,
                                        const VenueSet& venues, const std::vector<int>& years, std::int64_t pop_min,
                                        std::int64_t checkin_min) {
    if (years.empty()) throw ValidationError("no study years given");
    std::map<TractId, std::int64_t> least;
    for (const auto& t : tracts) least[t.id] = std::numeric_limits<std::int64_t>::max();
    for (int y : years) {
        auto counts = annual_checkins(transitions, venues, y);
        for (auto& [id, v] : least) {
            auto it = counts.find(id);
            v = std::min(v, it == counts.end() ? std::int64_t{0} : it->second);
        }
    }
    return filter_tracts(tracts, least, pop_min, checkin_min);
}

}  // namespace crimeflow
