#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crimeflow/common.hpp"
#include "crimeflow/flownet.hpp"
#include "crimeflow/ingest.hpp"
#include "crimeflow/time.hpp"
#include "crimeflow/util/csv.hpp"
#include "crimeflow/util/io.hpp"

namespace crimeflow {

/// Per-tract hourly counts, indexed [tract][hour].
using TractHourCounts = std::vector<HourVector>;

inline TractHourCounts zero_counts(std::size_t n) { return TractHourCounts(n, zero_hours()); }

inline std::int64_t grand_total(const TractHourCounts& c) {
    std::int64_t s = 0;
    for (const auto& row : c)
        for (auto v : row) s += v;
    return s;
}

inline const std::array<std::string, 3> kCovariateNames{"concentrated_disadvantage", "residential_stability",
                                                        "ethnic_heterogeneity"};

inline std::string activity_column(ActivityType a) { return "checkins_" + std::string(to_string(a)); }

// ---------------------------------------------------------------------------
// Aggregations

struct CheckinCounts {
    TractHourCounts total;
    std::array<TractHourCounts, kActivityTypes> by_activity;
};

/// Each transition contributes a check-in at its source tract (start hour)
/// and one at its destination tract (end hour). Endpoints outside the kept
/// tracts are skipped and counted.
inline CheckinCounts aggregate_checkins(const std::vector<ResolvedTransition>& transitions, std::size_t n_tracts,
                                        Diagnostics& diag) {
    CheckinCounts c;
    c.total = zero_counts(n_tracts);
    for (auto& a : c.by_activity) a = zero_counts(n_tracts);
    for (const auto& t : transitions) {
        if (t.src >= 0) {
            ++c.total[t.src][t.start_hour];
            ++c.by_activity[static_cast<int>(t.src_activity)][t.src][t.start_hour];
        } else {
            diag.warn("checkin_endpoint_dropped");
        }
        if (t.dst >= 0) {
            ++c.total[t.dst][t.end_hour];
            ++c.by_activity[static_cast<int>(t.dst_activity)][t.dst][t.end_hour];
        } else {
            diag.warn("checkin_endpoint_dropped");
        }
    }
    return c;
}

struct FlowDecomposition {
    TractHourCounts inout;
    TractHourCounts selfloop;
};

/// Cross-tract transitions add one incoming/outgoing event at each kept
/// endpoint (start hour for the source, end hour for the destination);
/// same-tract transitions add one self-loop at the start hour.
inline FlowDecomposition decompose_flows(const std::vector<ResolvedTransition>& transitions, std::size_t n_tracts) {
    FlowDecomposition f{zero_counts(n_tracts), zero_counts(n_tracts)};
    for (const auto& t : transitions) {
        if (t.src >= 0 && t.src == t.dst) {
            ++f.selfloop[t.src][t.start_hour];
            continue;
        }
        if (t.src >= 0) ++f.inout[t.src][t.start_hour];
        if (t.dst >= 0) ++f.inout[t.dst][t.end_hour];
    }
    return f;
}

/// Incidents located in kept tracts whose local timestamp falls in `year`.
inline TractHourCounts aggregate_crime(const CrimeSet& crimes, const TractSet& tracts, int year, Diagnostics& diag,
                                       const std::set<CrimeType>& types = {}) {
    auto c = zero_counts(tracts.size());
    for (const auto& inc : crimes) {
        if (year_of(inc.ts) != year) continue;
        if (!types.empty() && !types.count(inc.type)) continue;
        int i = inc.tract_id ? tracts.index_of(*inc.tract_id) : -1;
        if (i < 0) {
            diag.warn("crime_outside_kept_tracts");
            continue;
        }
        ++c[i][hour_of_week(inc.ts)];
    }
    return c;
}

// ---------------------------------------------------------------------------
// Covariates

using CovariateTable = std::map<TractId, std::array<double, 3>>;

inline CovariateTable parse_covariates(const std::string& path) {
    auto r = csv::Reader::open(path);
    r.require_header({"tract_id", kCovariateNames[0], kCovariateNames[1], kCovariateNames[2]});
    CovariateTable out;
    while (r.next()) {
        std::array<double, 3> v{r.number(kCovariateNames[0]), r.number(kCovariateNames[1]),
                                r.number(kCovariateNames[2])};
        if (!out.emplace(std::string(r.field("tract_id")), v).second) r.fail("duplicate tract_id");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Panel

/// Complete (tract x hour-of-week) grid in columnar form. Row r corresponds to
/// tract r / 168 (in TractSet order) and hour r % 168.
struct Panel {
    int year = 0;
    std::vector<TractId> tract_ids;
    std::vector<double> x;  // centroid lon, per tract
    std::vector<double> y;  // centroid lat, per tract
    std::vector<std::int64_t> crime, past_crime, checkins, inout_flow, selfloop_flow, passthrough_flow;
    std::optional<std::array<std::vector<std::int64_t>, kActivityTypes>> activity;
    std::optional<std::vector<std::array<double, 3>>> covariates;  // per tract
    std::map<std::string, std::string> provenance;

    std::size_t n_tracts() const { return tract_ids.size(); }
    std::size_t rows() const { return tract_ids.size() * kHoursPerWeek; }
    static std::size_t tract_of(std::size_t row) { return row / kHoursPerWeek; }
    static int hour_of(std::size_t row) { return static_cast<int>(row % kHoursPerWeek); }

    bool has_column(const std::string& name) const {
        static const std::set<std::string> base{"crime",     "past_crime", "checkins", "inout_flow",
                                                "selfloop_flow", "passthrough_flow", "x", "y", "t", "weekend"};
        if (base.count(name)) return true;
        if (activity)
            for (auto a : kAllActivities)
                if (name == activity_column(a)) return true;
        if (covariates)
            for (const auto& c : kCovariateNames)
                if (name == c) return true;
        return false;
    }

    /// Column as doubles (counts converted exactly).
    std::vector<double> column(const std::string& name) const {
        std::vector<double> out(rows());
        auto from_counts = [&](const std::vector<std::int64_t>& v) {
            for (std::size_t r = 0; r < out.size(); ++r) out[r] = static_cast<double>(v[r]);
        };
        if (name == "crime") from_counts(crime);
        else if (name == "past_crime") from_counts(past_crime);
        else if (name == "checkins") from_counts(checkins);
        else if (name == "inout_flow") from_counts(inout_flow);
        else if (name == "selfloop_flow") from_counts(selfloop_flow);
        else if (name == "passthrough_flow") from_counts(passthrough_flow);
        else if (name == "x") for (std::size_t r = 0; r < out.size(); ++r) out[r] = x[tract_of(r)];
        else if (name == "y") for (std::size_t r = 0; r < out.size(); ++r) out[r] = y[tract_of(r)];
        else if (name == "t") for (std::size_t r = 0; r < out.size(); ++r) out[r] = hour_of(r);
        else if (name == "weekend") for (std::size_t r = 0; r < out.size(); ++r) out[r] = is_weekend_hour(hour_of(r));
        else {
            if (activity)
                for (auto a : kAllActivities)
                    if (name == activity_column(a)) {
                        from_counts((*activity)[static_cast<int>(a)]);
                        return out;
                    }
            if (covariates)
                for (std::size_t c = 0; c < kCovariateNames.size(); ++c)
                    if (name == kCovariateNames[c]) {
                        for (std::size_t r = 0; r < out.size(); ++r) out[r] = (*covariates)[tract_of(r)][c];
                        return out;
                    }
            throw ValidationError("panel has no column '" + name + "'");
        }
        return out;
    }
};

struct PanelInputs {
    const TractSet* tracts = nullptr;
    int year = 0;
    TractHourCounts crime;
    TractHourCounts past_crime;
    CheckinCounts checkins;
    FlowDecomposition flows;
    PassThroughCounts passthrough;
    bool activity_split = false;
    const CovariateTable* covariates = nullptr;
};

/// Joins the aggregates into the complete grid, zero-filling absent cells.
inline Panel assemble_panel(const PanelInputs& in) {
    if (!in.tracts) throw ValidationError("assemble_panel: no tracts");
    const auto& tracts = *in.tracts;
    const std::size_t n = tracts.size();
    auto check = [&](const TractHourCounts& c, const char* what) {
        if (!c.empty() && c.size() != n)
            throw ValidationError(std::string("assemble_panel: ") + what + " covers a different tract set");
    };
    check(in.crime, "crime");
    check(in.past_crime, "past_crime");
    check(in.checkins.total, "checkins");
    check(in.flows.inout, "inout");
    check(in.flows.selfloop, "selfloop");
    check(in.passthrough, "passthrough");

    Panel p;
    p.year = in.year;
    p.tract_ids = tracts.ids();
    for (const auto& t : tracts) {
        p.x.push_back(t.centroid.x);
        p.y.push_back(t.centroid.y);
    }
    const std::size_t rows = n * kHoursPerWeek;
    auto flatten = [&](const TractHourCounts& c) {
        std::vector<std::int64_t> v(rows, 0);
        if (c.empty()) return v;
        for (std::size_t i = 0; i < n; ++i)
            for (int t = 0; t < kHoursPerWeek; ++t) v[i * kHoursPerWeek + t] = c[i][t];
        return v;
    };
    p.crime = flatten(in.crime);
    p.past_crime = flatten(in.past_crime);
    p.checkins = flatten(in.checkins.total);
    p.inout_flow = flatten(in.flows.inout);
    p.selfloop_flow = flatten(in.flows.selfloop);
    p.passthrough_flow = flatten(in.passthrough);
    if (in.activity_split) {
        std::array<std::vector<std::int64_t>, kActivityTypes> a;
        for (int k = 0; k < kActivityTypes; ++k) a[k] = flatten(in.checkins.by_activity[k]);
        p.activity = std::move(a);
    }
    if (in.covariates) {
        std::vector<std::array<double, 3>> cov;
        std::vector<std::string> missing;
        for (const auto& t : tracts) {
            auto it = in.covariates->find(t.id);
            if (it == in.covariates->end()) {
                missing.push_back(t.id);
                cov.push_back({0, 0, 0});
            } else {
                cov.push_back(it->second);
            }
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw ValidationError("covariate file is missing kept tracts: " + list);
        }
        p.covariates = std::move(cov);
    }
    return p;
}

/// Everything the feature stage needs for one study year.
struct PanelBuildOptions {
    bool activity_split = false;
    std::set<CrimeType> crime_types;  // empty = all five
    const CovariateTable* covariates = nullptr;
};

inline Panel build_panel(const TractSet& tracts, const TransitionSet& transitions, const VenueSet& venues,
                         const PassThroughCounts& passthrough, const CrimeSet& crimes, int year,
                         const PanelBuildOptions& opt, Diagnostics& diag) {
    auto resolved = resolve_transitions(transitions, venues, tracts, year, diag);
    PanelInputs in;
    in.tracts = &tracts;
    in.year = year;
    in.crime = aggregate_crime(crimes, tracts, year, diag, opt.crime_types);
    in.past_crime = aggregate_crime(crimes, tracts, year - 1, diag, opt.crime_types);
    in.checkins = aggregate_checkins(resolved, tracts.size(), diag);
    in.flows = decompose_flows(resolved, tracts.size());
    in.passthrough = passthrough;
    in.activity_split = opt.activity_split;
    in.covariates = opt.covariates;
    return assemble_panel(in);
}

// ---------------------------------------------------------------------------
// Panel file

inline std::vector<std::string> panel_columns(const Panel& p) {
    std::vector<std::string> cols{"tract_id",      "t",   "crime", "past_crime", "checkins", "inout_flow",
                                  "selfloop_flow", "passthrough_flow", "x", "y", "weekend"};
    if (p.activity)
        for (auto a : kAllActivities) cols.push_back(activity_column(a));
    if (p.covariates)
        for (const auto& c : kCovariateNames) cols.push_back(c);
    return cols;
}

inline std::string panel_to_csv(const Panel& p) {
    std::string out;
    auto cols = panel_columns(p);
    for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
    out += '\n';
    for (std::size_t r = 0; r < p.rows(); ++r) {
        std::size_t i = Panel::tract_of(r);
        int t = Panel::hour_of(r);
        out += csv::escape(p.tract_ids[i]);
        for (auto v : {std::int64_t(t), p.crime[r], p.past_crime[r], p.checkins[r], p.inout_flow[r],
                       p.selfloop_flow[r], p.passthrough_flow[r]}) {
            out += ',';
            out += std::to_string(v);
        }
        out += ',' + io::fmt_double(p.x[i]) + ',' + io::fmt_double(p.y[i]) + ',' + (is_weekend_hour(t) ? "1" : "0");
        if (p.activity)
            for (int k = 0; k < kActivityTypes; ++k) out += ',' + std::to_string((*p.activity)[k][r]);
        if (p.covariates)
            for (double v : (*p.covariates)[i]) out += ',' + io::fmt_double(v);
        out += '\n';
    }
    return out;
}

/// Reads a panel file written by panel_to_csv, checking grid completeness.
inline Panel read_panel_csv(const std::string& path, int year = 0) {
    auto r = csv::Reader::open(path);
    r.require_header({"tract_id", "t", "crime", "past_crime", "checkins", "inout_flow", "selfloop_flow",
                      "passthrough_flow", "x", "y", "weekend"});
    bool has_activity = r.has(activity_column(ActivityType::work_study));
    bool has_cov = r.has(kCovariateNames[0]);
    Panel p;
    p.year = year;
    std::array<std::vector<std::int64_t>, kActivityTypes> act;
    std::vector<std::array<double, 3>> cov;
    std::size_t row = 0;
    while (r.next()) {
        std::string id(r.field("tract_id"));
        auto t = r.integer("t");
        if (t != static_cast<std::int64_t>(row % kHoursPerWeek)) r.fail("panel rows out of order or incomplete grid");
        if (t == 0) {
            if (!p.tract_ids.empty() && id <= p.tract_ids.back()) r.fail("tract ids not strictly increasing");
            p.tract_ids.push_back(id);
            p.x.push_back(r.number("x"));
            p.y.push_back(r.number("y"));
            if (has_cov) cov.push_back({r.number(kCovariateNames[0]), r.number(kCovariateNames[1]),
                                        r.number(kCovariateNames[2])});
        } else if (id != p.tract_ids.back()) {
            r.fail("incomplete grid for tract '" + p.tract_ids.back() + "'");
        }
        p.crime.push_back(r.integer("crime"));
        p.past_crime.push_back(r.integer("past_crime"));
        p.checkins.push_back(r.integer("checkins"));
        p.inout_flow.push_back(r.integer("inout_flow"));
        p.selfloop_flow.push_back(r.integer("selfloop_flow"));
        p.passthrough_flow.push_back(r.integer("passthrough_flow"));
        if (has_activity)
            for (auto a : kAllActivities) act[static_cast<int>(a)].push_back(r.integer(activity_column(a)));
        ++row;
    }
    if (row % kHoursPerWeek != 0) throw ValidationError(path + ": incomplete grid");
    if (has_activity) p.activity = std::move(act);
    if (has_cov) p.covariates = std::move(cov);
    return p;
}

}  // namespace crimeflow
