#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "crimeflow/common.hpp"
#include "crimeflow/geometry.hpp"
#include "crimeflow/time.hpp"
#include "crimeflow/util/csv.hpp"
#include "crimeflow/util/io.hpp"

namespace crimeflow {

// ---------------------------------------------------------------------------
// Enumerations

enum class ActivityType : std::uint8_t { work_study, restaurants_bars, leisure, shopping, travel };
inline constexpr int kActivityTypes = 5;
inline constexpr std::array<ActivityType, kActivityTypes> kAllActivities{
    ActivityType::work_study, ActivityType::restaurants_bars, ActivityType::leisure, ActivityType::shopping,
    ActivityType::travel};

enum class CrimeType : std::uint8_t { larceny_theft, robbery, assault, burglary, vehicle_theft };
inline constexpr int kCrimeTypes = 5;
inline constexpr std::array<CrimeType, kCrimeTypes> kAllCrimeTypes{CrimeType::larceny_theft, CrimeType::robbery,
                                                                    CrimeType::assault, CrimeType::burglary,
                                                                    CrimeType::vehicle_theft};

inline std::string_view to_string(ActivityType a) {
    static constexpr std::array<std::string_view, kActivityTypes> names{"work_study", "restaurants_bars", "leisure",
                                                                        "shopping", "travel"};
    return names[static_cast<std::size_t>(a)];
}

inline std::string_view to_string(CrimeType c) {
    static constexpr std::array<std::string_view, kCrimeTypes> names{"larceny_theft", "robbery", "assault",
                                                                     "burglary", "vehicle_theft"};
    return names[static_cast<std::size_t>(c)];
}

namespace detail {

/// Lower-case, trim, and fold '/', '-' and spaces into '_'.
inline std::string normalize_key(std::string_view s) {
    std::string out;
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (c == '/' || c == '-' || c == ' ' || c == '\t')
            out.push_back('_');
        else
            out.push_back(static_cast<char>(std::tolower(u)));
    }
    auto b = out.find_first_not_of('_');
    if (b == std::string::npos) return {};
    auto e = out.find_last_not_of('_');
    out = out.substr(b, e - b + 1);
    std::string squeezed;
    for (char c : out)
        if (!(c == '_' && !squeezed.empty() && squeezed.back() == '_')) squeezed.push_back(c);
    return squeezed;
}

}  // namespace detail

inline std::optional<ActivityType> parse_activity_type(std::string_view s) {
    auto k = detail::normalize_key(s);
    for (auto a : kAllActivities)
        if (k == to_string(a)) return a;
    return std::nullopt;
}

/// Accepts the five felony names plus a few common spellings
/// ("larceny/theft", "motor vehicle theft"). Anything else is not a felony of
/// interest.
inline std::optional<CrimeType> parse_crime_type(std::string_view s) {
    auto k = detail::normalize_key(s);
    for (auto c : kAllCrimeTypes)
        if (k == to_string(c)) return c;
    if (k == "larceny" || k == "theft") return CrimeType::larceny_theft;
    if (k == "motor_vehicle_theft" || k == "auto_theft") return CrimeType::vehicle_theft;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Tracts

struct Tract {
    TractId id;
    geo::MultiPolygon polygon;
    geo::Point centroid;
    std::int64_t population = 0;
    geo::BBox box;
};

/// Tracts ordered by id. Node index i in every network is the i-th tract here,
/// so index order equals lexicographic id order.
class TractSet {
public:
    TractSet() = default;

    explicit TractSet(std::vector<Tract> tracts) : tracts_(std::move(tracts)) {
        std::sort(tracts_.begin(), tracts_.end(), [](const Tract& a, const Tract& b) { return a.id < b.id; });
        for (std::size_t i = 0; i < tracts_.size(); ++i) {
            if (!index_.emplace(tracts_[i].id, static_cast<int>(i)).second)
                throw ValidationError("duplicate tract_id '" + tracts_[i].id + "'");
        }
    }

    std::size_t size() const { return tracts_.size(); }
    bool empty() const { return tracts_.empty(); }
    const Tract& operator[](std::size_t i) const { return tracts_[i]; }
    auto begin() const { return tracts_.begin(); }
    auto end() const { return tracts_.end(); }

    /// Index of a tract id, or -1.
    int index_of(const TractId& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? -1 : it->second;
    }
    bool contains(const TractId& id) const { return index_.count(id) > 0; }

    std::vector<TractId> ids() const {
        std::vector<TractId> out;
        out.reserve(tracts_.size());
        for (const auto& t : tracts_) out.push_back(t.id);
        return out;
    }

private:
    std::vector<Tract> tracts_;
    std::unordered_map<TractId, int> index_;
};

/// Builds a tract, validating ring closure and computing centroid and bbox.
inline Tract make_tract(TractId id, geo::MultiPolygon polygon, std::int64_t population) {
    if (polygon.parts.empty()) throw ValidationError("tract '" + id + "': empty geometry");
    for (const auto& part : polygon.parts) {
        if (!geo::is_closed(part.exterior)) throw ValidationError("tract '" + id + "': ring not closed");
        for (const auto& h : part.holes)
            if (!geo::is_closed(h)) throw ValidationError("tract '" + id + "': hole ring not closed");
    }
    if (population < 0) throw ValidationError("tract '" + id + "': negative population");
    Tract t;
    t.id = std::move(id);
    t.polygon = std::move(polygon);
    t.population = population;
    t.box = geo::bbox(t.polygon);
    t.centroid = geo::centroid(t.polygon);
    return t;
}

namespace detail {

inline geo::Ring parse_ring(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw ValidationError(where + ": ring is not an array");
    geo::Ring r;
    r.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_array() || v.size() < 2 || !v[0].is_number() || !v[1].is_number())
            throw ValidationError(where + ": bad coordinate");
        r.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return r;
}

inline geo::Polygon parse_polygon(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ValidationError(where + ": polygon needs at least one ring");
    geo::Polygon p;
    p.exterior = parse_ring(j[0], where);
    for (std::size_t i = 1; i < j.size(); ++i) p.holes.push_back(parse_ring(j[i], where));
    return p;
}

inline std::string json_id(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ValidationError("tract_id must be a string");
}

}  // namespace detail

/// Parses a GeoJSON FeatureCollection whose features carry `tract_id` and
/// `population` properties and Polygon or MultiPolygon geometry.
inline TractSet parse_tracts_json(const nlohmann::json& doc, const std::string& source = "tracts") {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array())
        throw ValidationError(source + ": not a GeoJSON FeatureCollection");
    std::vector<Tract> tracts;
    std::size_t k = 0;
    for (const auto& f : doc["features"]) {
        std::string where = source + ": feature " + std::to_string(k++);
        try {
            const auto& props = f.at("properties");
            auto id = detail::json_id(props.at("tract_id"));
            where += " (tract_id " + id + ")";
            const auto& pop = props.at("population");
            if (!pop.is_number()) throw ValidationError("population must be an integer");
            const auto& g = f.at("geometry");
            std::string type = g.at("type").get<std::string>();
            geo::MultiPolygon mp;
            if (type == "Polygon") {
                mp.parts.push_back(detail::parse_polygon(g.at("coordinates"), where));
            } else if (type == "MultiPolygon") {
                for (const auto& p : g.at("coordinates")) mp.parts.push_back(detail::parse_polygon(p, where));
            } else {
                throw ValidationError("unsupported geometry type " + type);
            }
            tracts.push_back(make_tract(id, std::move(mp), static_cast<std::int64_t>(std::llround(pop.get<double>()))));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": malformed feature: " + e.what());
        }
    }
    return TractSet(std::move(tracts));
}

inline TractSet parse_tracts(const std::string& geojson_path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(csv::read_file(geojson_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(geojson_path + ": invalid JSON: " + e.what());
    }
    return parse_tracts_json(doc, geojson_path);
}

inline nlohmann::json tracts_to_geojson(const TractSet& tracts) {
    nlohmann::json features = nlohmann::json::array();
    auto ring_json = [](const geo::Ring& r) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : r) a.push_back({p.x, p.y});
        return a;
    };
    for (const auto& t : tracts) {
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& part : t.polygon.parts) {
            nlohmann::json poly = nlohmann::json::array();
            poly.push_back(ring_json(part.exterior));
            for (const auto& h : part.holes) poly.push_back(ring_json(h));
            coords.push_back(poly);
        }
        features.push_back({{"type", "Feature"},
                            {"properties",
                             {{"tract_id", t.id},
                              {"population", t.population},
                              {"centroid", {t.centroid.x, t.centroid.y}}}},
                            {"geometry", {{"type", "MultiPolygon"}, {"coordinates", coords}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

/// Grid-bucketed point locator over a TractSet.
class TractLocator {
public:
    explicit TractLocator(const TractSet& tracts, int cells_per_axis = 0) : tracts_(&tracts) {
        if (tracts.empty()) throw ValidationError("tract set is empty");
        for (const auto& t : tracts) {
            extent_.extend({t.box.min_x, t.box.min_y});
            extent_.extend({t.box.max_x, t.box.max_y});
        }
        n_ = cells_per_axis > 0 ? cells_per_axis
                                : std::max(1, static_cast<int>(std::ceil(std::sqrt(double(tracts.size())))));
        buckets_.assign(static_cast<std::size_t>(n_) * n_, {});
        for (std::size_t i = 0; i < tracts.size(); ++i) {
            const auto& b = tracts[i].box;
            auto [x0, y0] = cell({b.min_x, b.min_y});
            auto [x1, y1] = cell({b.max_x, b.max_y});
            for (int cx = x0; cx <= x1; ++cx)
                for (int cy = y0; cy <= y1; ++cy) buckets_[cy * n_ + cx].push_back(static_cast<int>(i));
        }
    }

    /// Index of the containing tract; ties on shared boundaries go to the
    /// lexicographically smallest tract_id. -1 when no tract contains p.
    int locate(const geo::Point& p) const {
        if (!extent_.contains(p, geo::kEps)) return -1;
        auto [cx, cy] = cell(p);
        // Candidate lists are in ascending index (= id) order.
        for (int idx : buckets_[cy * n_ + cx]) {
            const auto& t = (*tracts_)[idx];
            if (t.box.contains(p, geo::kEps) && geo::contains(t.polygon, p)) return idx;
        }
        return -1;
    }

private:
    std::pair<int, int> cell(const geo::Point& p) const {
        double w = extent_.max_x - extent_.min_x, h = extent_.max_y - extent_.min_y;
        int cx = w > 0 ? static_cast<int>((p.x - extent_.min_x) / w * n_) : 0;
        int cy = h > 0 ? static_cast<int>((p.y - extent_.min_y) / h * n_) : 0;
        return {std::clamp(cx, 0, n_ - 1), std::clamp(cy, 0, n_ - 1)};
    }

    const TractSet* tracts_;
    geo::BBox extent_;
    int n_ = 1;
    std::vector<std::vector<int>> buckets_;
};

/// Returns the tract containing p (boundary inclusive, smallest id on ties).
inline std::optional<TractId> assign_point_to_tract(const geo::Point& p, const TractSet& tracts) {
    if (tracts.empty()) throw ValidationError("tract set is empty");
    for (const auto& t : tracts)
        if (t.box.contains(p, geo::kEps) && geo::contains(t.polygon, p)) return t.id;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Venues

/// Table-driven mapping from venue category to activity type. A row whose
/// category is `other` declares the fallback for unmapped categories.
struct CategoryMap {
    std::unordered_map<std::string, ActivityType> mapping;
    std::optional<ActivityType> fallback;

    void add(std::string_view category, ActivityType a) {
        auto key = detail::normalize_key(category);
        if (key == "other")
            fallback = a;
        else
            mapping[key] = a;
    }
    std::optional<ActivityType> lookup(std::string_view category) const {
        auto it = mapping.find(detail::normalize_key(category));
        if (it == mapping.end()) return std::nullopt;
        return it->second;
    }
};

inline CategoryMap parse_category_map(const std::string& path) {
    auto r = csv::Reader::open(path);
    r.require_header({"category", "activity_type"});
    CategoryMap m;
    while (r.next()) {
        auto a = parse_activity_type(r.field("activity_type"));
        if (!a) r.fail("unknown activity_type '" + std::string(r.field("activity_type")) + "'");
        m.add(r.field("category"), *a);
    }
    return m;
}

struct Venue {
    VenueId id;
    geo::Point location;
    std::string category;
    ActivityType activity = ActivityType::leisure;
    std::optional<TractId> tract_id;
};

class VenueSet {
public:
    void add(Venue v) {
        if (!index_.emplace(v.id, venues_.size()).second) throw ValidationError("duplicate venue_id '" + v.id + "'");
        venues_.push_back(std::move(v));
    }
    const Venue* find(const VenueId& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &venues_[it->second];
    }
    std::size_t size() const { return venues_.size(); }
    auto begin() const { return venues_.begin(); }
    auto end() const { return venues_.end(); }
    auto begin() { return venues_.begin(); }
    auto end() { return venues_.end(); }

private:
    std::vector<Venue> venues_;
    std::unordered_map<VenueId, std::size_t> index_;
};

/// Reads `venue_id,lon,lat,category`. An `activity_type` column, when present,
/// takes precedence over the category map; a `tract_id` column is carried
/// through as the resolved tract.
inline VenueSet parse_venues(const std::string& path, const CategoryMap& categories, Diagnostics& diag) {
    auto r = csv::Reader::open(path);
    r.require_header({"venue_id", "lon", "lat", "category"});
    bool has_activity = r.has("activity_type");
    bool has_tract = r.has("tract_id");
    VenueSet out;
    while (r.next()) {
        Venue v;
        v.id = std::string(r.field("venue_id"));
        if (v.id.empty()) r.fail("empty venue_id");
        v.location = {r.number("lon"), r.number("lat")};
        v.category = std::string(r.field("category"));
        std::optional<ActivityType> a;
        if (has_activity) {
            a = parse_activity_type(r.field("activity_type"));
            if (!a) r.fail("unknown activity_type '" + std::string(r.field("activity_type")) + "'");
        } else {
            a = categories.lookup(v.category);
            if (!a) {
                if (!categories.fallback)
                    r.fail("category '" + v.category + "' has no mapping and no 'other' fallback is declared");
                diag.warn("venue_category_unmapped", "venue " + v.id + ": category '" + v.category +
                                                         "' mapped via fallback");
                a = categories.fallback;
            }
        }
        v.activity = *a;
        if (has_tract && !r.field("tract_id").empty()) v.tract_id = std::string(r.field("tract_id"));
        try {
            out.add(std::move(v));
        } catch (const ValidationError& e) {
            r.fail(e.what());
        }
    }
    return out;
}

/// Resolves every venue's tract against `tracts` (overwrites tract_id).
inline void resolve_venues(VenueSet& venues, const TractSet& tracts, Diagnostics& diag) {
    TractLocator loc(tracts);
    for (auto& v : venues) {
        int idx = loc.locate(v.location);
        if (idx < 0) {
            v.tract_id.reset();
            diag.warn("venue_outside_tracts", "venue " + v.id + " lies outside every tract");
        } else {
            v.tract_id = tracts[idx].id;
        }
    }
}

// ---------------------------------------------------------------------------
// Transitions

inline constexpr std::int64_t kMaxTransitionSeconds = 3 * 3600;

struct Transition {
    std::string user_key;
    LocalTime start;
    LocalTime end;
    VenueId src_venue;
    VenueId dst_venue;
};

using TransitionSet = std::vector<Transition>;

inline bool is_valid_transition(const Transition& t) {
    return t.start <= t.end && t.end.seconds - t.start.seconds <= kMaxTransitionSeconds && t.src_venue != t.dst_venue;
}

/// Reads `user_key,start_ts,end_ts,src_venue,dst_venue`. Records violating the
/// transition invariants are dropped and counted.
inline TransitionSet parse_transitions(const std::string& path, const TimeZone& tz, Diagnostics& diag) {
    auto r = csv::Reader::open(path);
    r.require_header({"user_key", "start_ts", "end_ts", "src_venue", "dst_venue"});
    TransitionSet out;
    while (r.next()) {
        auto s = parse_iso8601(r.field("start_ts"));
        auto e = parse_iso8601(r.field("end_ts"));
        if (!s || !e) r.fail("bad timestamp");
        Transition t{std::string(r.field("user_key")), tz.localize(*s), tz.localize(*e),
                     std::string(r.field("src_venue")), std::string(r.field("dst_venue"))};
        if (!is_valid_transition(t)) {
            diag.warn("transition_invalid", path + ":" + std::to_string(r.line()) + ": violates transition rules");
            continue;
        }
        out.push_back(std::move(t));
    }
    return out;
}

struct CheckIn {
    std::string user_key;
    LocalTime ts;
    VenueId venue_id;
};

inline std::vector<CheckIn> parse_checkins(const std::string& path, const TimeZone& tz) {
    auto r = csv::Reader::open(path);
    r.require_header({"user_key", "ts", "venue_id"});
    std::vector<CheckIn> out;
    while (r.next()) {
        auto ts = parse_iso8601(r.field("ts"));
        if (!ts) r.fail("bad timestamp");
        out.push_back({std::string(r.field("user_key")), tz.localize(*ts), std::string(r.field("venue_id"))});
    }
    return out;
}

/// Pairs consecutive check-ins of each user (ordered by time, ties by input
/// order) into transitions when the venues differ and the gap is at most
/// three hours.
inline TransitionSet derive_transitions(const std::vector<CheckIn>& checkins) {
    std::vector<std::size_t> order(checkins.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = checkins[a];
        const auto& y = checkins[b];
        if (x.user_key != y.user_key) return x.user_key < y.user_key;
        return x.ts < y.ts;
    });
    TransitionSet out;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& a = checkins[order[k - 1]];
        const auto& b = checkins[order[k]];
        if (a.user_key != b.user_key || a.venue_id == b.venue_id) continue;
        if (b.ts.seconds - a.ts.seconds > kMaxTransitionSeconds) continue;
        out.push_back({a.user_key, a.ts, b.ts, a.venue_id, b.venue_id});
    }
    return out;
}

/// Drops transitions whose venue is unknown or lies outside every tract
/// (counted), keeping the rest in input order.
inline TransitionSet drop_unassignable(const TransitionSet& in, const VenueSet& venues, Diagnostics& diag) {
    TransitionSet out;
    out.reserve(in.size());
    for (const auto& t : in) {
        const Venue* s = venues.find(t.src_venue);
        const Venue* d = venues.find(t.dst_venue);
        if (!s || !d) {
            diag.warn("transition_unknown_venue");
            continue;
        }
        if (!s->tract_id || !d->tract_id) {
            diag.warn("transition_unassignable_venue");
            continue;
        }
        out.push_back(t);
    }
    return out;
}

inline void write_transitions_csv(std::string& out, const TransitionSet& ts) {
    out += "user_key,start_ts,end_ts,src_venue,dst_venue\n";
    for (const auto& t : ts) {
        out += csv::escape(t.user_key);
        out += ',';
        out += format_local(t.start);
        out += ',';
        out += format_local(t.end);
        out += ',';
        out += csv::escape(t.src_venue);
        out += ',';
        out += csv::escape(t.dst_venue);
        out += '\n';
    }
}

// ---------------------------------------------------------------------------
// Crime

struct CrimeIncident {
    std::string incident_id;
    LocalTime ts;
    geo::Point location;
    CrimeType type = CrimeType::larceny_theft;
    std::optional<TractId> tract_id;
};

using CrimeSet = std::vector<CrimeIncident>;

/// Reads `incident_id,ts,lon,lat,crime_type`, keeping only the felony types in
/// `types_filter` (all five when empty). An empty file yields an empty set. A
/// `tract_id` column, when present, is carried through.
inline CrimeSet parse_crimes(const std::string& path, const TimeZone& tz, const std::set<CrimeType>& types_filter,
                             Diagnostics& diag) {
    auto r = csv::Reader::open(path);
    if (r.empty_body()) return {};
    r.require_header({"incident_id", "ts", "lon", "lat", "crime_type"});
    bool has_tract = r.has("tract_id");
    CrimeSet out;
    while (r.next()) {
        auto type = parse_crime_type(r.field("crime_type"));
        if (!type || (!types_filter.empty() && !types_filter.count(*type))) {
            diag.warn("crime_type_filtered");
            continue;
        }
        auto ts = parse_iso8601(r.field("ts"));
        if (!ts) r.fail("bad timestamp");
        CrimeIncident c{std::string(r.field("incident_id")), tz.localize(*ts), {r.number("lon"), r.number("lat")},
                        *type, std::nullopt};
        if (has_tract && !r.field("tract_id").empty()) c.tract_id = std::string(r.field("tract_id"));
        out.push_back(std::move(c));
    }
    return out;
}

inline void resolve_crimes(CrimeSet& crimes, const TractSet& tracts, Diagnostics& diag) {
    TractLocator loc(tracts);
    for (auto& c : crimes) {
        int idx = loc.locate(c.location);
        if (idx < 0) {
            c.tract_id.reset();
            diag.warn("crime_unassigned");
        } else {
            c.tract_id = tracts[idx].id;
        }
    }
}

// ---------------------------------------------------------------------------
// Tract filtering

/// Check-ins per tract during `year`: each transition starting in that year
/// contributes one check-in at each endpoint's tract.
inline std::map<TractId, std::int64_t> annual_checkins(const TransitionSet& transitions, const VenueSet& venues,
                                                       int year) {
    std::map<TractId, std::int64_t> counts;
    for (const auto& t : transitions) {
        if (year_of(t.start) != year) continue;
        for (const auto* vid : {&t.src_venue, &t.dst_venue}) {
            const Venue* v = venues.find(*vid);
            if (v && v->tract_id) ++counts[*v->tract_id];
        }
    }
    return counts;
}

/// Keeps tracts with population >= pop_min and annual check-ins >= checkin_min
/// (missing counts are zero). An empty result is a configuration error.
inline TractSet filter_tracts(const TractSet& tracts, const std::map<TractId, std::int64_t>& annual,
                              std::int64_t pop_min = 100, std::int64_t checkin_min = 100) {
    std::vector<Tract> kept;
    for (const auto& t : tracts) {
        auto it = annual.find(t.id);
        std::int64_t c = it == annual.end() ? 0 : it->second;
        if (t.population >= pop_min && c >= checkin_min) kept.push_back(t);
    }
    if (kept.empty())
        throw ValidationError("tract filter removed every tract (pop_min=" + std::to_string(pop_min) +
                              ", checkin_min=" + std::to_string(checkin_min) + ")");
    return TractSet(std::move(kept));
}

// ---------------------------------------------------------------------------
// Resolved transitions

/// A transition reduced to what the network and panel stages need: endpoint
/// tract indices into the kept TractSet (-1 when the endpoint's tract was
/// filtered out) and hour-of-week buckets of both endpoints.
struct ResolvedTransition {
    int src = -1;
    int dst = -1;
    std::int16_t start_hour = 0;
    std::int16_t end_hour = 0;
    ActivityType src_activity = ActivityType::leisure;
    ActivityType dst_activity = ActivityType::leisure;
};

/// Resolves the transitions that start in `year` (all years when year == 0)
/// against the kept tracts. Unknown venues and venues outside every tract are
/// dropped and counted; endpoints in dropped tracts keep index -1.
inline std::vector<ResolvedTransition> resolve_transitions(const TransitionSet& transitions, const VenueSet& venues,
                                                           const TractSet& kept, int year, Diagnostics& diag) {
    std::unordered_map<VenueId, std::pair<int, ActivityType>> cache;
    cache.reserve(venues.size());
    for (const auto& v : venues) {
        int idx = v.tract_id ? kept.index_of(*v.tract_id) : -2;
        cache.emplace(v.id, std::make_pair(idx, v.activity));
    }
    std::vector<ResolvedTransition> out;
    out.reserve(transitions.size());
    for (const auto& t : transitions) {
        if (year != 0 && year_of(t.start) != year) continue;
        auto s = cache.find(t.src_venue);
        auto d = cache.find(t.dst_venue);
        if (s == cache.end() || d == cache.end() || s->second.first == -2 || d->second.first == -2) {
            diag.warn("transition_unassignable_venue");
            continue;
        }
        ResolvedTransition r;
        r.src = s->second.first;
        r.dst = d->second.first;
        r.start_hour = static_cast<std::int16_t>(hour_of_week(t.start));
        r.end_hour = static_cast<std::int16_t>(hour_of_week(t.end));
        r.src_activity = s->second.second;
        r.dst_activity = d->second.second;
        if (r.src < 0) diag.warn("endpoint_in_dropped_tract");
        if (r.dst < 0) diag.warn("endpoint_in_dropped_tract");
        out.push_back(r);
    }
    return out;
}

}  // namespace crimeflow
