#pragma once

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "crimeflow/flownet.hpp"
#include "crimeflow/ingest.hpp"
#include "crimeflow/panel.hpp"
#include "crimeflow/pipeline.hpp"
#include "crimeflow/util/io.hpp"
#include "crimeflow/util/parallel.hpp"
#include "crimeflow/util/rng.hpp"

namespace crimeflow::synth {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coefficients of the generating crime model. The log mean of cell (i, t) is
/// nu + alpha_i + theta_t + beta*past + gamma*checkins + delta*passthrough
/// + inout*inout + selfloop*selfloop + delta_step*[passthrough >= q], where q
/// is the step_quantile of that year's pass-through cells.
struct TruthParams {
    double nu = -1.0;
    double beta = 0.05;
    double gamma = 0.01;
    double delta = 0.02;
    double inout = 0;
    double selfloop = 0;
    double delta_step = 0;
    double step_quantile = 0.5;
    double sigma_alpha = 0.3;
    double sigma_theta = 0.3;
    double nb_theta = 2.0;  // infinity = Poisson
};

struct SynthConfig {
    std::uint64_t seed = 1;
    int width = 10;
    int height = 5;
    int venues_min = 3;
    int venues_max = 8;
    double popularity_sigma = 0.8;
    double transitions = 200000;  // expected total over the study years
    double gravity = 2.0;         // infinity keeps only adjacent cross-tract pairs
    double selfloop_share = 0.2;
    int users = 5000;
    std::array<double, kActivityTypes> activity_mix{0.1011, 0.5011, 0.1282, 0.1556, 0.1140};
    int base_year = 2011;
    int study_years = 2;
    std::int64_t population_min = 1000;
    std::int64_t population_max = 6000;
    TruthParams truth;

    int first_study_year() const { return base_year + 1; }
    std::size_t n_tracts() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    void validate() const {
        auto fail = [](const std::string& m) { throw ValidationError("synth config: " + m); };
        if (width < 1 || height < 1 || width * height < 4) fail("grid must have at least 4 tracts");
        if (venues_min < 2 || venues_max < venues_min) fail("need 2 <= venues_min <= venues_max");
        if (!(popularity_sigma >= 0)) fail("popularity_sigma must be >= 0");
        if (!(transitions >= 0) || !std::isfinite(transitions)) fail("transitions must be finite and >= 0");
        if (!(gravity >= 0)) fail("gravity must be >= 0");
        if (!(selfloop_share >= 0 && selfloop_share <= 1)) fail("selfloop_share must lie in [0, 1]");
        if (users < 1) fail("users must be positive");
        double s = 0;
        for (double a : activity_mix) {
            if (!(a >= 0)) fail("activity_mix entries must be >= 0");
            s += a;
        }
        if (!(s > 0)) fail("activity_mix must have positive mass");
        if (study_years < 1) fail("study_years must be >= 1");
        if (population_min < 0 || population_max < population_min) fail("bad population range");
        if (!(truth.nb_theta > 0)) fail("nb_theta must be positive");
        if (!(truth.sigma_alpha >= 0) || !(truth.sigma_theta >= 0)) fail("fixed-effect spreads must be >= 0");
        if (!(truth.step_quantile >= 0 && truth.step_quantile <= 1)) fail("step_quantile must lie in [0, 1]");
    }
};

// ---------------------------------------------------------------------------
// Config (de)serialisation; "inf" is accepted for gravity and nb_theta.

namespace detail {

inline double number_or_inf(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string() && (v == "inf" || v == "infinity")) return kInf;
    throw ValidationError("synth config: '" + key + "' must be a number or \"inf\"");
}

inline nlohmann::json inf_or_number(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("synth config: bad value for '") + key + "'");
    }
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ValidationError("synth config: " + where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (const char* n : known) ok = ok || k == n;
        if (!ok) throw ValidationError("synth config: unknown key '" + k + "' in " + where);
    }
}

}  // namespace detail

inline SynthConfig config_from_json(const nlohmann::json& j) {
    SynthConfig c;
    detail::check_keys(j,
                       {"seed", "width", "height", "venues_min", "venues_max", "popularity_sigma", "transitions",
                        "gravity", "selfloop_share", "users", "activity_mix", "base_year", "study_years",
                        "population_min", "population_max", "truth"},
                       "synth");
    detail::take(j, "seed", c.seed);
    detail::take(j, "width", c.width);
    detail::take(j, "height", c.height);
    detail::take(j, "venues_min", c.venues_min);
    detail::take(j, "venues_max", c.venues_max);
    detail::take(j, "popularity_sigma", c.popularity_sigma);
    detail::take(j, "transitions", c.transitions);
    if (j.contains("gravity")) c.gravity = detail::number_or_inf(j["gravity"], "gravity");
    detail::take(j, "selfloop_share", c.selfloop_share);
    detail::take(j, "users", c.users);
    detail::take(j, "activity_mix", c.activity_mix);
    detail::take(j, "base_year", c.base_year);
    detail::take(j, "study_years", c.study_years);
    detail::take(j, "population_min", c.population_min);
    detail::take(j, "population_max", c.population_max);
    if (j.contains("truth")) {
        const auto& t = j["truth"];
        detail::check_keys(t,
                           {"nu", "beta", "gamma", "delta", "inout", "selfloop", "delta_step", "step_quantile",
                            "sigma_alpha", "sigma_theta", "nb_theta"},
                           "truth");
        detail::take(t, "nu", c.truth.nu);
        detail::take(t, "beta", c.truth.beta);
        detail::take(t, "gamma", c.truth.gamma);
        detail::take(t, "delta", c.truth.delta);
        detail::take(t, "inout", c.truth.inout);
        detail::take(t, "selfloop", c.truth.selfloop);
        detail::take(t, "delta_step", c.truth.delta_step);
        detail::take(t, "step_quantile", c.truth.step_quantile);
        detail::take(t, "sigma_alpha", c.truth.sigma_alpha);
        detail::take(t, "sigma_theta", c.truth.sigma_theta);
        if (t.contains("nb_theta")) c.truth.nb_theta = detail::number_or_inf(t["nb_theta"], "nb_theta");
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const SynthConfig& c) {
    const auto& t = c.truth;
    return {{"seed", c.seed},
            {"width", c.width},
            {"height", c.height},
            {"venues_min", c.venues_min},
            {"venues_max", c.venues_max},
            {"popularity_sigma", c.popularity_sigma},
            {"transitions", c.transitions},
            {"gravity", detail::inf_or_number(c.gravity)},
            {"selfloop_share", c.selfloop_share},
            {"users", c.users},
            {"activity_mix", c.activity_mix},
            {"base_year", c.base_year},
            {"study_years", c.study_years},
            {"population_min", c.population_min},
            {"population_max", c.population_max},
            {"truth",
             {{"nu", t.nu},
              {"beta", t.beta},
              {"gamma", t.gamma},
              {"delta", t.delta},
              {"inout", t.inout},
              {"selfloop", t.selfloop},
              {"delta_step", t.delta_step},
              {"step_quantile", t.step_quantile},
              {"sigma_alpha", t.sigma_alpha},
              {"sigma_theta", t.sigma_theta},
              {"nb_theta", detail::inf_or_number(t.nb_theta)}}}};
}

// ---------------------------------------------------------------------------
// City

inline const std::array<std::array<const char*, 4>, kActivityTypes> kCategoryNames{{
    {"Office", "University", "School", "Coworking Space"},
    {"Restaurant", "Bar", "Cafe", "Pub"},
    {"Park", "Gym", "Museum", "Theater"},
    {"Mall", "Grocery Store", "Boutique", "Market"},
    {"Train Station", "Bus Stop", "Airport", "Hotel"},
}};

struct City {
    TractSet tracts;
    VenueSet venues;  // tract_id set by construction
    CategoryMap categories;
    std::vector<std::vector<std::size_t>> tract_venues;  // venue positions per tract
    std::vector<double> popularity;                       // per venue position
    std::vector<std::pair<int, int>> cell;                // (col, row) per tract
};

inline std::string tract_id_of(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%05zu", i);
    return buf;
}

/// Tract i covers the unit square [col, col+1] x [row, row+1] with
/// col = i % W, row = i / W. Venues sit strictly inside their tract.
inline City generate_city(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.n_tracts();
    City c;
    std::vector<Tract> tracts;
    c.cell.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        int col = static_cast<int>(i % cfg.width), row = static_cast<int>(i / cfg.width);
        c.cell[i] = {col, row};
        Rng rng(derive_seed(cfg.seed, {1, i}));
        auto pop = uniform_int(rng, cfg.population_min, cfg.population_max);
        tracts.push_back(make_tract(tract_id_of(i), geo::rectangle(col, row, col + 1, row + 1), pop));
    }
    c.tracts = TractSet(std::move(tracts));

    for (int a = 0; a < kActivityTypes; ++a)
        for (const char* name : kCategoryNames[a]) c.categories.add(name, static_cast<ActivityType>(a));

    std::array<double, kActivityTypes> cum{};
    double s = 0;
    for (int a = 0; a < kActivityTypes; ++a) cum[a] = (s += cfg.activity_mix[a]);
    c.tract_venues.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(cfg.seed, {2, i}));
        auto count = uniform_int(rng, cfg.venues_min, cfg.venues_max);
        boost::random::lognormal_distribution<double> lognormal(0.0, cfg.popularity_sigma);
        for (std::int64_t k = 0; k < count; ++k) {
            Venue v;
            char buf[48];
            std::snprintf(buf, sizeof buf, "V%05zu_%03lld", i, static_cast<long long>(k));
            v.id = buf;
            v.location = {c.cell[i].first + 0.02 + 0.96 * uniform01(rng), c.cell[i].second + 0.02 + 0.96 * uniform01(rng)};
            double u = uniform01(rng) * s;
            int a = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
            a = std::min(a, kActivityTypes - 1);
            v.activity = static_cast<ActivityType>(a);
            v.category = kCategoryNames[a][uniform_int(rng, 0, 3)];
            v.tract_id = c.tracts[i].id;
            double popularity = cfg.popularity_sigma > 0 ? lognormal(rng) : 1.0;
            c.tract_venues[i].push_back(c.popularity.size());
            c.popularity.push_back(popularity);
            c.venues.add(std::move(v));
        }
    }
    return c;
}

/// Hop distance on the queen grid (Chebyshev distance between cells).
inline int grid_hops(const City& c, std::size_t a, std::size_t b) {
    return std::max(std::abs(c.cell[a].first - c.cell[b].first), std::abs(c.cell[a].second - c.cell[b].second));
}

// ---------------------------------------------------------------------------
// Transitions

/// Smooth relative intensity per hour-of-week: a midday plateau, an evening
/// peak (stronger on weekends), a weekday morning commute and a night floor.
inline double hour_intensity(int t) {
    const bool weekend = is_weekend_hour(t);
    const double h = t % 24 + 0.5;
    auto bump = [&](double centre, double width) { return std::exp(-0.5 * std::pow((h - centre) / width, 2)); };
    double v = 0.15 + bump(12.5, 3.5) + (weekend ? 0.9 : 0.6) * bump(19.5, 2.5);
    if (!weekend) v += 0.5 * bump(8.5, 1.5);
    return v;
}

/// Cumulative OD demand over the n*n ordered pairs (row-major, src first).
/// Same-tract pairs share selfloop_share of the mass by tract popularity;
/// cross pairs share the rest by gravity, computed in log space.
inline std::vector<double> od_demand(const SynthConfig& cfg, const City& c) {
    const std::size_t n = c.tracts.size();
    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (auto v : c.tract_venues[i]) s += c.popularity[v];
        logp[i] = std::log(s);
    }
    std::vector<double> w(n * n, 0.0);
    double lmax = -kInf;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            int hops = grid_hops(c, a, b);
            if (std::isinf(cfg.gravity) && hops > 1) continue;
            double l = logp[a] + logp[b] - (std::isinf(cfg.gravity) ? 0.0 : cfg.gravity * std::log1p(hops));
            w[a * n + b] = l;
            lmax = std::max(lmax, l);
        }
    double cross = 0, self = 0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) {
                self += std::exp(logp[a]);
                continue;
            }
            int hops = grid_hops(c, a, b);
            if (std::isinf(cfg.gravity) && hops > 1) continue;
            cross += (w[a * n + b] = std::exp(w[a * n + b] - lmax));
        }
    for (std::size_t a = 0; a < n; ++a) w[a * n + a] = cfg.selfloop_share * std::exp(logp[a]) / self;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) w[a * n + b] *= (1 - cfg.selfloop_share) / cross;
    for (std::size_t k = 1; k < w.size(); ++k) w[k] += w[k - 1];
    return w;
}

inline std::vector<int> study_years(const SynthConfig& cfg) {
    std::vector<int> ys;
    for (int k = 0; k < cfg.study_years; ++k) ys.push_back(cfg.first_study_year() + k);
    return ys;
}

/// Transitions starting in the study years. Each real hour receives a
/// Poisson count with mean proportional to its hour-of-week intensity, so the
/// expected total is cfg.transitions. Every day has its own derived stream.
inline TransitionSet generate_transitions(const SynthConfig& cfg, const City& c, unsigned threads = 1) {
    if (cfg.transitions <= 0) return {};
    const std::size_t n = c.tracts.size();
    const auto cum = od_demand(cfg, c);
    struct Day {
        int year;
        std::int64_t start;  // local seconds of 00:00
    };
    std::vector<Day> days;
    double mass = 0;
    for (int y : study_years(cfg)) {
        for (std::int64_t s = make_local(y, 1, 1).seconds; s < make_local(y + 1, 1, 1).seconds; s += 86400) {
            days.push_back({y, s});
            for (int h = 0; h < 24; ++h) mass += hour_intensity(hour_of_week(LocalTime{s + h * 3600}));
        }
    }
    const double scale = cfg.transitions / mass;

    auto pick_venue = [&](Rng& rng, std::size_t tract, std::optional<std::size_t> exclude) {
        const auto& vs = c.tract_venues[tract];
        double total = 0;
        for (auto v : vs)
            if (v != exclude) total += c.popularity[v];
        double u = uniform01(rng) * total;
        std::size_t last = vs.front();
        for (auto v : vs) {
            if (v == exclude) continue;
            last = v;
            if ((u -= c.popularity[v]) < 0) return v;
        }
        return last;
    };
    std::vector<const Venue*> venue_at;
    for (const auto& v : c.venues) venue_at.push_back(&v);

    std::vector<TransitionSet> per_day(days.size());
    parallel_for(days.size(), threads, [&](std::size_t d) {
        Rng rng(derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(days[d].year), d}));
        auto& out = per_day[d];
        for (int h = 0; h < 24; ++h) {
            const std::int64_t hs = days[d].start + h * 3600;
            const double mean = scale * hour_intensity(hour_of_week(LocalTime{hs}));
            const auto count = boost::random::poisson_distribution<std::int64_t, double>(mean)(rng);
            for (std::int64_t k = 0; k < count; ++k) {
                double u = uniform01(rng) * cum.back();
                std::size_t pair = std::min<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(),
                                                         cum.size() - 1);
                std::size_t a = pair / n, b = pair % n;
                auto src = pick_venue(rng, a, std::nullopt);
                auto dst = pick_venue(rng, b, a == b ? std::optional<std::size_t>(src) : std::nullopt);
                Transition t;
                char buf[16];
                std::snprintf(buf, sizeof buf, "u%06lld", static_cast<long long>(uniform_int(rng, 0, cfg.users - 1)));
                t.user_key = buf;
                t.start = LocalTime{hs + uniform_int(rng, 0, 3599)};
                t.end = LocalTime{t.start.seconds + uniform_int(rng, 1, kMaxTransitionSeconds)};
                t.src_venue = venue_at[src]->id;
                t.dst_venue = venue_at[dst]->id;
                out.push_back(std::move(t));
            }
        }
    });
    TransitionSet all;
    std::size_t total = 0;
    for (const auto& d : per_day) total += d.size();
    all.reserve(total);
    for (auto& d : per_day) std::move(d.begin(), d.end(), std::back_inserter(all));
    return all;
}

// ---------------------------------------------------------------------------
// Crime

struct YearTruth {
    int year = 0;
    double step_threshold = 0;  // pass-through level of the step term
    TractHourCounts counts;     // realised crime per cell
    std::vector<double> log_mean;
};

/// Realised generating quantities. Written to its own directory and never
/// read back by the estimation stages.
struct GroundTruth {
    std::vector<double> alpha;  // per tract, in TractSet order
    std::vector<double> theta;  // per hour-of-week
    std::vector<YearTruth> years;  // base year first
    std::vector<Panel> panels;     // per study year, from the production pipeline
};

namespace detail {

inline std::int64_t draw_count(Rng& rng, double mu, double theta) {
    if (mu <= 0) return 0;
    double lambda = mu;
    if (std::isfinite(theta) && theta < 1e8) lambda = boost::random::gamma_distribution<double>(theta, mu / theta)(rng);
    if (!(lambda > 0)) return 0;
    return boost::random::poisson_distribution<std::int64_t, double>(lambda)(rng);
}

/// Start seconds of every occurrence of each hour-of-week within `year`.
inline std::array<std::vector<std::int64_t>, kHoursPerWeek> hour_occurrences(int year) {
    std::array<std::vector<std::int64_t>, kHoursPerWeek> occ;
    for (std::int64_t s = make_local(year, 1, 1).seconds; s < make_local(year + 1, 1, 1).seconds; s += 3600)
        occ[hour_of_week(LocalTime{s})].push_back(s);
    return occ;
}

inline double quantile_of(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    return v[k];
}

}  // namespace detail

struct SynthCity {
    SynthConfig config;
    City city;
    TransitionSet transitions;
    CrimeSet crimes;
    GroundTruth truth;
};

/// Crimes for the base year and every study year. Study-year features come
/// from the production mobility pipeline run on the generated transitions.
inline void generate_crimes(SynthCity& s, unsigned threads, Diagnostics& diag) {
    const auto& cfg = s.config;
    const auto& T = cfg.truth;
    const auto& tracts = s.city.tracts;
    const std::size_t n = tracts.size();
    auto& gt = s.truth;
    {
        Rng rng(derive_seed(cfg.seed, {4}));
        boost::random::normal_distribution<double> na(0.0, 1.0);
        gt.alpha.resize(n);
        for (auto& a : gt.alpha) a = T.sigma_alpha * na(rng);
        gt.theta.resize(kHoursPerWeek);
        for (auto& t : gt.theta) t = T.sigma_theta * na(rng);
    }
    const auto adj = build_queen_adjacency(tracts);
    std::vector<Mobility> mob;

    std::vector<int> years{cfg.base_year};
    for (int y : study_years(cfg)) years.push_back(y);
    for (std::size_t yi = 0; yi < years.size(); ++yi) {
        YearTruth yt;
        yt.year = years[yi];
        yt.log_mean.assign(n * kHoursPerWeek, 0.0);
        const Mobility* m = nullptr;
        if (yi > 0) {
            mob.push_back(compute_mobility(tracts, adj, s.transitions, s.city.venues, yt.year, threads, diag));
            m = &mob.back();
            if (T.delta_step != 0) {
                std::vector<double> pt;
                for (const auto& row : m->routed.passthrough)
                    for (auto v : row) pt.push_back(static_cast<double>(v));
                yt.step_threshold = detail::quantile_of(std::move(pt), T.step_quantile);
            }
        }
        const auto* past = yi > 0 ? &gt.years[yi - 1].counts : nullptr;
        for (std::size_t i = 0; i < n; ++i)
            for (int t = 0; t < kHoursPerWeek; ++t) {
                double l = T.nu + gt.alpha[i] + gt.theta[t];
                if (m) {
                    double pt = static_cast<double>(m->routed.passthrough[i][t]);
                    l += T.beta * static_cast<double>((*past)[i][t]) + T.gamma * m->checkins.total[i][t] +
                         T.delta * pt + T.inout * m->flows.inout[i][t] + T.selfloop * m->flows.selfloop[i][t];
                    if (T.delta_step != 0 && pt >= yt.step_threshold) l += T.delta_step;
                }
                if (l > 20)
                    throw ValidationError("synth config: crime mean overflows (log mean " + io::fmt_fixed(l, 2) +
                                          " at tract " + tracts[i].id + ", hour " + std::to_string(t) + ", year " +
                                          std::to_string(yt.year) + "); lower the coefficients or the volume");
                yt.log_mean[i * kHoursPerWeek + t] = l;
            }

        const auto occ = detail::hour_occurrences(yt.year);
        std::vector<CrimeSet> per_tract(n);
        yt.counts = zero_counts(n);
        parallel_for(n, threads, [&](std::size_t i) {
            Rng rng(derive_seed(cfg.seed, {5, static_cast<std::uint64_t>(yt.year), i}));
            const auto [col, row] = s.city.cell[i];
            for (int t = 0; t < kHoursPerWeek; ++t) {
                auto k = detail::draw_count(rng, std::exp(yt.log_mean[i * kHoursPerWeek + t]), T.nb_theta);
                yt.counts[i][t] = k;
                for (std::int64_t j = 0; j < k; ++j) {
                    CrimeIncident c;
                    char buf[48];
                    std::snprintf(buf, sizeof buf, "C%d_%05zu_%03d_%lld", yt.year, i, t, static_cast<long long>(j));
                    c.incident_id = buf;
                    const auto& o = occ[t];
                    c.ts = LocalTime{o[uniform_int(rng, 0, static_cast<std::int64_t>(o.size()) - 1)] +
                                     uniform_int(rng, 0, 3599)};
                    c.location = {col + 0.02 + 0.96 * uniform01(rng), row + 0.02 + 0.96 * uniform01(rng)};
                    c.type = kAllCrimeTypes[uniform_int(rng, 0, kCrimeTypes - 1)];
                    c.tract_id = tracts[i].id;
                    per_tract[i].push_back(std::move(c));
                }
            }
        });
        for (auto& v : per_tract) std::move(v.begin(), v.end(), std::back_inserter(s.crimes));
        gt.years.push_back(std::move(yt));
    }
    for (const auto& m : mob) gt.panels.push_back(panel_from_mobility(tracts, m, s.crimes, {}, diag));
}

/// Full generation; a pure function of the config (thread count only changes
/// the schedule).
inline SynthCity generate(const SynthConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    SynthCity s;
    s.config = cfg;
    s.city = generate_city(cfg);
    s.transitions = generate_transitions(cfg, s.city, threads);
    Diagnostics diag;
    generate_crimes(s, threads, diag);
    return s;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json truth_to_json(const SynthCity& s) {
    using nlohmann::json;
    json alpha = json::object();
    for (std::size_t i = 0; i < s.city.tracts.size(); ++i) alpha[s.city.tracts[i].id] = s.truth.alpha[i];
    json years = json::array();
    for (const auto& y : s.truth.years) {
        std::int64_t total = 0;
        for (const auto& row : y.counts)
            for (auto v : row) total += v;
        years.push_back({{"year", y.year}, {"crimes", total}, {"step_threshold", y.step_threshold}});
    }
    const auto& T = s.config.truth;
    return {{"config", config_to_json(s.config)},
            {"coefficients",
             {{"past_crime", T.beta},
              {"checkins", T.gamma},
              {"passthrough_flow", T.delta},
              {"inout_flow", T.inout},
              {"selfloop_flow", T.selfloop}}},
            {"nu", T.nu},
            {"nb_theta", detail::inf_or_number(T.nb_theta)},
            {"alpha", alpha},
            {"theta", s.truth.theta},
            {"years", years},
            {"n_transitions", s.transitions.size()},
            {"n_crimes", s.crimes.size()}};
}

inline std::string venues_csv(const City& c) {
    std::string out = "venue_id,lon,lat,category\n";
    for (const auto& v : c.venues)
        out += csv::escape(v.id) + ',' + io::fmt_double(v.location.x) + ',' + io::fmt_double(v.location.y) + ',' +
               csv::escape(v.category) + '\n';
    return out;
}

inline std::string category_map_csv() {
    std::string out = "category,activity_type\n";
    for (int a = 0; a < kActivityTypes; ++a)
        for (const char* name : kCategoryNames[a])
            out += csv::escape(name) + ',' + std::string(to_string(static_cast<ActivityType>(a))) + '\n';
    return out;
}

inline std::string crimes_csv(const CrimeSet& crimes) {
    std::string out = "incident_id,ts,lon,lat,crime_type\n";
    for (const auto& c : crimes)
        out += csv::escape(c.incident_id) + ',' + format_local(c.ts) + ',' + io::fmt_double(c.location.x) + ',' +
               io::fmt_double(c.location.y) + ',' + std::string(to_string(c.type)) + '\n';
    return out;
}

/// Input files in the ingest formats go to `data_dir`; the ground truth and
/// the generator's own panels go to `truth_dir`.
inline std::vector<std::filesystem::path> write_city(const SynthCity& s, const std::filesystem::path& data_dir,
                                                     const std::filesystem::path& truth_dir) {
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::filesystem::path& p, const std::string& content) {
        io::write_atomic(p, content);
        written.push_back(p);
    };
    put(data_dir / "tracts.geojson", tracts_to_geojson(s.city.tracts).dump() + "\n");
    put(data_dir / "venues.csv", venues_csv(s.city));
    put(data_dir / "category_map.csv", category_map_csv());
    std::string tr;
    write_transitions_csv(tr, s.transitions);
    put(data_dir / "transitions.csv", tr);
    put(data_dir / "crimes.csv", crimes_csv(s.crimes));
    put(truth_dir / "ground_truth.json", truth_to_json(s).dump(2) + "\n");
    for (const auto& p : s.truth.panels) put(truth_dir / ("panel_" + std::to_string(p.year) + ".csv"), panel_to_csv(p));
    return written;
}

}  // namespace crimeflow::synth
