#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crimeflow/crimeflow.hpp"

using namespace crimeflow;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Settings {
    json config = json::object();
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string tz = "UTC";
    fs::path out_dir = "out";
    std::map<std::string, std::string> inputs;
    std::optional<int> year, train_year, eval_year;

    std::uint64_t master_seed() const { return seed.value_or(0); }
    fs::path dir(const char* stage) const { return out_dir / stage; }
    json section(const char* name) const {
        if (!config.contains(name)) return json::object();
        const auto& s = config[name];
        if (!s.is_object()) throw ValidationError(std::string("config: '") + name + "' must be an object");
        return s;
    }
};

template <class T>
T get_or(const json& sec, const char* key, T fallback) {
    if (!sec.contains(key) || sec[key].is_null()) return fallback;
    try {
        return sec[key].get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config: bad value for '") + key + "'");
    }
}

struct StageRecord {
    std::string name;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    json summary = json::object();

    void put(const fs::path& p, const std::string& content) {
        io::write_atomic(p, content);
        outputs.push_back(p);
    }
    void read(const fs::path& p) { inputs.push_back(p); }
};

void require(const fs::path& p, const std::string& what, const std::string& command) {
    if (!fs::exists(p)) throw ValidationError(what + " not found; run `" + command + "`");
}

json read_json(const fs::path& p) {
    try {
        return json::parse(csv::read_file(p.string()));
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": invalid JSON: " + e.what());
    }
}

json file_list(const std::vector<fs::path>& paths) {
    json a = json::array();
    for (const auto& p : paths) a.push_back({{"path", p.generic_string()}, {"sha256", io::sha256_file(p)}});
    return a;
}

void update_manifest(const Settings& s, const StageRecord& r, double seconds) {
    const auto path = s.out_dir / "manifest.json";
    json m = fs::exists(path) ? read_json(path) : json::object();
    m["tool"] = "crimeflow";
    m["version"] = kVersion;
    m["modules"] = {{"ingest", kVersion}, {"flownet", kVersion}, {"panel", kVersion},   {"pglm", kVersion},
                    {"forecast", kVersion}, {"synthcity", kVersion}, {"cli", kVersion}};
    m["stages"][r.name] = {{"seed", s.master_seed()},
                           {"threads", resolve_threads(s.threads)},
                           {"tz", s.tz},
                           {"config_file", s.config_path},
                           {"config", s.config},
                           {"seconds", seconds},
                           {"inputs", file_list(r.inputs)},
                           {"outputs", file_list(r.outputs)},
                           {"summary", r.summary}};
    io::write_atomic(path, m.dump(2) + "\n");
}

template <class F>
void run_stage(const Settings& s, const std::string& name, F&& body) {
    auto t0 = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.name = name;
    body(rec);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    update_manifest(s, rec, secs);
    std::cerr << "[" << name << "] " << io::fmt_fixed(secs, 2) << " s\n";
}

json diag_json(const Diagnostics& d) {
    json j = json::object();
    for (const auto& [k, v] : d.counts) j[k] = v;
    return j;
}

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> w;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (w.size() <= c) w.push_back(0);
            w[c] = std::max(w[c], r[c].size());
        }
    std::string out;
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            line += r[c];
            if (c + 1 < r.size()) line += std::string(w[c] - r[c].size() + 2, ' ');
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + '\n';
    }
    return out;
}

std::string fmt_g(double v, const char* f = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Inputs

std::string input_path(const Settings& s, const std::string& key, const char* default_file) {
    if (auto it = s.inputs.find(key); it != s.inputs.end() && !it->second.empty()) return it->second;
    auto in = s.section("inputs");
    if (in.contains(key)) return get_or<std::string>(in, key.c_str(), "");
    if (default_file) {
        auto p = s.out_dir / "data" / default_file;
        if (fs::exists(p)) return p.string();
    }
    return "";
}

struct Ingested {
    TractSet tracts;
    VenueSet venues;
    TransitionSet transitions;
    CrimeSet crimes;
    std::vector<int> years;
};

Ingested load_ingested(const Settings& s, StageRecord& rec, bool with_crimes) {
    const auto d = s.dir("ingest");
    require(d / "summary.json", "ingest outputs", "ingest");
    Diagnostics diag;
    Ingested in;
    auto summary = read_json(d / "summary.json");
    in.years = summary.at("years").get<std::vector<int>>();
    in.tracts = parse_tracts((d / "tracts.geojson").string());
    in.venues = parse_venues((d / "venues.csv").string(), CategoryMap{}, diag);
    in.transitions = parse_transitions((d / "transitions.csv").string(), TimeZone::utc(), diag);
    for (const char* f : {"summary.json", "tracts.geojson", "venues.csv", "transitions.csv"}) rec.read(d / f);
    if (with_crimes) {
        in.crimes = parse_crimes((d / "crimes.csv").string(), TimeZone::utc(), {}, diag);
        rec.read(d / "crimes.csv");
    }
    return in;
}

std::vector<int> feature_years(const Settings& s) {
    auto p = s.dir("features") / "summary.json";
    require(p, "panel", "features build");
    return read_json(p).at("years").get<std::vector<int>>();
}

Panel load_panel(const Settings& s, int year, StageRecord& rec) {
    auto p = s.dir("features") / ("panel_" + std::to_string(year) + ".csv");
    require(p, "panel", "features build");
    rec.read(p);
    return read_panel_csv(p.string(), year);
}

std::string venues_out_csv(const VenueSet& venues) {
    std::string out = "venue_id,lon,lat,category,activity_type,tract_id\n";
    for (const auto& v : venues) {
        if (!v.tract_id) continue;
        out += csv::escape(v.id) + ',' + io::fmt_double(v.location.x) + ',' + io::fmt_double(v.location.y) + ',' +
               csv::escape(v.category) + ',' + std::string(to_string(v.activity)) + ',' + csv::escape(*v.tract_id) +
               '\n';
    }
    return out;
}

std::string crimes_out_csv(const CrimeSet& crimes) {
    std::string out = "incident_id,ts,lon,lat,crime_type,tract_id\n";
    for (const auto& c : crimes) {
        if (!c.tract_id) continue;
        out += csv::escape(c.incident_id) + ',' + format_local(c.ts) + ',' + io::fmt_double(c.location.x) + ',' +
               io::fmt_double(c.location.y) + ',' + std::string(to_string(c.type)) + ',' + csv::escape(*c.tract_id) +
               '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(const Settings& s) {
    run_stage(s, "ingest", [&](StageRecord& rec) {
        const auto tz = TimeZone::parse(s.tz);
        const auto cfg = s.section("ingest");
        auto tracts_p = input_path(s, "tracts", "tracts.geojson");
        auto venues_p = input_path(s, "venues", "venues.csv");
        auto cats_p = input_path(s, "category_map", "category_map.csv");
        auto trans_p = input_path(s, "transitions", "transitions.csv");
        auto checkins_p = input_path(s, "checkins", nullptr);
        auto crimes_p = input_path(s, "crimes", "crimes.csv");
        if (tracts_p.empty()) throw ValidationError("no tract file given (--tracts)");
        if (venues_p.empty()) throw ValidationError("no venue file given (--venues)");
        if (trans_p.empty() && checkins_p.empty())
            throw ValidationError("no transitions given (--transitions or --checkins)");
        if (crimes_p.empty()) throw ValidationError("no crime file given (--crimes)");

        Diagnostics diag;
        auto all = parse_tracts(tracts_p);
        rec.read(tracts_p);
        CategoryMap cats;
        if (!cats_p.empty()) {
            cats = parse_category_map(cats_p);
            rec.read(cats_p);
        }
        auto venues = parse_venues(venues_p, cats, diag);
        rec.read(venues_p);
        resolve_venues(venues, all, diag);
        TransitionSet ts;
        if (!trans_p.empty()) {
            ts = parse_transitions(trans_p, tz, diag);
            rec.read(trans_p);
        } else {
            ts = derive_transitions(parse_checkins(checkins_p, tz));
            rec.read(checkins_p);
        }
        ts = drop_unassignable(ts, venues, diag);

        std::set<CrimeType> types;
        for (const auto& t : get_or<std::vector<std::string>>(cfg, "crime_types", {})) {
            auto c = parse_crime_type(t);
            if (!c) throw ValidationError("config: unknown crime type '" + t + "'");
            types.insert(*c);
        }
        auto crimes = parse_crimes(crimes_p, tz, types, diag);
        rec.read(crimes_p);
        resolve_crimes(crimes, all, diag);

        auto years = get_or<std::vector<int>>(cfg, "years", {});
        if (years.empty()) {
            std::set<int> ys;
            for (const auto& t : ts) ys.insert(year_of(t.start));
            years.assign(ys.begin(), ys.end());
        }
        if (years.empty()) throw ValidationError("no transitions left after ingest; cannot infer study years");
        auto kept = filter_tracts_for_years(all, ts, venues, years, get_or<std::int64_t>(cfg, "pop_min", 100),
                                            get_or<std::int64_t>(cfg, "checkin_min", 100));
        json dropped = json::array();
        for (const auto& t : all)
            if (!kept.contains(t.id)) dropped.push_back(t.id);

        const auto d = s.dir("ingest");
        rec.put(d / "tracts.geojson", tracts_to_geojson(kept).dump() + "\n");
        rec.put(d / "venues.csv", venues_out_csv(venues));
        std::string tr;
        write_transitions_csv(tr, ts);
        rec.put(d / "transitions.csv", tr);
        rec.put(d / "crimes.csv", crimes_out_csv(crimes));
        rec.summary = {{"years", years},
                       {"tracts_total", all.size()},
                       {"tracts_kept", kept.size()},
                       {"tracts_dropped", dropped},
                       {"venues", venues.size()},
                       {"transitions", ts.size()},
                       {"crimes", crimes.size()},
                       {"diagnostics", diag_json(diag)}};
        rec.put(d / "summary.json", rec.summary.dump(2) + "\n");
        std::cout << "ingest: " << kept.size() << "/" << all.size() << " tracts kept, " << ts.size()
                  << " transitions, " << crimes.size() << " crimes\n";
    });
}

void stage_network(const Settings& s) {
    run_stage(s, "network build", [&](StageRecord& rec) {
        auto in = load_ingested(s, rec, false);
        Diagnostics diag;
        auto adj_p = input_path(s, "adjacency", nullptr);
        if (adj_p.empty()) adj_p = get_or<std::string>(s.section("network"), "adjacency", "");
        AdjacencyNetwork adj = adj_p.empty() ? build_queen_adjacency(in.tracts)
                                             : load_custom_adjacency(adj_p, in.tracts, diag);
        if (!adj_p.empty()) rec.read(adj_p);
        const auto d = s.dir("network");
        const auto ids = in.tracts.ids();
        rec.put(d / "adjacency.csv", adjacency_to_csv(adj));
        json years = json::array();
        for (int y : in.years) {
            auto m = compute_mobility(in.tracts, adj, in.transitions, in.venues, y, s.threads, diag);
            const auto ys = std::to_string(y);
            rec.put(d / ("od_" + ys + ".csv"), od_to_csv(m.od, ids));
            rec.put(d / ("sp_" + ys + ".csv"), sp_to_csv(m.routed.sp, ids));
            rec.put(d / ("passthrough_" + ys + ".csv"), passthrough_to_csv(m.routed.passthrough, ids));
            std::int64_t sp_total = 0, od_hops = 0;
            for (const auto& w : m.routed.sp.weights)
                for (auto v : w) sp_total += v;
            for (std::size_t e = 0; e < m.od.edges.size(); ++e) {
                if (!m.routed.paths[e]) continue;
                std::int64_t w = 0;
                for (auto v : m.od.edges[e].weight) w += v;
                od_hops += w * static_cast<std::int64_t>(m.routed.paths[e]->size() - 1);
            }
            const auto& st = m.routed.stats;
            years.push_back({{"year", y},
                             {"transitions", m.resolved.size()},
                             {"od_pairs", st.od_pairs},
                             {"path_computations", st.path_computations},
                             {"bfs_runs", st.bfs_runs},
                             {"unreachable_pairs", st.unreachable_pairs},
                             {"unreachable_transitions", st.unreachable_transitions},
                             {"sp_total_weight", sp_total},
                             {"od_weight_times_hops", od_hops}});
            std::cout << "network " << y << ": " << st.od_pairs << " OD pairs, " << st.path_computations
                      << " path computations for " << m.resolved.size() << " transitions\n";
        }
        rec.summary = {{"years", in.years},
                       {"adjacency", adj_p.empty() ? "queen" : adj_p},
                       {"edges", adj.edge_count()},
                       {"per_year", years},
                       {"diagnostics", diag_json(diag)}};
        rec.put(d / "summary.json", rec.summary.dump(2) + "\n");
    });
}

void stage_features(const Settings& s) {
    run_stage(s, "features build", [&](StageRecord& rec) {
        auto in = load_ingested(s, rec, true);
        const auto cfg = s.section("features");
        Diagnostics diag;
        PanelBuildOptions opt;
        opt.activity_split = get_or<bool>(cfg, "activity_split", false);
        CovariateTable cov;
        auto cov_p = input_path(s, "covariates", nullptr);
        if (!cov_p.empty()) {
            cov = parse_covariates(cov_p);
            opt.covariates = &cov;
            rec.read(cov_p);
        }
        const auto d = s.dir("features");
        json years = json::array();
        for (int y : in.years) {
            auto pp = s.dir("network") / ("passthrough_" + std::to_string(y) + ".csv");
            require(pp, "network", "network build");
            rec.read(pp);
            auto pass = read_passthrough_csv(pp.string(), in.tracts);
            auto panel = build_panel(in.tracts, in.transitions, in.venues, pass, in.crimes, y, opt, diag);
            rec.put(d / ("panel_" + std::to_string(y) + ".csv"), panel_to_csv(panel));
            auto total = [](const std::vector<std::int64_t>& v) {
                std::int64_t s = 0;
                for (auto x : v) s += x;
                return s;
            };
            years.push_back({{"year", y},
                             {"rows", panel.rows()},
                             {"crime", total(panel.crime)},
                             {"past_crime", total(panel.past_crime)},
                             {"checkins", total(panel.checkins)},
                             {"inout_flow", total(panel.inout_flow)},
                             {"selfloop_flow", total(panel.selfloop_flow)},
                             {"passthrough_flow", total(panel.passthrough_flow)}});
        }
        rec.summary = {{"years", in.years},
                       {"activity_split", opt.activity_split},
                       {"covariates", !cov_p.empty()},
                       {"per_year", years},
                       {"diagnostics", diag_json(diag)}};
        rec.put(d / "summary.json", rec.summary.dump(2) + "\n");
        std::cout << "features: " << in.years.size() << " panel(s) of " << in.tracts.size() << " x 168\n";
    });
}

void stage_explain(const Settings& s) {
    run_stage(s, "explain", [&](StageRecord& rec) {
        const auto cfg = s.section("explain");
        int year = s.year ? *s.year : get_or<int>(cfg, "year", 0);
        if (year == 0) year = feature_years(s).front();
        auto panel = load_panel(s, year, rec);
        pglm::SuiteOptions opt;
        opt.fit.gradient_check = get_or<bool>(cfg, "gradient_check", true);
        opt.fit.tolerance = get_or<double>(cfg, "tolerance", opt.fit.tolerance);
        opt.fit.max_iter = get_or<int>(cfg, "max_iter", opt.fit.max_iter);
        opt.extra_regressors = get_or<std::vector<std::string>>(cfg, "extra_regressors", {});
        opt.drop_separated = get_or<bool>(cfg, "drop_separated", false);
        opt.activity_sensitivity = get_or<bool>(cfg, "activity_sensitivity", false);
        opt.threads = s.threads;
        const double scale = get_or<double>(cfg, "irr_scale", 100.0);
        auto res = pglm::model_suite(panel, opt);
        for (const auto& f : res.fits)
            if (!f.converged) throw RuntimeFailure("model " + f.spec.name + " did not converge: " + f.message);
        auto j = pglm::suite_to_json(res, scale);
        j["year"] = year;
        j["n_tracts"] = panel.n_tracts();
        const auto d = s.dir("explain");
        rec.put(d / "pglm.json", j.dump(2) + "\n");
        rec.put(d / "table1.tsv", pglm::suite_table(res));
        rec.put(d / "irr.tsv", pglm::irr_table(res, scale));
        for (const auto& t : res.lr_tests)
            std::cout << "explain " << year << ": LR " << t.full << " vs " << t.nested << " p = " << fmt_g(t.test.p_value)
                      << "\n";
    });
}

forecast::ForecastConfig forecast_config(const Settings& s) {
    const auto cfg = s.section("forecast");
    forecast::ForecastConfig fc;
    fc.seed = s.master_seed();
    fc.threads = s.threads;
    fc.folds = get_or<int>(cfg, "folds", fc.folds);
    fc.variants = get_or<std::vector<std::string>>(cfg, "variants", fc.variants);
    fc.extra_features = get_or<std::vector<std::string>>(cfg, "extra_features", {});
    fc.run_elastic_net = get_or<bool>(cfg, "elastic_net", true);
    fc.run_random_forest = get_or<bool>(cfg, "random_forest", true);
    if (cfg.contains("en")) {
        const auto& en = cfg["en"];
        fc.en.lambdas = get_or<std::vector<double>>(en, "lambdas", fc.en.lambdas);
        fc.en.alphas = get_or<std::vector<double>>(en, "alphas", fc.en.alphas);
        fc.en_tolerance = get_or<double>(en, "tolerance", fc.en_tolerance);
    }
    if (cfg.contains("rf")) {
        const auto& rf = cfg["rf"];
        fc.rf.n_trees = get_or<std::vector<int>>(rf, "n_trees", fc.rf.n_trees);
        if (rf.contains("max_depth")) {
            fc.rf.max_depth.clear();
            for (const auto& v : rf["max_depth"]) fc.rf.max_depth.push_back(v.is_null() ? -1 : v.get<int>());
        }
        if (rf.contains("max_features")) {
            fc.rf.max_features.clear();
            for (const auto& v : rf["max_features"])
                fc.rf.max_features.push_back(
                    forecast::MaxFeatures::parse(v.is_string() ? v.get<std::string>() : std::to_string(v.get<int>())));
        }
    }
    return fc;
}

void stage_forecast(const Settings& s) {
    run_stage(s, "forecast", [&](StageRecord& rec) {
        const auto cfg = s.section("forecast");
        std::vector<int> years;
        auto pick = [&](const std::optional<int>& flag, const char* key, std::size_t idx) {
            if (flag) return *flag;
            int v = get_or<int>(cfg, key, 0);
            if (v) return v;
            if (years.empty()) years = feature_years(s);
            if (years.size() <= idx)
                throw ValidationError("forecast needs a training and an evaluation year; only " +
                                      std::to_string(years.size()) + " panel year(s) built");
            return years[idx];
        };
        const int ty = pick(s.train_year, "train_year", 0), ey = pick(s.eval_year, "eval_year", 1);
        auto train = load_panel(s, ty, rec);
        auto eval = load_panel(s, ey, rec);
        auto fc = forecast_config(s);
        auto rep = forecast::prediction_suite(train, eval, fc);
        const auto d = s.dir("forecast");
        rec.put(d / "forecast.json", forecast::report_to_json(rep).dump(2) + "\n");
        rec.put(d / "table2.tsv", forecast::report_table(rep));
        std::string pred = "tract_id,t,actual";
        for (const auto& m : rep.models) pred += ',' + csv::escape(m.label());
        pred += '\n';
        for (std::size_t r = 0; r < eval.rows(); ++r) {
            pred += csv::escape(eval.tract_ids[Panel::tract_of(r)]) + ',' + std::to_string(Panel::hour_of(r)) + ',' +
                    std::to_string(eval.crime[r]);
            for (const auto& m : rep.models) pred += ',' + io::fmt_double(m.predictions[r]);
            pred += '\n';
        }
        rec.put(d / "predictions.csv", pred);
        for (const auto& m : rep.models)
            std::cout << "forecast " << ty << "->" << ey << ": " << m.label() << " MSE "
                      << io::fmt_fixed(m.metrics.mse, 4) << "\n";
    });
}

std::string table1_text(const json& j) {
    std::vector<std::string> regs;
    for (const auto& m : j["models"])
        for (const auto& r : m["regressors"])
            if (std::find(regs.begin(), regs.end(), r.get<std::string>()) == regs.end()) regs.push_back(r.get<std::string>());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"Variable"};
    for (const auto& m : j["models"]) head.push_back(m["name"].get<std::string>());
    rows.push_back(head);
    auto coef_of = [](const json& m, const std::string& name) -> const json* {
        for (const auto& c : m["coefficients"])
            if (c["name"] == name) return &c;
        return nullptr;
    };
    for (const auto& r : regs) {
        std::vector<std::string> row{r};
        for (const auto& m : j["models"]) {
            const json* c = coef_of(m, r);
            if (!c) {
                row.push_back("");
                continue;
            }
            double p = (*c)["p_value"].is_null() ? NAN : (*c)["p_value"].get<double>();
            row.push_back(fmt_g((*c)["coef"].get<double>(), "%.4f") + " (" + fmt_g((*c)["se"].get<double>(), "%.4f") +
                          ")" + pglm::stars(p));
        }
        rows.push_back(row);
    }
    auto footer = [&](const std::string& label, auto&& cell) {
        std::vector<std::string> row{label};
        for (const auto& m : j["models"]) row.push_back(cell(m));
        rows.push_back(row);
    };
    footer("theta", [](const json& m) {
        return m["poisson_limit"].get<bool>() ? std::string("Poisson limit") : fmt_g(m["theta"].get<double>(), "%.4f");
    });
    footer("Log-likelihood", [](const json& m) { return fmt_g(m["log_likelihood"].get<double>(), "%.2f"); });
    footer("AIC", [](const json& m) { return fmt_g(m["aic"].get<double>(), "%.2f"); });
    footer("N", [](const json& m) { return std::to_string(m["n_obs"].get<long long>()); });
    footer("LR test p", [&](const json& m) {
        for (const auto& t : j["lr_tests"])
            if (t["full"] == m["name"])
                return fmt_g(t["p_value"].get<double>(), "%.3g") + " vs " + t["nested"].get<std::string>();
        return std::string();
    });
    std::string out = "Negative binomial panel models, year " + std::to_string(j["year"].get<int>()) +
                      " (tract and hour-of-week fixed effects; * p<0.05, ** p<0.01, *** p<0.001)\n\n";
    out += aligned(rows);
    out += "\nIRR % change per " + fmt_g(j["models"][0]["irr_scale"].get<double>(), "%g") + " units [95% CI]\n\n";
    std::vector<std::vector<std::string>> irr{head};
    for (const auto& r : regs) {
        std::vector<std::string> row{r};
        for (const auto& m : j["models"]) {
            const json* c = coef_of(m, r);
            row.push_back(c && c->contains("irr_pct")
                              ? fmt_g((*c)["irr_pct"].get<double>(), "%.2f") + " [" +
                                    fmt_g((*c)["irr_ci_low"].get<double>(), "%.2f") + ", " +
                                    fmt_g((*c)["irr_ci_high"].get<double>(), "%.2f") + "]"
                              : "");
        }
        irr.push_back(row);
    }
    return out + aligned(irr);
}

std::string table2_text(const json& j) {
    std::vector<std::vector<std::string>> rows{
        {"Model", "Predictors", "MSE", "Improvement %", "MAE", "R2", "Wilcoxon p", "Crimes gained"}};
    for (const auto& m : j["models"]) {
        const bool hist = m["variant"].is_null();
        std::string variant = hist ? "past_crime" : m["variant"].get<std::string>();
        std::string wp;
        for (const auto& w : j["wilcoxon"])
            if (!hist && w["model"] == m["model"] && w["variant"] == variant)
                wp = fmt_g(w["p_value"].get<double>(), "%.3g") + " vs " + w["reference"].get<std::string>();
        rows.push_back({m["model"].get<std::string>(), variant, fmt_g(m["mse"].get<double>(), "%.4f"),
                        hist ? "" : fmt_g(m["improvement_pct"].get<double>(), "%.2f"),
                        fmt_g(m["mae"].get<double>(), "%.4f"),
                        m["r2"].is_null() ? "NA" : fmt_g(m["r2"].get<double>(), "%.4f"), wp,
                        hist ? "" : std::to_string(m["crimes_gained"].get<long long>())});
    }
    return "Crime prediction, train " + std::to_string(j["train_year"].get<int>()) + " -> evaluate " +
           std::to_string(j["eval_year"].get<int>()) + " (" + std::to_string(j["n_tracts"].get<long long>()) +
           " tracts)\n\n" + aligned(rows);
}

void stage_report(const Settings& s) {
    run_stage(s, "report", [&](StageRecord& rec) {
        auto ep = s.dir("explain") / "pglm.json";
        auto fp = s.dir("forecast") / "forecast.json";
        require(ep, "explain results", "explain");
        require(fp, "forecast results", "forecast");
        rec.read(ep);
        rec.read(fp);
        auto ej = read_json(ep), fj = read_json(fp);
        const auto d = s.dir("report");
        rec.put(d / "table1.txt", table1_text(ej));
        rec.put(d / "table2.txt", table2_text(fj));
        for (int y : feature_years(s)) {
            const auto ys = std::to_string(y);
            auto panel = load_panel(s, y, rec);
            std::map<std::string, std::pair<double, double>> at;
            for (std::size_t i = 0; i < panel.n_tracts(); ++i) at[panel.tract_ids[i]] = {panel.x[i], panel.y[i]};
            auto sp = s.dir("network") / ("sp_" + ys + ".csv");
            require(sp, "network", "network build");
            rec.read(sp);
            std::map<std::pair<std::string, std::string>, std::int64_t> edges;
            auto r = csv::Reader::open(sp.string());
            r.require_header({"src", "dst", "hour", "weight"});
            while (r.next()) edges[{std::string(r.field("src")), std::string(r.field("dst"))}] += r.integer("weight");
            std::string e = "src,dst,src_x,src_y,dst_x,dst_y,weight\n";
            for (const auto& [k, w] : edges) {
                auto a = at.at(k.first), b = at.at(k.second);
                e += csv::escape(k.first) + ',' + csv::escape(k.second) + ',' + io::fmt_double(a.first) + ',' +
                     io::fmt_double(a.second) + ',' + io::fmt_double(b.first) + ',' + io::fmt_double(b.second) + ',' +
                     std::to_string(w) + '\n';
            }
            rec.put(d / ("edges_" + ys + ".csv"), e);
            std::string t = "t,weekend,crime,checkins,inout_flow,selfloop_flow,passthrough_flow\n";
            for (int h = 0; h < kHoursPerWeek; ++h) {
                std::array<std::int64_t, 5> sum{};
                for (std::size_t i = 0; i < panel.n_tracts(); ++i) {
                    std::size_t row = i * kHoursPerWeek + h;
                    sum[0] += panel.crime[row];
                    sum[1] += panel.checkins[row];
                    sum[2] += panel.inout_flow[row];
                    sum[3] += panel.selfloop_flow[row];
                    sum[4] += panel.passthrough_flow[row];
                }
                t += std::to_string(h) + ',' + (is_weekend_hour(h) ? "1" : "0");
                for (auto v : sum) t += ',' + std::to_string(v);
                t += '\n';
            }
            rec.put(d / ("temporal_profile_" + ys + ".csv"), t);
        }
        rec.put(d / "report.json", json{{"explain", ej}, {"forecast", fj}}.dump(2) + "\n");
        std::cout << table1_text(ej) << "\n" << table2_text(fj);
    });
}

void stage_synth(const Settings& s) {
    run_stage(s, "synth generate", [&](StageRecord& rec) {
        auto cfg = synth::config_from_json(s.section("synth"));
        if (s.seed) cfg.seed = *s.seed;
        auto city = synth::generate(cfg, s.threads);
        for (auto& p : synth::write_city(city, s.out_dir / "data", s.out_dir / "ground_truth")) rec.outputs.push_back(p);
        rec.summary = {{"tracts", city.city.tracts.size()},
                       {"venues", city.city.venues.size()},
                       {"transitions", city.transitions.size()},
                       {"crimes", city.crimes.size()},
                       {"synth_seed", cfg.seed}};
        std::cout << "synth: " << city.city.tracts.size() << " tracts, " << city.city.venues.size() << " venues, "
                  << city.transitions.size() << " transitions, " << city.crimes.size() << " crimes\n";
    });
}

// ---------------------------------------------------------------------------
// Settings: flags win over environment, environment over the config file.

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

std::uint64_t parse_u64(const std::string& v, const char* what) {
    try {
        std::size_t used = 0;
        auto x = std::stoull(v, &used);
        if (used == v.size() && v[0] != '-') return x;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("invalid ") + what + " '" + v + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crimeflow: mobility flows, crime panels, count models and forecasts"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_flag, tz_flag, out_flag, seed_flag;
    unsigned threads_flag = 0;
    std::map<std::string, std::string> inputs;
    int year = 0, train_year = 0, eval_year = 0;
    auto* o_config = app.add_option("--config", config_flag, "JSON config file (env CRIMEFLOW_CONFIG)");
    auto* o_seed = app.add_option("--seed", seed_flag, "master seed (env CRIMEFLOW_SEED)");
    auto* o_threads = app.add_option("--threads", threads_flag, "worker threads, 0 = all cores (env CRIMEFLOW_THREADS)");
    auto* o_tz = app.add_option("--tz", tz_flag, "local timezone of the raw inputs (env CRIMEFLOW_TZ)");
    auto* o_out = app.add_option("--out-dir", out_flag, "output directory (env CRIMEFLOW_OUT_DIR)");
    for (const char* k : {"tracts", "venues", "category-map", "transitions", "checkins", "crimes", "covariates",
                          "adjacency"}) {
        std::string key = k;
        std::replace(key.begin(), key.end(), '-', '_');
        app.add_option(std::string("--") + k, inputs[key], std::string("input file: ") + k);
    }
    app.add_option("--year", year, "panel year for explain");
    app.add_option("--train-year", train_year, "training panel year for forecast");
    app.add_option("--eval-year", eval_year, "evaluation panel year for forecast");

    auto* c_ingest = app.add_subcommand("ingest", "read and validate raw inputs, resolve tracts, filter");
    auto* c_network = app.add_subcommand("network", "network stage");
    auto* c_network_build = c_network->add_subcommand("build", "adjacency, OD and shortest-path networks");
    c_network->require_subcommand(1);
    auto* c_features = app.add_subcommand("features", "feature stage");
    auto* c_features_build = c_features->add_subcommand("build", "tract x hour-of-week panels");
    c_features->require_subcommand(1);
    auto* c_explain = app.add_subcommand("explain", "negative binomial panel model suite");
    auto* c_forecast = app.add_subcommand("forecast", "prediction suite");
    auto* c_synth = app.add_subcommand("synth", "synthetic city");
    auto* c_synth_generate = c_synth->add_subcommand("generate", "generate a synthetic city with ground truth");
    c_synth->require_subcommand(1);
    auto* c_report = app.add_subcommand("report", "tables and plot-ready exports");
    auto* c_run = app.add_subcommand("run", "ingest through report");
    for (auto* c : {c_network, c_network_build, c_features, c_features_build, c_synth, c_synth_generate}) c->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        Settings s;
        std::string cfg_path = o_config->count() ? config_flag : env("CRIMEFLOW_CONFIG").value_or("");
        if (!cfg_path.empty()) {
            s.config = read_json(cfg_path);
            if (!s.config.is_object()) throw ValidationError(cfg_path + ": config must be a JSON object");
            s.config_path = cfg_path;
        }
        if (s.config.contains("seed")) s.seed = get_or<std::uint64_t>(s.config, "seed", 0);
        s.threads = get_or<unsigned>(s.config, "threads", 0);
        s.tz = get_or<std::string>(s.config, "tz", "UTC");
        s.out_dir = get_or<std::string>(s.config, "out_dir", "out");
        if (auto v = env("CRIMEFLOW_SEED")) s.seed = parse_u64(*v, "CRIMEFLOW_SEED");
        if (auto v = env("CRIMEFLOW_THREADS")) s.threads = static_cast<unsigned>(parse_u64(*v, "CRIMEFLOW_THREADS"));
        if (auto v = env("CRIMEFLOW_TZ")) s.tz = *v;
        if (auto v = env("CRIMEFLOW_OUT_DIR")) s.out_dir = *v;
        if (o_seed->count()) s.seed = parse_u64(seed_flag, "--seed");
        if (o_threads->count()) s.threads = threads_flag;
        if (o_tz->count()) s.tz = tz_flag;
        if (o_out->count()) s.out_dir = out_flag;
        s.inputs = inputs;
        if (year) s.year = year;
        if (train_year) s.train_year = train_year;
        if (eval_year) s.eval_year = eval_year;
        fs::create_directories(s.out_dir);

        if (c_ingest->parsed()) stage_ingest(s);
        else if (c_network_build->parsed()) stage_network(s);
        else if (c_features_build->parsed()) stage_features(s);
        else if (c_explain->parsed()) stage_explain(s);
        else if (c_forecast->parsed()) stage_forecast(s);
        else if (c_report->parsed()) stage_report(s);
        else if (c_synth_generate->parsed()) stage_synth(s);
        else if (c_run->parsed()) {
            stage_ingest(s);
            stage_network(s);
            stage_features(s);
            stage_explain(s);
            stage_forecast(s);
            stage_report(s);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
