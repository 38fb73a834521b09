#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "crimeflow/synthcity.hpp"
#include "support.hpp"

using namespace crimeflow;
using namespace crimeflow::synth;

namespace {

SynthConfig small_config(std::uint64_t seed = 3) {
    SynthConfig c;
    c.seed = seed;
    c.width = 4;
    c.height = 3;
    c.transitions = 20000;
    c.users = 300;
    return c;
}

SynthConfig iid_config(double nu, double theta) {
    SynthConfig c = small_config(11);
    c.transitions = 2000;
    c.truth = TruthParams{};
    c.truth.nu = nu;
    c.truth.beta = c.truth.gamma = c.truth.delta = 0;
    c.truth.sigma_alpha = c.truth.sigma_theta = 0;
    c.truth.nb_theta = theta;
    c.width = 10;
    c.height = 5;
    return c;
}

std::vector<double> all_counts(const SynthCity& s) {
    std::vector<double> v;
    for (const auto& y : s.truth.years)
        for (const auto& row : y.counts)
            for (auto k : row) v.push_back(static_cast<double>(k));
    return v;
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    double m = mean_of(v), s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST(City, TwoByTwoIsComplete) {
    SynthConfig c = small_config();
    c.width = c.height = 2;
    auto city = generate_city(c);
    auto adj = build_queen_adjacency(city.tracts);
    ASSERT_EQ(adj.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(adj.neighbors(i).size(), 3u);
}

TEST(City, SingleRowIsPath) {
    SynthConfig c = small_config();
    c.width = 5;
    c.height = 1;
    auto city = generate_city(c);
    auto adj = build_queen_adjacency(city.tracts);
    for (int i = 0; i < 5; ++i) {
        std::size_t expect = (i == 0 || i == 4) ? 1 : 2;
        EXPECT_EQ(adj.neighbors(i).size(), expect);
    }
    EXPECT_TRUE(adj.has_edge(1, 2));
    EXPECT_FALSE(adj.has_edge(0, 2));
}

TEST(City, TooSmallGridRejected) {
    SynthConfig c = small_config();
    c.width = 3;
    c.height = 1;
    EXPECT_THROW(generate_city(c), ValidationError);
}

TEST(City, GridHopsMatchBfs) {
    auto city = generate_city(small_config());
    auto adj = build_queen_adjacency(city.tracts);
    for (std::size_t b = 0; b < city.tracts.size(); ++b) {
        auto d = bfs_distances(adj, static_cast<int>(b));
        for (std::size_t a = 0; a < city.tracts.size(); ++a) EXPECT_EQ(d[a], grid_hops(city, a, b));
    }
}

TEST(City, VenuesInsideTheirTract) {
    auto city = generate_city(small_config());
    TractLocator loc(city.tracts);
    for (const auto& v : city.venues) {
        int idx = loc.locate(v.location);
        ASSERT_GE(idx, 0);
        EXPECT_EQ(city.tracts[idx].id, *v.tract_id);
        EXPECT_EQ(city.categories.lookup(v.category), v.activity);
    }
}

TEST(City, ActivityMixAtScale) {
    SynthConfig c = small_config();
    c.width = 100;
    c.height = 100;
    c.venues_min = c.venues_max = 10;
    auto city = generate_city(c);
    ASSERT_EQ(city.venues.size(), 100000u);
    std::array<double, kActivityTypes> freq{};
    for (const auto& v : city.venues) freq[static_cast<int>(v.activity)] += 1;
    for (int a = 0; a < kActivityTypes; ++a) EXPECT_NEAR(freq[a] / 100000.0, c.activity_mix[a], 0.02);
}

TEST(Transitions, InvariantsHold) {
    auto c = small_config();
    auto city = generate_city(c);
    auto ts = generate_transitions(c, city);
    EXPECT_NEAR(static_cast<double>(ts.size()), c.transitions, 5 * std::sqrt(c.transitions));
    for (const auto& t : ts) {
        ASSERT_TRUE(is_valid_transition(t));
        int y = year_of(t.start);
        EXPECT_TRUE(y == 2012 || y == 2013);
        ASSERT_NE(city.venues.find(t.src_venue), nullptr);
        ASSERT_NE(city.venues.find(t.dst_venue), nullptr);
    }
}

TEST(Transitions, InfiniteGravityKeepsNeighbours) {
    auto c = small_config();
    c.gravity = kInf;
    c.transitions = 5000;
    auto city = generate_city(c);
    auto ts = generate_transitions(c, city);
    ASSERT_FALSE(ts.empty());
    std::size_t cross = 0;
    for (const auto& t : ts) {
        auto a = city.tracts.index_of(*city.venues.find(t.src_venue)->tract_id);
        auto b = city.tracts.index_of(*city.venues.find(t.dst_venue)->tract_id);
        if (a == b) continue;
        ++cross;
        EXPECT_EQ(grid_hops(city, a, b), 1);
    }
    EXPECT_GT(cross, 0u);
}

TEST(Transitions, SelfloopShare) {
    auto c = small_config();
    c.selfloop_share = 0.35;
    auto city = generate_city(c);
    auto ts = generate_transitions(c, city);
    double self = 0;
    for (const auto& t : ts)
        self += city.venues.find(t.src_venue)->tract_id == city.venues.find(t.dst_venue)->tract_id;
    double n = static_cast<double>(ts.size());
    EXPECT_NEAR(self / n, 0.35, 4 * std::sqrt(0.35 * 0.65 / n));
}

TEST(Transitions, ZeroVolumeIsEmpty) {
    auto c = small_config();
    c.transitions = 0;
    auto city = generate_city(c);
    EXPECT_TRUE(generate_transitions(c, city).empty());
}

TEST(Transitions, WeekdayIntensityShape) {
    // night floor below the midday plateau, weekend evening above weekday evening
    EXPECT_LT(hour_intensity(3), hour_intensity(12));
    EXPECT_GT(hour_intensity(5 * 24 + 19), hour_intensity(19));
}

TEST(Generate, DeterministicAcrossThreads) {
    auto c = small_config(21);
    auto a = generate(c, 1);
    auto b = generate(c, 3);
    std::string ta, tb;
    write_transitions_csv(ta, a.transitions);
    write_transitions_csv(tb, b.transitions);
    EXPECT_EQ(ta, tb);
    EXPECT_EQ(crimes_csv(a.crimes), crimes_csv(b.crimes));
    EXPECT_EQ(truth_to_json(a), truth_to_json(b));
    auto d = generate(small_config(22), 1);
    EXPECT_NE(crimes_csv(a.crimes), crimes_csv(d.crimes));
}

TEST(Generate, IidNegativeBinomialMean) {
    const double nu = 0.3, theta = 1.5;
    auto s = generate(iid_config(nu, theta));
    auto v = all_counts(s);
    const double mu = std::exp(nu), var = mu + mu * mu / theta;
    const double se = std::sqrt(var / static_cast<double>(v.size()));
    EXPECT_NEAR(mean_of(v), mu, 3 * se);
    EXPECT_GT(var_of(v) / mean_of(v), 1.3);
}

TEST(Generate, PoissonLimitDispersion) {
    auto s = generate(iid_config(0.5, kInf));
    auto v = all_counts(s);
    double n = static_cast<double>(v.size());
    EXPECT_NEAR(var_of(v) / mean_of(v), 1.0, 3 * std::sqrt(2.0 / (n - 1)));
}

TEST(Generate, PassThroughDrivesCrime) {
    SynthConfig c = iid_config(-0.5, 5.0);
    c.transitions = 200000;
    c.truth.delta = 0.02;
    auto s = generate(c);
    ASSERT_EQ(s.truth.panels.size(), 2u);
    const auto& p = s.truth.panels[0];
    std::vector<double> x(p.passthrough_flow.begin(), p.passthrough_flow.end());
    std::vector<double> y(p.crime.begin(), p.crime.end());
    double mx = mean_of(x), my = mean_of(y), sxy = 0, sxx = 0, syy = 0;
    for (std::size_t r = 0; r < x.size(); ++r) {
        sxy += (x[r] - mx) * (y[r] - my);
        sxx += (x[r] - mx) * (x[r] - mx);
        syy += (y[r] - my) * (y[r] - my);
    }
    EXPECT_GT(sxy / std::sqrt(sxx * syy), 0.1);
}

TEST(Generate, OverflowRejected) {
    auto c = small_config();
    c.truth.gamma = 5.0;
    EXPECT_THROW(
        {
            try {
                generate(c);
            } catch (const ValidationError& e) {
                EXPECT_NE(std::string(e.what()).find("overflows"), std::string::npos);
                throw;
            }
        },
        ValidationError);
}

TEST(Generate, StepTermUsesQuantile) {
    auto c = small_config(5);
    c.truth.delta = 0;
    c.truth.delta_step = 0.7;
    c.truth.step_quantile = 0.75;
    auto s = generate(c);
    const auto& y = s.truth.years[1];
    const auto& p = s.truth.panels[0];
    std::size_t above = 0;
    for (std::size_t r = 0; r < p.rows(); ++r) above += p.passthrough_flow[r] >= y.step_threshold;
    EXPECT_GE(above, p.rows() / 4);
    // the log mean jumps by exactly delta_step across the threshold, all else equal
    const auto& T = c.truth;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        std::size_t i = Panel::tract_of(r);
        int t = Panel::hour_of(r);
        double expect = T.nu + s.truth.alpha[i] + s.truth.theta[t] + T.beta * p.past_crime[r] +
                        T.gamma * p.checkins[r] + (p.passthrough_flow[r] >= y.step_threshold ? T.delta_step : 0.0);
        ASSERT_NEAR(y.log_mean[r], expect, 1e-12);
    }
}

TEST(Generate, PanelRoundTripThroughFiles) {
    auto c = small_config(9);
    auto s = generate(c);
    auto dir = testsupport::scratch("synth_roundtrip");
    write_city(s, dir / "data", dir / "ground_truth");

    Diagnostics diag;
    auto tracts = parse_tracts((dir / "data/tracts.geojson").string());
    auto cats = parse_category_map((dir / "data/category_map.csv").string());
    auto venues = parse_venues((dir / "data/venues.csv").string(), cats, diag);
    resolve_venues(venues, tracts, diag);
    auto ts = parse_transitions((dir / "data/transitions.csv").string(), TimeZone::utc(), diag);
    auto crimes = parse_crimes((dir / "data/crimes.csv").string(), TimeZone::utc(), {}, diag);
    resolve_crimes(crimes, tracts, diag);
    EXPECT_EQ(ts.size(), s.transitions.size());
    EXPECT_EQ(crimes.size(), s.crimes.size());
    EXPECT_EQ(diag.count("venue_outside_tracts"), 0);

    auto adj = build_queen_adjacency(tracts);
    for (const auto& truth_panel : s.truth.panels) {
        auto m = compute_mobility(tracts, adj, ts, venues, truth_panel.year, 1, diag);
        auto p = panel_from_mobility(tracts, m, crimes, {}, diag);
        EXPECT_EQ(panel_to_csv(p), panel_to_csv(truth_panel));
        auto from_file = read_panel_csv((dir / ("ground_truth/panel_" + std::to_string(p.year) + ".csv")).string(),
                                        p.year);
        EXPECT_EQ(panel_to_csv(from_file), panel_to_csv(p));
    }
}

TEST(Config, JsonRoundTrip) {
    auto c = small_config(4);
    c.gravity = kInf;
    c.truth.nb_theta = kInf;
    auto j = config_to_json(c);
    EXPECT_EQ(j["gravity"], "inf");
    auto back = config_from_json(j);
    EXPECT_EQ(config_to_json(back), j);
    EXPECT_TRUE(std::isinf(back.gravity));
}

TEST(Config, RejectsUnknownAndInvalid) {
    EXPECT_THROW(config_from_json({{"widht", 3}}), ValidationError);
    EXPECT_THROW(config_from_json({{"truth", {{"nb_theta", 0}}}}), ValidationError);
    EXPECT_THROW(config_from_json({{"venues_min", 1}}), ValidationError);
    EXPECT_THROW(config_from_json({{"gravity", "far"}}), ValidationError);
    EXPECT_THROW(config_from_json({{"width", "wide"}}), ValidationError);
}
