#include <gtest/gtest.h>

#include <random>

#include "crimeflow/ingest.hpp"
#include "support.hpp"

using namespace crimeflow;
using testsupport::scratch;
using testsupport::write;

namespace {

std::string square_feature(const std::string& id, double x0, double y0, double x1, double y1, int pop) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  R"({"type":"Feature","properties":{"tract_id":"%s","population":%d},)"
                  R"("geometry":{"type":"Polygon","coordinates":[[[%g,%g],[%g,%g],[%g,%g],[%g,%g],[%g,%g]]]}})",
                  id.c_str(), pop, x0, y0, x1, y0, x1, y1, x0, y1, x0, y0);
    return buf;
}

std::string collection(const std::vector<std::string>& features) {
    std::string s = R"({"type":"FeatureCollection","features":[)";
    for (std::size_t i = 0; i < features.size(); ++i) s += (i ? "," : "") + features[i];
    return s + "]}";
}

}  // namespace

TEST(ParseTracts, CentroidsAndOrder) {
    auto dir = scratch("parse_tracts");
    auto path = write(dir / "t.geojson", collection({square_feature("B", 1, 0, 3, 1, 10),
                                                      square_feature("A", 0, 0, 1, 1, 20)}));
    auto ts = parse_tracts(path);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0].id, "A");
    EXPECT_DOUBLE_EQ(ts[0].centroid.x, 0.5);
    EXPECT_DOUBLE_EQ(ts[1].centroid.x, 2.0);
    EXPECT_DOUBLE_EQ(ts[1].centroid.y, 0.5);
    EXPECT_EQ(ts[1].population, 10);
}

TEST(ParseTracts, DuplicateIdRejected) {
    auto dir = scratch("dup_tracts");
    auto path = write(dir / "t.geojson", collection({square_feature("A", 0, 0, 1, 1, 1),
                                                      square_feature("A", 1, 0, 2, 1, 1)}));
    EXPECT_THROW(parse_tracts(path), ValidationError);
}

TEST(ParseTracts, MalformedGeometryNamesFeature) {
    auto dir = scratch("bad_tracts");
    std::string bad =
        R"({"type":"Feature","properties":{"tract_id":"Z9","population":5},)"
        R"("geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}})";
    auto path = write(dir / "t.geojson", collection({bad}));
    try {
        parse_tracts(path);
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("Z9"), std::string::npos) << e.what();
    }
}

TEST(ParseTracts, MultiPolygonRoundTrip) {
    auto ts = testsupport::grid_tracts(2, 2);
    auto again = parse_tracts_json(tracts_to_geojson(ts));
    ASSERT_EQ(again.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(again[i].id, ts[i].id);
        EXPECT_DOUBLE_EQ(again[i].centroid.x, ts[i].centroid.x);
    }
}

TEST(AssignPoint, InteriorExteriorAndTieBreak) {
    TractSet ts({make_tract("B", geo::rectangle(1, 0, 2, 1), 1), make_tract("A", geo::rectangle(0, 0, 1, 1), 1)});
    EXPECT_EQ(assign_point_to_tract({0.5, 0.5}, ts), std::optional<TractId>("A"));
    EXPECT_EQ(assign_point_to_tract({5, 5}, ts), std::nullopt);
    EXPECT_EQ(assign_point_to_tract({1.0, 0.5}, ts), std::optional<TractId>("A"));
    EXPECT_EQ(assign_point_to_tract({1.5, 0.5}, ts), std::optional<TractId>("B"));
}

TEST(AssignPoint, LocatorAgreesWithLinearScan) {
    auto ts = testsupport::grid_tracts(7, 5);
    TractLocator loc(ts);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(-0.5, 7.5), uy(-0.5, 5.5);
    for (int k = 0; k < 2000; ++k) {
        geo::Point p{ux(rng), uy(rng)};
        if (k % 5 == 0) p = {std::round(p.x), std::round(p.y * 2) / 2};  // lattice and edge points
        auto want = assign_point_to_tract(p, ts);
        int got = loc.locate(p);
        if (!want) {
            EXPECT_EQ(got, -1);
        } else {
            ASSERT_GE(got, 0);
            EXPECT_EQ(ts[got].id, *want);
        }
    }
}

TEST(DeriveTransitions, RuleApplication) {
    auto at = [](int h, int m = 0) { return make_local(2013, 1, 7, h, m); };
    EXPECT_EQ(derive_transitions({{"u", at(0), "v1"}, {"u", at(2), "v2"}}).size(), 1u);
    EXPECT_EQ(derive_transitions({{"u", at(0), "v1"}, {"u", at(1), "v1"}}).size(), 0u);
    EXPECT_EQ(derive_transitions({{"u", at(0), "v1"}, {"u", at(4), "v2"}}).size(), 0u);
    EXPECT_EQ(derive_transitions({{"u", at(0), "v1"}, {"u", at(3), "v2"}}).size(), 1u);
    EXPECT_EQ(derive_transitions({{"u", at(0), "v1"}, {"w", at(1), "v2"}}).size(), 0u);
}

TEST(DeriveTransitions, ChainsAndOrdering) {
    auto at = [](int h, int m = 0) { return make_local(2013, 1, 7, h, m); };
    // Out of order input; ties keep input order.
    std::vector<CheckIn> cs{{"u", at(2), "c"}, {"u", at(0), "a"}, {"u", at(1), "b"}, {"u", at(1), "b2"}};
    auto ts = derive_transitions(cs);
    ASSERT_EQ(ts.size(), 3u);
    EXPECT_EQ(ts[0].src_venue, "a");
    EXPECT_EQ(ts[0].dst_venue, "b");
    EXPECT_EQ(ts[1].src_venue, "b");
    EXPECT_EQ(ts[1].dst_venue, "b2");
    EXPECT_EQ(ts[2].dst_venue, "c");
}

TEST(DeriveTransitions, RandomStreamsObeyInvariants) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> user(0, 4), venue(0, 6), gap(0, 5 * 3600);
    std::vector<CheckIn> cs;
    std::int64_t clock = make_local(2013, 1, 1).seconds;
    std::map<std::string, int> per_user;
    for (int k = 0; k < 3000; ++k) {
        clock += gap(rng) / 5;
        std::string u = "u" + std::to_string(user(rng));
        cs.push_back({u, LocalTime{clock}, "v" + std::to_string(venue(rng))});
        ++per_user[u];
    }
    auto ts = derive_transitions(cs);
    std::map<std::string, int> out_per_user;
    for (const auto& t : ts) {
        EXPECT_TRUE(is_valid_transition(t));
        ++out_per_user[t.user_key];
    }
    for (const auto& [u, n] : per_user) EXPECT_LE(out_per_user[u], n - 1);
}

TEST(FilterTracts, Rules) {
    TractSet ts({make_tract("A", geo::rectangle(0, 0, 1, 1), 50), make_tract("B", geo::rectangle(1, 0, 2, 1), 4000),
                 make_tract("C", geo::rectangle(2, 0, 3, 1), 4000)});
    std::map<TractId, std::int64_t> annual{{"A", 500}, {"B", 99}, {"C", 100}};
    auto kept = filter_tracts(ts, annual);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].id, "C");
    EXPECT_EQ(filter_tracts(kept, annual).size(), 1u);
    EXPECT_THROW(filter_tracts(ts, {}), ValidationError);
}

TEST(FilterTracts, Idempotent) {
    auto ts = testsupport::grid_tracts(6, 6);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> c(0, 300);
    std::map<TractId, std::int64_t> annual;
    for (const auto& t : ts) annual[t.id] = c(rng);
    auto once = filter_tracts(ts, annual);
    auto twice = filter_tracts(once, annual);
    EXPECT_EQ(once.ids(), twice.ids());
}

TEST(ParseCrimes, FilterAndEmptyFile) {
    auto dir = scratch("crimes");
    Diagnostics diag;
    auto empty = write(dir / "empty.csv", "");
    EXPECT_TRUE(parse_crimes(empty, TimeZone::utc(), {}, diag).empty());
    auto header_only = write(dir / "h.csv", "incident_id,ts,lon,lat,crime_type\n");
    EXPECT_TRUE(parse_crimes(header_only, TimeZone::utc(), {}, diag).empty());
    auto path = write(dir / "c.csv",
                      "incident_id,ts,lon,lat,crime_type\n"
                      "1,2013-01-07T09:00:00,0.5,0.5,vandalism\n"
                      "2,2013-01-07T09:00:00,0.5,0.5,Robbery\n"
                      "3,2013-01-07T09:00:00,0.5,0.5,larceny/theft\n");
    auto cs = parse_crimes(path, TimeZone::utc(), {}, diag);
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[0].type, CrimeType::robbery);
    EXPECT_EQ(cs[1].type, CrimeType::larceny_theft);
    EXPECT_EQ(diag.count("crime_type_filtered"), 1);
    auto only_robbery = parse_crimes(path, TimeZone::utc(), {CrimeType::robbery}, diag);
    EXPECT_EQ(only_robbery.size(), 1u);
}

TEST(ParseCrimes, BadRowNamesLine) {
    auto dir = scratch("crimes_bad");
    Diagnostics diag;
    auto path = write(dir / "c.csv",
                      "incident_id,ts,lon,lat,crime_type\n"
                      "1,2013-01-07T09:00:00,0.5,0.5,robbery\n"
                      "2,2013-01-07T09:00:00,abc,0.5,robbery\n");
    try {
        parse_crimes(path, TimeZone::utc(), {}, diag);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ParseVenues, CategoryMappingAndFallback) {
    auto dir = scratch("venues");
    Diagnostics diag;
    auto map_path = write(dir / "map.csv",
                          "category,activity_type\n"
                          "Spanish restaurant,restaurants_bars\n"
                          "University,work_study\n"
                          "other,leisure\n");
    auto venues_path = write(dir / "v.csv",
                             "venue_id,lon,lat,category\n"
                             "v1,0.5,0.5,Spanish Restaurant\n"
                             "v2,0.5,0.5,university\n"
                             "v3,0.5,0.5,Bowling alley\n");
    auto cmap = parse_category_map(map_path);
    auto vs = parse_venues(venues_path, cmap, diag);
    ASSERT_EQ(vs.size(), 3u);
    EXPECT_EQ(vs.find("v1")->activity, ActivityType::restaurants_bars);
    EXPECT_EQ(vs.find("v2")->activity, ActivityType::work_study);
    EXPECT_EQ(vs.find("v3")->activity, ActivityType::leisure);
    EXPECT_EQ(diag.count("venue_category_unmapped"), 1);

    auto strict = write(dir / "strict.csv", "category,activity_type\nUniversity,work_study\n");
    EXPECT_THROW(parse_venues(venues_path, parse_category_map(strict), diag), ParseError);
}

TEST(ParseTransitions, InvalidRecordsDropped) {
    auto dir = scratch("transitions");
    Diagnostics diag;
    auto path = write(dir / "t.csv",
                      "user_key,start_ts,end_ts,src_venue,dst_venue\n"
                      "u,2013-01-07T09:00:00,2013-01-07T10:00:00,a,b\n"
                      "u,2013-01-07T09:00:00,2013-01-07T13:00:00,a,b\n"
                      "u,2013-01-07T09:00:00,2013-01-07T08:00:00,a,b\n"
                      "u,2013-01-07T09:00:00,2013-01-07T09:30:00,a,a\n");
    auto ts = parse_transitions(path, TimeZone::utc(), diag);
    EXPECT_EQ(ts.size(), 1u);
    EXPECT_EQ(diag.count("transition_invalid"), 3);
}

TEST(ResolveTransitions, DroppedTractEndpointsKeepMinusOne) {
    TractSet all({make_tract("A", geo::rectangle(0, 0, 1, 1), 1000), make_tract("B", geo::rectangle(1, 0, 2, 1), 1000)});
    TractSet kept({make_tract("A", geo::rectangle(0, 0, 1, 1), 1000)});
    VenueSet vs;
    vs.add({"a", {0.5, 0.5}, "x", ActivityType::shopping, {}});
    vs.add({"b", {1.5, 0.5}, "x", ActivityType::travel, {}});
    vs.add({"z", {9, 9}, "x", ActivityType::travel, {}});
    Diagnostics diag;
    resolve_venues(vs, all, diag);
    EXPECT_EQ(diag.count("venue_outside_tracts"), 1);
    auto t0 = make_local(2013, 1, 7, 9);
    auto t1 = make_local(2013, 1, 7, 10);
    TransitionSet ts{{"u", t0, t1, "a", "b"}, {"u", t0, t1, "a", "z"}, {"u", make_local(2012, 1, 2), t1, "a", "b"}};
    auto r = resolve_transitions(ts, vs, kept, 2013, diag);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].src, 0);
    EXPECT_EQ(r[0].dst, -1);
    EXPECT_EQ(r[0].start_hour, 9);
    EXPECT_EQ(r[0].end_hour, 10);
    EXPECT_EQ(r[0].src_activity, ActivityType::shopping);
}
