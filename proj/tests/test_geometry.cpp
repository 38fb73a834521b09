#include <gtest/gtest.h>

#include "crimeflow/geometry.hpp"

using namespace crimeflow::geo;

TEST(Centroid, UnitSquare) {
    auto c = centroid(rectangle(0, 0, 1, 1));
    EXPECT_DOUBLE_EQ(c.x, 0.5);
    EXPECT_DOUBLE_EQ(c.y, 0.5);
}

TEST(Centroid, Rectangle) {
    auto c = centroid(rectangle(0, 0, 2, 1));
    EXPECT_DOUBLE_EQ(c.x, 1.0);
    EXPECT_DOUBLE_EQ(c.y, 0.5);
}

TEST(Centroid, ClockwiseRingAndLShape) {
    // L made of squares (0,0)-(2,1) and (0,1)-(1,2): area 3, centroid (5/6, 5/6).
    MultiPolygon l{{Polygon{{{0, 0}, {0, 2}, {1, 2}, {1, 1}, {2, 1}, {2, 0}, {0, 0}}, {}}}};
    auto c = centroid(l);
    EXPECT_NEAR(c.x, 5.0 / 6, 1e-12);
    EXPECT_NEAR(c.y, 5.0 / 6, 1e-12);
    EXPECT_NEAR(area(l), 3.0, 1e-12);
}

TEST(Centroid, HoleShiftsCentroid) {
    // 4x4 square minus the 2x2 hole in its upper-right quadrant.
    Polygon p{{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {0, 0}}, {{{2, 2}, {4, 2}, {4, 4}, {2, 4}, {2, 2}}}};
    MultiPolygon m{{p}};
    EXPECT_NEAR(area(m), 12.0, 1e-12);
    auto c = centroid(m);
    EXPECT_NEAR(c.x, (16 * 2 - 4 * 3) / 12.0, 1e-12);
    EXPECT_NEAR(c.y, (16 * 2 - 4 * 3) / 12.0, 1e-12);
}

TEST(Contains, InteriorExteriorBoundary) {
    auto sq = rectangle(0, 0, 1, 1);
    EXPECT_TRUE(contains(sq, {0.5, 0.5}));
    EXPECT_FALSE(contains(sq, {5, 5}));
    EXPECT_TRUE(contains(sq, {1.0, 0.5}));
    EXPECT_TRUE(contains(sq, {0, 0}));
    EXPECT_FALSE(contains(sq, {1.0 + 1e-6, 0.5}));
}

TEST(Contains, HoleExcluded) {
    Polygon p{{{0, 0}, {4, 0}, {4, 4}, {0, 4}, {0, 0}}, {{{1, 1}, {3, 1}, {3, 3}, {1, 3}, {1, 1}}}};
    MultiPolygon m{{p}};
    EXPECT_FALSE(contains(m, {2, 2}));
    EXPECT_TRUE(contains(m, {0.5, 2}));
    EXPECT_TRUE(contains(m, {1, 2}));
}

TEST(Touch, QueenContact) {
    EXPECT_TRUE(boundaries_touch(rectangle(0, 0, 1, 1), rectangle(1, 1, 2, 2)));
    EXPECT_TRUE(boundaries_touch(rectangle(0, 0, 1, 1), rectangle(1, 0, 2, 1)));
    // Partial edge overlap without shared vertices.
    EXPECT_TRUE(boundaries_touch(rectangle(0, 0, 1, 1), rectangle(1, 0.25, 2, 0.75)));
    EXPECT_FALSE(boundaries_touch(rectangle(0, 0, 1, 1), rectangle(11, 0, 12, 1)));
    EXPECT_FALSE(boundaries_touch(rectangle(0, 0, 1, 1), rectangle(1.5, 0, 2, 1)));
}
