#include <gtest/gtest.h>

#include "crimeflow/time.hpp"

using namespace crimeflow;

TEST(HourOfWeek, MondayOrigin) {
    auto utc = TimeZone::utc();
    // 2013-01-07 is a Monday.
    EXPECT_EQ(hour_of_week("2013-01-07T00:30:00", utc), 0);
    EXPECT_EQ(hour_of_week("2013-01-07T23:10:00", utc), 23);
    EXPECT_EQ(hour_of_week("2013-01-13T23:59:59", utc), 167);
    EXPECT_EQ(hour_of_week("2013-01-11T22:05:00", utc), 118);
}

TEST(HourOfWeek, EveryHourOfAWeek) {
    for (int d = 0; d < 7; ++d)
        for (int h = 0; h < 24; ++h) EXPECT_EQ(hour_of_week(make_local(2012, 10, 1 + d, h, 17)), 24 * d + h);
}

TEST(HourOfWeek, PreEpochDates) {
    // 1969-12-29 was a Monday.
    EXPECT_EQ(hour_of_week(make_local(1969, 12, 29, 5)), 5);
    EXPECT_EQ(hour_of_week(make_local(1969, 12, 28, 23)), 167);
}

TEST(Weekend, SaturdayAndSunday) {
    EXPECT_FALSE(is_weekend_hour(0));
    EXPECT_FALSE(is_weekend_hour(119));
    EXPECT_TRUE(is_weekend_hour(120));
    EXPECT_TRUE(is_weekend_hour(167));
}

TEST(Timestamp, OffsetsConvertThroughUtc) {
    auto pacific = TimeZone::parse("-08:00");
    // 08:30Z is 00:30 at -08:00 on the same Monday.
    EXPECT_EQ(hour_of_week("2013-01-07T08:30:00Z", pacific), 0);
    // Naive stamps are already local.
    EXPECT_EQ(hour_of_week("2013-01-07T08:30:00", pacific), 8);
    EXPECT_EQ(hour_of_week("2013-01-07T10:30:00+02:00", pacific), 0);
}

TEST(Timestamp, NamedZoneUsesDaylightSaving) {
    auto ny = TimeZone::parse("America/New_York");
    // July: UTC-4; January: UTC-5.
    EXPECT_EQ(format_local(parse_local("2013-07-01T16:00:00Z", ny)), "2013-07-01T12:00:00");
    EXPECT_EQ(format_local(parse_local("2013-01-07T17:00:00Z", ny)), "2013-01-07T12:00:00");
}

TEST(Timestamp, RejectsGarbage) {
    EXPECT_FALSE(parse_iso8601("yesterday"));
    EXPECT_FALSE(parse_iso8601("2013-13-01T00:00:00"));
    EXPECT_THROW(parse_local("2013-01-07T25:00:00", TimeZone::utc()), ValidationError);
    EXPECT_THROW(TimeZone::parse("+25"), ValidationError);
}

TEST(Timestamp, YearAndRoundTrip) {
    auto t = parse_local("2012-12-31T23:59:59", TimeZone::utc());
    EXPECT_EQ(year_of(t), 2012);
    EXPECT_EQ(year_of(LocalTime{t.seconds + 1}), 2013);
    EXPECT_EQ(format_local(t), "2012-12-31T23:59:59");
    EXPECT_EQ(parse_local(format_local(t), TimeZone::utc()), t);
}
