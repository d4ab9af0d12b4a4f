#include <cmath>

#include "doctest.h"
#include "tureis/encoding.hpp"
#include "tureis/schema.hpp"
#include "tureis/trace.hpp"

using namespace tureis;

TEST_CASE("nearest-rank percentile hand cases") {
    CHECK(nearest_rank_percentile({4.0, 1.0, 3.0, 2.0}, 0.25) == 1.0);
    CHECK(nearest_rank_percentile({4.0, 1.0, 3.0, 2.0}, 0.50) == 2.0);
    CHECK(nearest_rank_percentile({4.0, 1.0, 3.0, 2.0}, 0.75) == 3.0);
    CHECK(nearest_rank_percentile({4.0, 1.0, 3.0, 2.0}, 1.00) == 4.0);
    // rank = ceil(q * n): for n = 3, q = 0.5 -> rank 2
    CHECK(nearest_rank_percentile({1.0, 2.0, 3.0}, 0.5) == 2.0);
    CHECK(nearest_rank_percentile({7.0}, 0.25) == 7.0);
    CHECK(nearest_rank_percentile({}, 0.5) == 0.0);
}

TEST_CASE("calibration takes activity quartiles over active intervals only") {
    auto schema = HomeSchema::build({"m"}, {});
    Trace t;
    // interval 0: 1 event, interval 1: 2, interval 3: 3, interval 5: 4;
    // intervals 2 and 4 are silent and must not enter the quartiles.
    auto put = [&](double ts, int n) {
        for (int i = 0; i < n; ++i) t.events.push_back({ts + i, "m", 1.0});
    };
    put(0.0, 1);
    put(60.0, 2);
    put(180.0, 3);
    put(300.0, 4);
    t.duration = 360.0;
    auto stats = calibrate_stats(t, schema);
    CHECK(stats.at("m").p25 == 1.0);  // rank ceil(0.25*4)=1 of {1,2,3,4}
    CHECK(stats.at("m").p75 == 3.0);  // rank ceil(0.75*4)=3
}

TEST_CASE("activity bits encode silent / low / medium / high levels") {
    auto schema = HomeSchema::build({"m"}, {});
    StatsMap stats;
    stats["m"] = {2.0, 4.0, 0.0, 0.0};  // p25 = 2, p75 = 4

    auto enc = [&](int m) {
        std::map<std::string, IntervalValues> ev;
        ev["m"] = IntervalValues(m, 1.0);
        return encode_interval(ev, stats, schema, 0).bits;
    };
    CHECK(enc(0) == std::vector<uint8_t>{0, 0});  // silent
    CHECK(enc(1) == std::vector<uint8_t>{0, 1});  // 0 < m < p25
    CHECK(enc(2) == std::vector<uint8_t>{1, 0});  // p25 <= m < p75
    CHECK(enc(3) == std::vector<uint8_t>{1, 0});
    CHECK(enc(4) == std::vector<uint8_t>{1, 1});  // m >= p75
    CHECK(enc(9) == std::vector<uint8_t>{1, 1});
}

TEST_CASE("numeric volatility bits compare within-interval stats strictly") {
    auto schema = HomeSchema::build({}, {"n"});
    StatsMap stats;
    // p25 = p75 = 1 so any activity reads (1,1); thresholds chosen per case.
    SUBCASE("steady readings give jumpy=0 burst=0") {
        stats["n"] = {1.0, 1.0, 0.5, 0.5};
        std::map<std::string, IntervalValues> ev;
        ev["n"] = {10.0, 10.0, 10.0};
        auto bits = encode_interval(ev, stats, schema, 0).bits;
        CHECK(bits == std::vector<uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("alternating readings: diff std is population form, ddof=0") {
        // values 0,1,0,1 -> diffs {1,-1,1}: mean 1/3, population std sqrt(8/9)
        double sd = std::sqrt(8.0 / 9.0);
        std::map<std::string, IntervalValues> ev;
        ev["n"] = {0.0, 1.0, 0.0, 1.0};

        stats["n"] = {1.0, 1.0, sd - 1e-9, 2.0};  // just below -> jumpy trips
        CHECK(encode_interval(ev, stats, schema, 0).bits ==
              std::vector<uint8_t>{1, 1, 1, 0});

        stats["n"] = {1.0, 1.0, sd, 2.0};  // exactly equal -> strict > fails
        CHECK(encode_interval(ev, stats, schema, 0).bits ==
              std::vector<uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("burst compares max |diff| against the median |diff| strictly") {
        std::map<std::string, IntervalValues> ev;
        ev["n"] = {0.0, 3.0};  // single diff of 3
        stats["n"] = {1.0, 1.0, 100.0, 2.5};
        CHECK(encode_interval(ev, stats, schema, 0).bits ==
              std::vector<uint8_t>{1, 1, 0, 1});
        stats["n"] = {1.0, 1.0, 100.0, 3.0};  // tie -> no burst
        CHECK(encode_interval(ev, stats, schema, 0).bits ==
              std::vector<uint8_t>{1, 1, 0, 0});
    }
    SUBCASE("fewer than two readings cannot form diffs") {
        stats["n"] = {1.0, 1.0, 0.0, 0.0};
        std::map<std::string, IntervalValues> ev;
        ev["n"] = {5.0};  // m = 1 >= p75 = 1 -> high activity, no diffs
        CHECK(encode_interval(ev, stats, schema, 0).bits ==
              std::vector<uint8_t>{1, 1, 0, 0});
    }
}

TEST_CASE("interval encoding lays sensors out at their schema offsets") {
    auto schema = HomeSchema::build({"a", "b"}, {"n"});
    StatsMap stats;
    stats["a"] = {1.0, 2.0, 0.0, 0.0};
    stats["b"] = {1.0, 2.0, 0.0, 0.0};
    stats["n"] = {1.0, 1.0, 0.5, 0.5};
    std::map<std::string, IntervalValues> ev;
    ev["b"] = {1.0, 0.0};  // m = 2 >= p75 -> (1,1)
    ev["n"] = {7.0};       // m = 1 >= p75 = 1 -> (1,1), no diffs
    auto iv = encode_interval(ev, stats, schema, 3);
    CHECK(iv.tau == 3);
    REQUIRE(iv.bits.size() == 8);
    // sensor "a" silent at offset 0
    CHECK(iv.bits[0] == 0);
    CHECK(iv.bits[1] == 0);
    // sensor "b" high at offset 2
    CHECK(iv.bits[2] == 1);
    CHECK(iv.bits[3] == 1);
    // numeric at offset 4: one reading, p25 = p75 = 1 -> high, no diffs
    CHECK(iv.bits[4] == 1);
    CHECK(iv.bits[5] == 1);
    CHECK(iv.bits[6] == 0);
    CHECK(iv.bits[7] == 0);
}

TEST_CASE("stride-1 windows cover n - L + 1 starts and copy rows in order") {
    std::vector<IntervalVector> ivs;
    for (int tau = 0; tau < 8; ++tau) {
        IntervalVector iv;
        iv.tau = tau;
        iv.bits = {static_cast<uint8_t>(tau & 1), static_cast<uint8_t>(tau >> 1 & 1)};
        ivs.push_back(iv);
    }
    auto ws = windows_from_intervals(ivs, 2);
    REQUIRE(ws.size() == 8 - kSeqLen + 1);
    for (std::size_t w = 0; w < ws.size(); ++w) {
        CHECK(ws[w].start_tau == static_cast<int>(w));
        CHECK(ws[w].cols == 2);
        for (int r = 0; r < kSeqLen; ++r) {
            int tau = static_cast<int>(w) + r;
            CHECK(ws[w].at(r, 0) == (tau & 1));
            CHECK(ws[w].at(r, 1) == (tau >> 1 & 1));
        }
    }
    // too few intervals -> no windows
    ivs.resize(kSeqLen - 1);
    CHECK(windows_from_intervals(ivs, 2).empty());
}

TEST_CASE("stats JSON round trip") {
    StatsMap stats;
    stats["m"] = {1.0, 3.0, 0.0, 0.0};
    stats["n"] = {2.0, 5.0, 0.25, 1.5};
    auto back = stats_from_json(stats_to_json(stats));
    REQUIRE(back.size() == 2);
    CHECK(back.at("n").p25 == doctest::Approx(2.0));
    CHECK(back.at("n").p75 == doctest::Approx(5.0));
    CHECK(back.at("n").sigma_delta == doctest::Approx(0.25));
    CHECK(back.at("n").med_delta == doctest::Approx(1.5));
    CHECK(back.at("m").p75 == doctest::Approx(3.0));
}

TEST_CASE("coactivation gap separates synchronized from disjoint pairs") {
    auto schema = HomeSchema::build({"a", "b", "c"}, {});
    Trace t;
    // a and b fire together in the first half hour; c only in the second, so
    // few sliding windows see both a and c.
    for (int tau = 0; tau < 60; ++tau) {
        double ts = tau * 60.0 + 5.0;
        if (tau < 30) {
            t.events.push_back({ts, "a", 1.0});
            t.events.push_back({ts + 1.0, "b", 1.0});
        } else {
            t.events.push_back({ts, "c", 1.0});
        }
    }
    t.duration = 3600.0;
    double gap = coactivation_gap(t, schema, {{"a", "b"}}, {{"a", "c"}}, kSeqLen);
    CHECK(gap > 0.0);
    double inverted = coactivation_gap(t, schema, {{"a", "c"}}, {{"a", "b"}}, kSeqLen);
    CHECK(inverted < 0.0);
    CHECK_THROWS(coactivation_gap(t, schema, {}, {{"a", "c"}}, kSeqLen));
    CHECK_THROWS(coactivation_gap(t, schema, {{"a", "b"}}, {{"a", "c"}}, 0));
}
