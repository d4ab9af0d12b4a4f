#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "tureis/faults.hpp"
#include "tureis/schema.hpp"

using namespace tureis;

namespace {

// one ON/OFF pair per minute for `minutes` on sensor `bid`, one reading per
// 15 s on sensor `nid` centered at 20 with an alternating +/-1 texture
Trace fixture_trace(double minutes, const std::string& bid, const std::string& nid) {
    Trace t;
    for (int m = 0; m < static_cast<int>(minutes); ++m) {
        t.events.push_back({m * 60.0 + 5.0, bid, 1.0});
        t.events.push_back({m * 60.0 + 10.0, bid, 0.0});
    }
    int tick = 0;
    for (double ts = 0.0; ts < minutes * 60.0; ts += 15.0, ++tick)
        t.events.push_back({ts, nid, 20.0 + (tick % 2 ? 1.0 : -1.0)});
    t.duration = minutes * 60.0;
    t.sort_events();
    return t;
}

std::vector<SensorEvent> events_of(const Trace& t, const std::string& id) {
    std::vector<SensorEvent> out;
    for (const auto& e : t.events)
        if (e.sensor_id == id) out.push_back(e);
    return out;
}

} // namespace

TEST_CASE("fault kind names round trip") {
    for (int i = 0; i < kFaultKindCount; ++i) {
        auto k = static_cast<FaultKind>(i);
        CHECK(fault_kind_from_name(fault_kind_name(k)) == k);
    }
    CHECK_THROWS(fault_kind_from_name("meltdown"));
}

TEST_CASE("channel profiles report mean, std and events per minute") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(10.0, "b", "n");
    auto prof = profile_channels(t, schema);
    // numeric: alternating 19/21 -> mean 20, population std 1
    CHECK(prof.at("n").mean == doctest::Approx(20.0));
    CHECK(prof.at("n").std == doctest::Approx(1.0));
    CHECK(prof.at("n").event_rate == doctest::Approx(4.0));  // 15 s cadence
    // binary: activation fraction and 2 events per minute
    CHECK(prof.at("b").mean == doctest::Approx(0.5));
    CHECK(prof.at("b").event_rate == doctest::Approx(2.0));
    CHECK_THROWS(profile_channels(Trace{}, schema));
}

TEST_CASE("injection leaves every other sensor's events bit-identical") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(30.0, "b", "n");
    auto prof = profile_channels(t, schema);
    for (int i = 0; i < kFaultKindCount; ++i) {
        FaultSpec spec;
        spec.kind = static_cast<FaultKind>(i);
        spec.sensor_id = "n";
        spec.start_tau = 300.0;
        spec.duration_delta = 600.0;
        spec.seed = 99;
        auto res = inject(t, schema, spec, prof.at("n"));
        auto before = events_of(t, "b");
        auto after = events_of(res.trace, "b");
        REQUIRE(after.size() == before.size());
        for (std::size_t k = 0; k < before.size(); ++k) {
            CHECK(after[k].timestamp == before[k].timestamp);
            CHECK(after[k].value == before[k].value);
        }
    }
}

TEST_CASE("injection is a pure function of the spec seed") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(30.0, "b", "n");
    auto prof = profile_channels(t, schema);
    FaultSpec spec;
    spec.kind = FaultKind::HighNoise;
    spec.sensor_id = "b";
    spec.start_tau = 300.0;
    spec.duration_delta = 600.0;
    spec.seed = 7;
    auto a = inject(t, schema, spec, prof.at("b"));
    auto b = inject(t, schema, spec, prof.at("b"));
    REQUIRE(a.trace.events.size() == b.trace.events.size());
    for (std::size_t k = 0; k < a.trace.events.size(); ++k) {
        CHECK(a.trace.events[k].timestamp == b.trace.events[k].timestamp);
        CHECK(a.trace.events[k].value == b.trace.events[k].value);
    }
    spec.seed = 8;
    auto c = inject(t, schema, spec, prof.at("b"));
    bool differs = a.trace.events.size() != c.trace.events.size();
    for (std::size_t k = 0; !differs && k < a.trace.events.size(); ++k)
        differs = a.trace.events[k].timestamp != c.trace.events[k].timestamp;
    CHECK(differs);
}

TEST_CASE("windowed faults only touch readings inside their window") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(30.0, "b", "n");
    auto prof = profile_channels(t, schema);
    for (auto kind : {FaultKind::Spike, FaultKind::StuckAt, FaultKind::HighNoise,
                      FaultKind::Drift}) {
        FaultSpec spec;
        spec.kind = kind;
        spec.sensor_id = "n";
        spec.start_tau = 600.0;
        spec.duration_delta = 300.0;
        spec.seed = 3;
        auto res = inject(t, schema, spec, prof.at("n"));
        auto before = events_of(t, "n");
        auto after = events_of(res.trace, "n");
        REQUIRE(after.size() == before.size());
        int changed = 0;
        for (std::size_t k = 0; k < before.size(); ++k) {
            bool inside = before[k].timestamp >= 600.0 && before[k].timestamp < 900.0;
            if (!inside)
                CHECK(after[k].value == before[k].value);
            else if (after[k].value != before[k].value)
                ++changed;
        }
        CHECK(changed > 0);
        // the count includes window readings even when the additive term is
        // exactly zero (e.g. a drift ramp at its own start)
        CHECK(res.injected_event_count >= changed);
    }
}

TEST_CASE("numeric fault realizations match their envelopes") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(30.0, "b", "n");
    auto prof = profile_channels(t, schema);  // n: mean 20, std 1
    FaultSpec spec;
    spec.sensor_id = "n";
    spec.start_tau = 600.0;
    spec.duration_delta = 300.0;
    spec.seed = 5;

    SUBCASE("spike alternates +/- six sigma") {
        spec.kind = FaultKind::Spike;
        auto after = events_of(inject(t, schema, spec, prof.at("n")).trace, "n");
        auto before = events_of(t, "n");
        bool up = true;
        for (std::size_t k = 0; k < before.size(); ++k) {
            if (before[k].timestamp < 600.0 || before[k].timestamp >= 900.0) continue;
            CHECK(after[k].value - before[k].value ==
                  doctest::Approx(up ? 6.0 : -6.0));
            up = !up;
        }
    }
    SUBCASE("stuck-at pins readings to mean plus two sigma") {
        spec.kind = FaultKind::StuckAt;
        auto after = events_of(inject(t, schema, spec, prof.at("n")).trace, "n");
        for (const auto& e : after)
            if (e.timestamp >= 600.0 && e.timestamp < 900.0)
                CHECK(e.value == doctest::Approx(20.0 + 2.0));
    }
    SUBCASE("drift ramps linearly from zero over the window") {
        spec.kind = FaultKind::Drift;
        auto after = events_of(inject(t, schema, spec, prof.at("n")).trace, "n");
        auto before = events_of(t, "n");
        double slope = 10.0 / 300.0;  // max(10*sigma, 1) over the window
        for (std::size_t k = 0; k < before.size(); ++k) {
            if (before[k].timestamp < 600.0 || before[k].timestamp >= 900.0) continue;
            CHECK(after[k].value - before[k].value ==
                  doctest::Approx(slope * (before[k].timestamp - 600.0)));
        }
    }
    SUBCASE("explicit param overrides the derived magnitude") {
        spec.kind = FaultKind::StuckAt;
        spec.param = -3.5;
        auto after = events_of(inject(t, schema, spec, prof.at("n")).trace, "n");
        for (const auto& e : after)
            if (e.timestamp >= 600.0 && e.timestamp < 900.0)
                CHECK(e.value == doctest::Approx(-3.5));
    }
}

TEST_CASE("outlier adds one transient; fail-stop silences the sensor") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(30.0, "b", "n");
    auto prof = profile_channels(t, schema);

    SUBCASE("binary outlier is a single spurious ON/OFF pair") {
        FaultSpec spec{FaultKind::Outlier, "b", 601.0, 0.0,
                       std::numeric_limits<double>::quiet_NaN(), 1};
        auto res = inject(t, schema, spec, prof.at("b"));
        CHECK(res.injected_event_count == 2);
        auto after = events_of(res.trace, "b");
        CHECK(after.size() == events_of(t, "b").size() + 2);
    }
    SUBCASE("numeric outlier is one reading six sigma from the mean") {
        FaultSpec spec{FaultKind::Outlier, "n", 601.0, 0.0,
                       std::numeric_limits<double>::quiet_NaN(), 1};
        auto res = inject(t, schema, spec, prof.at("n"));
        CHECK(res.injected_event_count == 1);
        bool found = false;
        for (const auto& e : events_of(res.trace, "n"))
            if (e.timestamp == 601.0) {
                found = true;
                CHECK(std::abs(e.value - 20.0) == doctest::Approx(6.0));
            }
        CHECK(found);
    }
    SUBCASE("fail-stop removes all target events from start onward") {
        FaultSpec spec{FaultKind::FailStop, "n", 600.0, 0.0,
                       std::numeric_limits<double>::quiet_NaN(), 1};
        auto res = inject(t, schema, spec, prof.at("n"));
        for (const auto& e : events_of(res.trace, "n"))
            CHECK(e.timestamp < 600.0);
    }
}

TEST_CASE("fault windows are clipped to the trace duration") {
    auto schema = HomeSchema::build({"b"}, {"n"});
    auto t = fixture_trace(10.0, "b", "n");
    auto prof = profile_channels(t, schema);
    FaultSpec spec{FaultKind::HighNoise, "b", 540.0, 3600.0,
                   std::numeric_limits<double>::quiet_NaN(), 2};
    auto res = inject(t, schema, spec, prof.at("b"));
    CHECK_NOTHROW(res.trace.validate());
    for (const auto& e : res.trace.events) CHECK(e.timestamp < t.duration);
}

TEST_CASE("single-fault sampling stays inside the segment and is deterministic") {
    auto schema = HomeSchema::build({"a", "b", "c", "d"}, {"n"});
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto spec = sample_single_fault(schema, 1000.0, 1000.0 + 6 * 3600.0, seed);
        CHECK(schema.contains(spec.sensor_id));
        CHECK(spec.start_tau >= 1000.0);
        CHECK(spec.start_tau + spec.duration_delta <= 1000.0 + 6 * 3600.0 + 1e-9);
        if (spec.windowed())
            CHECK(spec.duration_delta == kDefaultFaultDurationSec);
        else
            CHECK(spec.duration_delta == 0.0);
        auto again = sample_single_fault(schema, 1000.0, 1000.0 + 6 * 3600.0, seed);
        CHECK(again.kind == spec.kind);
        CHECK(again.sensor_id == spec.sensor_id);
        CHECK(again.start_tau == spec.start_tau);
        CHECK(again.seed == spec.seed);
    }
    CHECK_THROWS(sample_single_fault(schema, 10.0, 10.0, 1));
}

TEST_CASE("multi-fault sampling draws 1..5 distinct sensors") {
    auto schema = HomeSchema::build({"a", "b", "c", "d", "e", "f"}, {"n"});
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto specs = sample_multi_faults(schema, 0.0, 6 * 3600.0, seed);
        CHECK(specs.size() >= 1);
        CHECK(specs.size() <= 5);
        std::set<std::string> ids;
        for (const auto& s : specs) {
            ids.insert(s.sensor_id);
            CHECK(s.start_tau >= 0.0);
            CHECK(s.start_tau + s.duration_delta <= 6 * 3600.0 + 1e-9);
        }
        CHECK(ids.size() == specs.size());  // no sensor drawn twice
    }
    auto tiny = HomeSchema::build({"a", "b"}, {});
    CHECK_THROWS(sample_multi_faults(tiny, 0.0, 3600.0, 1));
}

TEST_CASE("fault plan JSON round trip") {
    std::vector<FaultSpec> plan;
    plan.push_back({FaultKind::Drift, "n", 120.0, 1800.0, 0.5, 42});
    plan.push_back({FaultKind::Outlier, "b", 60.0, 0.0,
                    std::numeric_limits<double>::quiet_NaN(), 7});
    auto back = fault_plan_from_json(fault_plan_to_json(plan));
    REQUIRE(back.size() == 2);
    CHECK(back[0].kind == FaultKind::Drift);
    CHECK(back[0].sensor_id == "n");
    CHECK(back[0].start_tau == 120.0);
    CHECK(back[0].duration_delta == 1800.0);
    CHECK(back[0].param == doctest::Approx(0.5));
    CHECK(back[0].seed == 42);
    CHECK(back[1].kind == FaultKind::Outlier);
    CHECK(std::isnan(back[1].param));
    CHECK(back[1].seed == 7);
}
