#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "tureis/evaluate.hpp"
#include "tureis/synth.hpp"

using namespace tureis;

namespace {

SegmentRow row(bool injected, std::vector<std::string> inj,
               std::vector<std::string> flagged) {
    SegmentRow r;
    r.injected_copy = injected;
    r.injected_sensors = std::move(inj);
    r.flagged_sensors = std::move(flagged);
    std::set<std::string> in(r.injected_sensors.begin(), r.injected_sensors.end());
    for (const auto& s : r.flagged_sensors) in.count(s) ? ++r.tp : ++r.fp;
    for (const auto& s : r.injected_sensors)
        if (std::find(r.flagged_sensors.begin(), r.flagged_sensors.end(), s) ==
            r.flagged_sensors.end())
            ++r.fn;
    return r;
}

} // namespace

TEST_CASE("the canonical protocol is 500 h train, 100 h validation, 30 x 6 h") {
    Trace t;
    t.events.push_back({0.0, "a", 1.0});
    t.duration = 780.0 * 3600.0;
    auto plan = build_protocol(t);
    CHECK_FALSE(plan.scaled);
    CHECK(plan.train_t0 == 0.0);
    CHECK(plan.train_t1 == doctest::Approx(500.0 * 3600.0));
    CHECK(plan.val_t0 == doctest::Approx(500.0 * 3600.0));
    CHECK(plan.val_t1 == doctest::Approx(600.0 * 3600.0));
    CHECK(plan.eval_t0 == doctest::Approx(600.0 * 3600.0));
    CHECK(plan.segment_count == 30);
    CHECK(plan.segment_seconds == doctest::Approx(6.0 * 3600.0));
    CHECK(plan.eval_t1 == doctest::Approx(780.0 * 3600.0));
    CHECK(plan.segment_start(0) == doctest::Approx(plan.eval_t0));
    CHECK(plan.segment_start(29) == doctest::Approx(780.0 * 3600.0 - 6.0 * 3600.0));
}

TEST_CASE("shorter traces scale all protocol windows proportionally") {
    Trace t;
    t.events.push_back({0.0, "a", 1.0});
    t.duration = 78.0 * 3600.0;  // a tenth of the canonical length
    auto plan = build_protocol(t);
    CHECK(plan.scaled);
    CHECK(plan.train_t1 == doctest::Approx(50.0 * 3600.0));
    CHECK(plan.val_t1 == doctest::Approx(60.0 * 3600.0));
    CHECK(plan.segment_seconds == doctest::Approx(0.6 * 3600.0));
    CHECK(plan.eval_t1 == doctest::Approx(78.0 * 3600.0));

    t.duration = 9.9 * 3600.0;
    CHECK_THROWS(build_protocol(t));
}

TEST_CASE("detection metrics count each segment once") {
    std::vector<SegmentRow> rows;
    // 4 injected segments all flagged somewhere, 4 clean segments also flagged
    for (int i = 0; i < 4; ++i) rows.push_back(row(true, {"a"}, {"b"}));
    for (int i = 0; i < 4; ++i) rows.push_back(row(false, {}, {"c"}));
    auto prf = compute_detection_metrics(rows);
    CHECK(prf.precision == doctest::Approx(0.5));
    CHECK(prf.recall == doctest::Approx(1.0));
    CHECK(prf.f1 == doctest::Approx(2.0 / 3.0));

    // empty input follows the 0/0 -> 0 convention
    auto zero = compute_detection_metrics({});
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);
}

TEST_CASE("localization metrics count flagged sensors, not segments") {
    std::vector<SegmentRow> rows;
    // 3 injected sensors, 2 correctly flagged -> P = 1, R = 2/3, F1 = 0.8
    rows.push_back(row(true, {"a", "b", "c"}, {"a", "b"}));
    auto prf = compute_localization_metrics(rows);
    CHECK(prf.precision == doctest::Approx(1.0));
    CHECK(prf.recall == doctest::Approx(2.0 / 3.0));
    CHECK(prf.f1 == doctest::Approx(0.8));

    // a flag on the clean copy is a localization false positive
    rows.push_back(row(false, {}, {"a"}));
    prf = compute_localization_metrics(rows);
    CHECK(prf.precision == doctest::Approx(2.0 / 3.0));
    CHECK(prf.recall == doctest::Approx(2.0 / 3.0));

    // a miss with no flags at all contributes only fn
    rows.push_back(row(true, {"d"}, {}));
    prf = compute_localization_metrics(rows);
    CHECK(prf.recall == doctest::Approx(0.5));
}

TEST_CASE("localization time averages delays over localized faults only") {
    SegmentRow a;
    a.faults.push_back({FaultKind::Drift, "x", 0.0, true, 10.0});
    a.faults.push_back({FaultKind::Spike, "y", 0.0, true, 20.0});
    SegmentRow b;
    b.faults.push_back({FaultKind::Outlier, "z", 0.0, false, 0.0});
    auto [mean_min, misses] = compute_localization_time({a, b});
    CHECK(mean_min == doctest::Approx(15.0));
    CHECK(misses == 1);
    auto [zero_mean, zero_miss] = compute_localization_time({});
    CHECK(zero_mean == 0.0);
    CHECK(zero_miss == 0);
}

TEST_CASE("a perfect detector stub scores 1.0 everywhere with zero delay") {
    SynthConfig sc;
    sc.n_rooms = 2;
    sc.binary_per_room = 2;
    sc.numeric_channels = 1;
    sc.duration_hours = 12.0;
    sc.seed = 17;
    auto home = generate_synthetic_trace(sc);
    ExperimentConfig ec;
    ec.mode = ExperimentMode::Single;
    ec.seeds = {1};

    auto rep = run_experiment(home.trace, home.schema, ec, oracle_detector());
    CHECK(rep.scaled);
    CHECK(rep.rows.size() == 60);  // 30 segments x clean + injected copies
    CHECK(rep.detection.precision == doctest::Approx(1.0));
    CHECK(rep.detection.recall == doctest::Approx(1.0));
    CHECK(rep.detection.f1 == doctest::Approx(1.0));
    CHECK(rep.localization.precision == doctest::Approx(1.0));
    CHECK(rep.localization.recall == doctest::Approx(1.0));
    CHECK(rep.localization.f1 == doctest::Approx(1.0));
    CHECK(rep.mean_localization_time_min == doctest::Approx(0.0));
    CHECK(rep.unlocalized_count == 0);
    for (const auto& [kind, rate] : rep.localization_rate_by_kind)
        CHECK(rate == doctest::Approx(1.0));
}

TEST_CASE("a mute detector stub scores zero across the board") {
    SynthConfig sc;
    sc.n_rooms = 2;
    sc.binary_per_room = 2;
    sc.numeric_channels = 1;
    sc.duration_hours = 12.0;
    sc.seed = 17;
    auto home = generate_synthetic_trace(sc);
    ExperimentConfig ec;
    ec.seeds = {1};
    auto rep = run_experiment(home.trace, home.schema, ec, mute_detector());
    CHECK(rep.detection.precision == 0.0);
    CHECK(rep.detection.recall == 0.0);
    CHECK(rep.detection.f1 == 0.0);
    CHECK(rep.localization.precision == 0.0);
    CHECK(rep.localization.recall == 0.0);
    CHECK(rep.localization.f1 == 0.0);
    CHECK(rep.localized_count == 0);
    CHECK(rep.unlocalized_count == 30);
}

TEST_CASE("experiment reports are deterministic and machine readable") {
    SynthConfig sc;
    sc.n_rooms = 2;
    sc.binary_per_room = 2;
    sc.numeric_channels = 1;
    sc.duration_hours = 12.0;
    sc.seed = 29;
    auto home = generate_synthetic_trace(sc);
    ExperimentConfig ec;
    ec.seeds = {4};
    auto rep1 = run_experiment(home.trace, home.schema, ec, oracle_detector());
    auto rep2 = run_experiment(home.trace, home.schema, ec, oracle_detector());
    CHECK(report_to_csv(rep1) == report_to_csv(rep2));  // byte identical
    CHECK(report_to_json(rep1) == report_to_json(rep2));
    CHECK(rep1.verdicts_csv == rep2.verdicts_csv);

    auto csv = report_to_csv(rep1);
    CHECK(csv.rfind("segment_id,copy,mode,injected_sensors,flagged_sensors,"
                    "tp,fp,fn,first_correct_delay_min\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 60);
}
