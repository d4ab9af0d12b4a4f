#pragma once
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tureis/faults.hpp"
#include "tureis/model.hpp"
#include "tureis/runtime.hpp"
#include "tureis/trace.hpp"

namespace tureis {

// Canonical split: 500 h train / 100 h validation / 30 x 6 h evaluation
// segments, each duplicated clean + injected. Shorter traces (>= 10 h) scale
// all three windows proportionally and are marked "scaled".
struct ProtocolPlan {
    double train_t0 = 0.0, train_t1 = 0.0;
    double val_t0 = 0.0, val_t1 = 0.0;
    double eval_t0 = 0.0, eval_t1 = 0.0;
    int segment_count = 30;
    double segment_seconds = 0.0;
    bool scaled = false;

    double segment_start(int i) const { return eval_t0 + i * segment_seconds; }
};

ProtocolPlan build_protocol(const Trace& trace);

enum class ExperimentMode { Single, Multi };

struct FaultOutcome {
    FaultKind kind = FaultKind::Outlier;
    std::string sensor_id;
    double start_s = 0.0;
    bool localized = false;
    double delay_min = 0.0;  // valid only when localized
};

struct SegmentRow {
    std::string segment_id;
    bool injected_copy = false;
    std::string mode;
    std::vector<std::string> injected_sensors;
    std::vector<std::string> flagged_sensors;
    int tp = 0, fp = 0, fn = 0;
    double first_correct_delay_min = -1.0;  // -1 = no correct localization
    std::vector<FaultOutcome> faults;

    bool detected() const { return !flagged_sensors.empty(); }
};

struct PRF {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
    PRF detection;
    PRF localization;
    double mean_localization_time_min = 0.0;
    int localized_count = 0;
    int unlocalized_count = 0;  // faults never correctly flagged
    std::map<std::string, double> detection_rate_by_kind;
    std::map<std::string, double> localization_rate_by_kind;
    std::vector<SegmentRow> rows;
    bool scaled = false;
    std::string verdicts_csv;
};

// Pluggable per-segment detector; the real one runs stream inference and
// ignores the ground-truth argument. Stubs use it for harness self-tests.
using SegmentDetector =
    std::function<VerdictLog(const Trace& segment, const HomeSchema& schema,
                             const std::vector<FaultSpec>& truth)>;

SegmentDetector oracle_detector();  // flags exactly the injected sensors at fault start
SegmentDetector mute_detector();    // never flags

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::Single;
    std::vector<uint64_t> seeds = {1};
    TrainConfig train;
};

// Full protocol: calibrate stats and train on the train window, set thresholds
// on the validation window, then score every clean/injected segment pair.
// When `detector` is provided, training and calibration are skipped.
MetricsReport run_experiment(const Trace& trace, const HomeSchema& schema,
                             const ExperimentConfig& config,
                             SegmentDetector detector = nullptr);

PRF compute_detection_metrics(const std::vector<SegmentRow>& rows);
PRF compute_localization_metrics(const std::vector<SegmentRow>& rows);
// mean minutes over correctly localized faults; misses counted separately
std::pair<double, int> compute_localization_time(const std::vector<SegmentRow>& rows);

std::string report_to_json(const MetricsReport& report);
// columns: segment_id, copy, mode, injected_sensors, flagged_sensors, tp, fp,
// fn, first_correct_delay_min
std::string report_to_csv(const MetricsReport& report);

} // namespace tureis
