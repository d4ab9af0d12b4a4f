#include "tureis/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tureis/rng.hpp"

namespace tureis {

namespace {

constexpr double kHour = 3600.0;
constexpr double kCanonicalHours = 780.0;
constexpr double kTrainHours = 500.0;
constexpr double kValHours = 100.0;
constexpr int kSegments = 30;
constexpr double kSegmentHours = 6.0;

double prf_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

PRF make_prf(double tp, double fp, double fn) {
    PRF m;
    m.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    m.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    m.f1 = prf_f1(m.precision, m.recall);
    return m;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ';';
        out += xs[i];
    }
    return out;
}

} // namespace

ProtocolPlan build_protocol(const Trace& trace) {
    double hours = trace.duration / kHour;
    if (hours < 10.0)
        throw std::invalid_argument("trace too short for the protocol (< 10 h)");
    ProtocolPlan plan;
    double f = hours >= kCanonicalHours ? 1.0 : hours / kCanonicalHours;
    plan.scaled = f < 1.0;
    plan.train_t0 = 0.0;
    plan.train_t1 = kTrainHours * f * kHour;
    plan.val_t0 = plan.train_t1;
    plan.val_t1 = plan.val_t0 + kValHours * f * kHour;
    plan.eval_t0 = plan.val_t1;
    plan.segment_count = kSegments;
    plan.segment_seconds = kSegmentHours * f * kHour;
    plan.eval_t1 = plan.eval_t0 + plan.segment_count * plan.segment_seconds;
    return plan;
}

SegmentDetector oracle_detector() {
    return [](const Trace&, const HomeSchema&, const std::vector<FaultSpec>& truth) {
        VerdictLog log;
        for (const auto& spec : truth) {
            Verdict v;
            v.sensor_id = spec.sensor_id;
            v.tau = static_cast<int>(spec.start_tau / kIntervalSec);
            v.flag_time_s = spec.start_tau;
            v.r_hat_at_flag = 1.0;
            v.theta = 0.0;
            log.verdicts.push_back(v);
            log.final_isolation.add(v.sensor_id, v.tau);
        }
        return log;
    };
}

SegmentDetector mute_detector() {
    return [](const Trace&, const HomeSchema&, const std::vector<FaultSpec>&) {
        return VerdictLog{};
    };
}

namespace {

std::vector<std::string> distinct_flagged(const VerdictLog& log) {
    std::vector<std::string> out;
    for (const auto& v : log.verdicts)
        if (std::find(out.begin(), out.end(), v.sensor_id) == out.end())
            out.push_back(v.sensor_id);
    return out;
}

SegmentRow make_row(const std::string& segment_id, bool injected_copy,
                    const std::string& mode, const std::vector<FaultSpec>& truth,
                    const VerdictLog& log) {
    SegmentRow row;
    row.segment_id = segment_id;
    row.injected_copy = injected_copy;
    row.mode = mode;
    row.flagged_sensors = distinct_flagged(log);
    for (const auto& spec : truth) row.injected_sensors.push_back(spec.sensor_id);

    std::set<std::string> injected(row.injected_sensors.begin(), row.injected_sensors.end());
    for (const auto& s : row.flagged_sensors)
        injected.count(s) ? ++row.tp : ++row.fp;
    for (const auto& s : row.injected_sensors)
        if (std::find(row.flagged_sensors.begin(), row.flagged_sensors.end(), s) ==
            row.flagged_sensors.end())
            ++row.fn;

    for (const auto& spec : truth) {
        FaultOutcome fo;
        fo.kind = spec.kind;
        fo.sensor_id = spec.sensor_id;
        fo.start_s = spec.start_tau;
        for (const auto& v : log.verdicts) {
            if (v.sensor_id == spec.sensor_id) {
                fo.localized = true;
                fo.delay_min = (v.flag_time_s - spec.start_tau) / 60.0;
                break;  // verdicts are time-ordered; first correct flag wins
            }
        }
        if (fo.localized &&
            (row.first_correct_delay_min < 0.0 || fo.delay_min < row.first_correct_delay_min))
            row.first_correct_delay_min = fo.delay_min;
        row.faults.push_back(fo);
    }
    return row;
}

} // namespace

PRF compute_detection_metrics(const std::vector<SegmentRow>& rows) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& r : rows) {
        if (r.injected_copy)
            r.detected() ? ++tp : ++fn;
        else if (r.detected())
            ++fp;
    }
    return make_prf(tp, fp, fn);
}

PRF compute_localization_metrics(const std::vector<SegmentRow>& rows) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& r : rows) {
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
    }
    return make_prf(tp, fp, fn);
}

std::pair<double, int> compute_localization_time(const std::vector<SegmentRow>& rows) {
    double sum = 0.0;
    int n = 0, misses = 0;
    for (const auto& r : rows)
        for (const auto& fo : r.faults) {
            if (fo.localized) {
                sum += fo.delay_min;
                ++n;
            } else {
                ++misses;
            }
        }
    return {n > 0 ? sum / n : 0.0, misses};
}

MetricsReport run_experiment(const Trace& trace, const HomeSchema& schema,
                             const ExperimentConfig& config, SegmentDetector detector) {
    ProtocolPlan plan = build_protocol(trace);
    MetricsReport report;
    report.scaled = plan.scaled;
    std::string mode = config.mode == ExperimentMode::Single ? "single" : "multi";

    Trace train_slice = slice_trace(trace, plan.train_t0, plan.train_t1);
    ProfileMap profiles = profile_channels(train_slice, schema);
    std::ostringstream verdict_csv;
    verdict_csv << verdicts_csv_header();

    for (uint64_t seed : config.seeds) {
        ModelParams params;
        StatsMap stats;
        Baselines baselines;
        SegmentDetector run = detector;
        if (!run) {
            stats = calibrate_stats(train_slice, schema);
            auto train_windows = encode_stream(train_slice, stats, schema);
            TrainConfig tc = config.train;
            tc.seed = seed;
            params = train(train_windows, schema, tc).params;
            Trace val_slice = slice_trace(trace, plan.val_t0, plan.val_t1);
            auto val_windows = encode_stream(val_slice, stats, schema);
            baselines = calibrate_baselines(params, val_windows, schema);
            run = [&params, &stats, &baselines](const Trace& seg, const HomeSchema& sc,
                                                const std::vector<FaultSpec>&) {
                return run_stream(params, stats, baselines, sc, seg);
            };
        }

        Rng fault_rng(seed ^ 0xD1B54A32D192ED03ULL);
        double warmup = kSeqLen * kIntervalSec;
        for (int i = 0; i < plan.segment_count; ++i) {
            double t0 = plan.segment_start(i);
            Trace clean = slice_trace(trace, t0, t0 + plan.segment_seconds);

            std::vector<FaultSpec> truth;
            if (config.mode == ExperimentMode::Single)
                truth.push_back(sample_single_fault(schema, warmup, plan.segment_seconds,
                                                    fault_rng.next_u64()));
            else
                truth = sample_multi_faults(schema, warmup, plan.segment_seconds,
                                            fault_rng.next_u64());

            Trace injected = clean;
            for (const auto& spec : truth)
                injected = inject(injected, schema, spec, profiles.at(spec.sensor_id)).trace;

            std::string base = "s" + std::to_string(seed) + "_seg" + std::to_string(i);
            VerdictLog clean_log = run(clean, schema, {});
            VerdictLog inj_log = run(injected, schema, truth);
            report.rows.push_back(make_row(base + "_clean", false, mode, {}, clean_log));
            report.rows.push_back(make_row(base + "_injected", true, mode, truth, inj_log));
            verdict_csv << verdicts_to_csv_rows(base + "_clean", clean_log);
            verdict_csv << verdicts_to_csv_rows(base + "_injected", inj_log);
        }
    }

    report.detection = compute_detection_metrics(report.rows);
    report.localization = compute_localization_metrics(report.rows);
    auto [mean_min, misses] = compute_localization_time(report.rows);
    report.mean_localization_time_min = mean_min;
    report.unlocalized_count = misses;
    for (const auto& r : report.rows)
        for (const auto& fo : r.faults)
            if (fo.localized) ++report.localized_count;

    std::map<std::string, std::pair<int, int>> det_by_kind, loc_by_kind;  // hits, total
    for (const auto& r : report.rows)
        for (const auto& fo : r.faults) {
            std::string k = fault_kind_name(fo.kind);
            det_by_kind[k].second++;
            loc_by_kind[k].second++;
            if (r.detected()) det_by_kind[k].first++;
            if (fo.localized) loc_by_kind[k].first++;
        }
    for (const auto& [k, c] : det_by_kind)
        report.detection_rate_by_kind[k] = static_cast<double>(c.first) / c.second;
    for (const auto& [k, c] : loc_by_kind)
        report.localization_rate_by_kind[k] = static_cast<double>(c.first) / c.second;

    report.verdicts_csv = verdict_csv.str();
    return report;
}

std::string report_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["detection"] = {{"precision", report.detection.precision},
                      {"recall", report.detection.recall},
                      {"f1", report.detection.f1}};
    j["localization"] = {{"precision", report.localization.precision},
                         {"recall", report.localization.recall},
                         {"f1", report.localization.f1}};
    j["mean_localization_time_min"] = report.mean_localization_time_min;
    j["localized_count"] = report.localized_count;
    j["unlocalized_count"] = report.unlocalized_count;
    j["detection_rate_by_kind"] = report.detection_rate_by_kind;
    j["localization_rate_by_kind"] = report.localization_rate_by_kind;
    j["scaled_protocol"] = report.scaled;
    j["segment_rows"] = report.rows.size();
    return j.dump(2);
}

std::string report_to_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "segment_id,copy,mode,injected_sensors,flagged_sensors,tp,fp,fn,"
          "first_correct_delay_min\n";
    for (const auto& r : report.rows) {
        os << r.segment_id << ',' << (r.injected_copy ? "injected" : "clean") << ','
           << r.mode << ',' << join(r.injected_sensors) << ',' << join(r.flagged_sensors)
           << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',';
        if (r.first_correct_delay_min >= 0.0)
            os << r.first_correct_delay_min;
        os << '\n';
    }
    return os.str();
}

} // namespace tureis
