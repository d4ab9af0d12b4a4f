#pragma once
#include <map>
#include <string>
#include <vector>

#include "tureis/encoding.hpp"
#include "tureis/model.hpp"
#include "tureis/schema.hpp"
#include "tureis/trace.hpp"

namespace tureis {

// Per-sensor trip thresholds: the maximum unsmoothed residual seen on the
// clean validation stream.
struct Baselines {
    std::map<std::string, double> theta;
};

struct ResidualState {
    double alpha = 0.0;
    std::map<std::string, double> r_hat;  // absent key = not yet initialized
};

struct Verdict {
    std::string sensor_id;
    int tau = 0;               // interval index of the triggering window's last interval
    double flag_time_s = 0.0;  // end of the triggering interval
    double r_hat_at_flag = 0.0;
    double theta = 0.0;
};

struct IsolationSet {
    std::vector<std::pair<std::string, int>> flagged;  // (sensor_id, flag tau), flag order

    bool contains(const std::string& id) const;
    void add(const std::string& id, int tau);
};

// Mean bit-level cross entropy over sensor k's bit range across the window
// (probabilities clamped to [1e-7, 1-1e-7]).
double sensor_residual(const Mat& logits, const Mat& observed_bits,
                       const SensorSchema& sensor);

// alpha such that a residual's weight halves after L steps.
double ewma_alpha_from_halflife(int L);

// First observation initializes r_hat to r; afterwards the standard update.
void ewma_update(ResidualState& state, const std::string& sensor_id, double r);

Baselines calibrate_baselines(const ModelParams& params,
                              const std::vector<SequenceWindow>& clean_validation_windows,
                              const HomeSchema& schema);

// Streaming detector: buffers encoded intervals, masks isolated sensors with
// the model's learnable mask value, and trips strict r_hat > theta verdicts.
// Isolation of a flagged sensor takes effect from the next window.
class StreamRunner {
public:
    StreamRunner(const ModelParams& params, const StatsMap& stats,
                 const Baselines& baselines, const HomeSchema& schema);

    std::vector<Verdict> step(const IntervalVector& interval);

    const IsolationSet& isolation() const { return isolation_; }
    const ResidualState& residual_state() const { return state_; }

private:
    const ModelParams& params_;
    const StatsMap& stats_;
    const Baselines& baselines_;
    const HomeSchema& schema_;
    std::vector<IntervalVector> buffer_;  // last L intervals
    ResidualState state_;
    IsolationSet isolation_;
};

struct VerdictLog {
    std::vector<Verdict> verdicts;
    IsolationSet final_isolation;
};

VerdictLog run_stream(const ModelParams& params, const StatsMap& stats,
                      const Baselines& baselines, const HomeSchema& schema,
                      const Trace& trace);

std::string baselines_to_json(const Baselines& b);
Baselines baselines_from_json(const std::string& text);

// CSV columns: segment_id, sensor_id, flag_interval, flag_time_s, r_hat, theta.
std::string verdicts_csv_header();
std::string verdicts_to_csv_rows(const std::string& segment_id, const VerdictLog& log);

} // namespace tureis
