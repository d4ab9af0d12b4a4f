#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tureis/trace.hpp"

namespace tureis {

constexpr int kSeqLen = 5;            // window length L
constexpr double kIntervalSec = 60.0; // interval grid

// Per-sensor calibration statistics used by the bit encoder.
struct ChannelStats {
    double p25 = 0.0;          // 25th percentile of per-interval counts (active intervals)
    double p75 = 0.0;          // 75th percentile
    double sigma_delta = 0.0;  // std of within-interval successive diffs (numeric only)
    double med_delta = 0.0;    // median of |successive diffs| (numeric only)
};

using StatsMap = std::map<std::string, ChannelStats>;

struct IntervalVector {
    int tau = 0;
    std::vector<uint8_t> bits;  // length D
};

struct SequenceWindow {
    int start_tau = 0;
    std::vector<uint8_t> bits;  // L x D, row-major

    uint8_t at(int row, int col) const { return bits[row * cols + col]; }
    int cols = 0;
};

// Events of one sensor inside one interval, in trace order.
using IntervalValues = std::vector<double>;

StatsMap calibrate_stats(const Trace& training_trace, const HomeSchema& schema);

// Encodes one interval given per-sensor event values for that interval.
IntervalVector encode_interval(const std::map<std::string, IntervalValues>& events_by_sensor,
                               const StatsMap& stats, const HomeSchema& schema, int tau);

// Full stride-1 window stream over the 1-minute grid anchored at t = 0.
std::vector<IntervalVector> encode_intervals(const Trace& trace, const StatsMap& stats,
                                             const HomeSchema& schema);
std::vector<SequenceWindow> encode_stream(const Trace& trace, const StatsMap& stats,
                                          const HomeSchema& schema);
std::vector<SequenceWindow> windows_from_intervals(const std::vector<IntervalVector>& intervals,
                                                   int bit_dim);

// Mean coactivation probability difference between correlated and
// uncorrelated sensor pairs for a candidate window length.
using SensorPair = std::pair<std::string, std::string>;
double coactivation_gap(const Trace& trace, const HomeSchema& schema,
                        const std::vector<SensorPair>& correlated,
                        const std::vector<SensorPair>& uncorrelated, int window_len);

// Nearest-rank percentile, q in (0, 1]; values need not be sorted.
double nearest_rank_percentile(std::vector<double> values, double q);

std::string stats_to_json(const StatsMap& stats);
StatsMap stats_from_json(const std::string& text);

} // namespace tureis
