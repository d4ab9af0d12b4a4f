#include "tureis/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace tureis {
namespace {

int interval_count(const Trace& trace) {
    return static_cast<int>(std::ceil(trace.duration / kIntervalSec));
}

// values per (sensor index, interval), in trace order
std::vector<std::vector<IntervalValues>> bucket_by_interval(const Trace& trace,
                                                            const HomeSchema& schema) {
    int n = interval_count(trace);
    std::vector<std::vector<IntervalValues>> buckets(schema.sensor_count());
    for (auto& b : buckets) b.resize(n);
    for (const auto& e : trace.events) {
        if (!schema.contains(e.sensor_id)) continue;
        int tau = static_cast<int>(e.timestamp / kIntervalSec);
        if (tau >= n) continue;
        buckets[schema.index_of(e.sensor_id)][tau].push_back(e.value);
    }
    return buckets;
}

double population_std(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::sqrt(var / xs.size());
}

void encode_sensor_bits(const SensorSchema& sensor, const IntervalValues& values,
                        const ChannelStats& st, std::vector<uint8_t>& bits, int base) {
    int m = static_cast<int>(values.size());
    uint8_t b1 = 0, b2 = 0;
    if (m > 0) {
        if (m < st.p25) {
            b1 = 0; b2 = 1;
        } else if (m < st.p75) {
            b1 = 1; b2 = 0;
        } else {
            b1 = 1; b2 = 1;
        }
    }
    bits[base] = b1;
    bits[base + 1] = b2;
    if (sensor.kind == SensorKind::Numeric) {
        uint8_t jumpy = 0, burst = 0;
        if (m >= 2) {
            std::vector<double> diffs(m - 1);
            double max_abs = 0.0;
            for (int i = 1; i < m; ++i) {
                diffs[i - 1] = values[i] - values[i - 1];
                max_abs = std::max(max_abs, std::abs(diffs[i - 1]));
            }
            jumpy = population_std(diffs) > st.sigma_delta ? 1 : 0;
            burst = max_abs > st.med_delta ? 1 : 0;
        }
        bits[base + 2] = jumpy;
        bits[base + 3] = burst;
    }
}

} // namespace

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * values.size()));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

StatsMap calibrate_stats(const Trace& trace, const HomeSchema& schema) {
    auto buckets = bucket_by_interval(trace, schema);
    StatsMap stats;
    for (std::size_t s = 0; s < schema.sensor_count(); ++s) {
        const auto& sensor = schema.at(s);
        ChannelStats st;
        std::vector<double> active_counts;
        std::vector<double> pooled_diffs;
        std::vector<double> pooled_abs_diffs;
        for (const auto& iv : buckets[s]) {
            if (!iv.empty()) active_counts.push_back(static_cast<double>(iv.size()));
            if (sensor.kind == SensorKind::Numeric && iv.size() >= 2) {
                for (std::size_t i = 1; i < iv.size(); ++i) {
                    double d = iv[i] - iv[i - 1];
                    pooled_diffs.push_back(d);
                    pooled_abs_diffs.push_back(std::abs(d));
                }
            }
        }
        st.p25 = nearest_rank_percentile(active_counts, 0.25);
        st.p75 = nearest_rank_percentile(active_counts, 0.75);
        if (sensor.kind == SensorKind::Numeric) {
            st.sigma_delta = population_std(pooled_diffs);
            st.med_delta = nearest_rank_percentile(pooled_abs_diffs, 0.5);
        }
        stats[sensor.sensor_id] = st;
    }
    return stats;
}

IntervalVector encode_interval(const std::map<std::string, IntervalValues>& events_by_sensor,
                               const StatsMap& stats, const HomeSchema& schema, int tau) {
    IntervalVector iv;
    iv.tau = tau;
    iv.bits.assign(schema.total_bits(), 0);
    static const IntervalValues kEmpty;
    for (const auto& sensor : schema.sensors()) {
        auto ev = events_by_sensor.find(sensor.sensor_id);
        auto st = stats.find(sensor.sensor_id);
        if (st == stats.end())
            throw std::invalid_argument("missing stats for " + sensor.sensor_id);
        encode_sensor_bits(sensor, ev == events_by_sensor.end() ? kEmpty : ev->second,
                           st->second, iv.bits, sensor.bit_offset);
    }
    return iv;
}

std::vector<IntervalVector> encode_intervals(const Trace& trace, const StatsMap& stats,
                                             const HomeSchema& schema) {
    auto buckets = bucket_by_interval(trace, schema);
    int n = interval_count(trace);
    std::vector<IntervalVector> out;
    out.reserve(n);
    for (int tau = 0; tau < n; ++tau) {
        IntervalVector iv;
        iv.tau = tau;
        iv.bits.assign(schema.total_bits(), 0);
        for (std::size_t s = 0; s < schema.sensor_count(); ++s) {
            const auto& sensor = schema.at(s);
            auto st = stats.find(sensor.sensor_id);
            if (st == stats.end())
                throw std::invalid_argument("missing stats for " + sensor.sensor_id);
            encode_sensor_bits(sensor, buckets[s][tau], st->second, iv.bits,
                               sensor.bit_offset);
        }
        out.push_back(std::move(iv));
    }
    return out;
}

std::vector<SequenceWindow> windows_from_intervals(const std::vector<IntervalVector>& intervals,
                                                   int bit_dim) {
    std::vector<SequenceWindow> out;
    int n = static_cast<int>(intervals.size());
    if (n < kSeqLen) return out;
    out.reserve(n - kSeqLen + 1);
    for (int start = 0; start + kSeqLen <= n; ++start) {
        SequenceWindow w;
        w.start_tau = intervals[start].tau;
        w.cols = bit_dim;
        w.bits.reserve(kSeqLen * bit_dim);
        for (int r = 0; r < kSeqLen; ++r)
            w.bits.insert(w.bits.end(), intervals[start + r].bits.begin(),
                          intervals[start + r].bits.end());
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<SequenceWindow> encode_stream(const Trace& trace, const StatsMap& stats,
                                          const HomeSchema& schema) {
    return windows_from_intervals(encode_intervals(trace, stats, schema),
                                  schema.total_bits());
}

double coactivation_gap(const Trace& trace, const HomeSchema& schema,
                        const std::vector<SensorPair>& correlated,
                        const std::vector<SensorPair>& uncorrelated, int window_len) {
    if (window_len < 1)
        throw std::invalid_argument("window length must be >= 1");
    if (correlated.empty() || uncorrelated.empty())
        throw std::invalid_argument("pair lists must be non-empty");

    int n = interval_count(trace);
    if (n < window_len) return 0.0;

    // active(s, tau) = sensor emitted at least once in interval tau
    std::vector<std::vector<uint8_t>> active(schema.sensor_count(),
                                             std::vector<uint8_t>(n, 0));
    for (const auto& e : trace.events) {
        int tau = static_cast<int>(e.timestamp / kIntervalSec);
        if (tau < n && schema.contains(e.sensor_id))
            active[schema.index_of(e.sensor_id)][tau] = 1;
    }

    auto pair_prob = [&](const SensorPair& p) {
        const auto& a = active[schema.index_of(p.first)];
        const auto& b = active[schema.index_of(p.second)];
        int windows = n - window_len + 1;
        int hits = 0;
        for (int start = 0; start < windows; ++start) {
            bool a_on = false, b_on = false;
            for (int i = 0; i < window_len && !(a_on && b_on); ++i) {
                a_on = a_on || a[start + i];
                b_on = b_on || b[start + i];
            }
            if (a_on && b_on) ++hits;
        }
        return static_cast<double>(hits) / windows;
    };

    double corr = 0.0, uncorr = 0.0;
    for (const auto& p : correlated) corr += pair_prob(p);
    for (const auto& p : uncorrelated) uncorr += pair_prob(p);
    return corr / correlated.size() - uncorr / uncorrelated.size();
}

std::string stats_to_json(const StatsMap& stats) {
    nlohmann::json j;
    for (const auto& [id, st] : stats) {
        j[id] = {{"p25", st.p25},
                 {"p75", st.p75},
                 {"sigma_delta", st.sigma_delta},
                 {"med_delta", st.med_delta}};
    }
    return j.dump(2);
}

StatsMap stats_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    StatsMap stats;
    for (auto it = j.begin(); it != j.end(); ++it) {
        ChannelStats st;
        st.p25 = it.value()["p25"].get<double>();
        st.p75 = it.value()["p75"].get<double>();
        st.sigma_delta = it.value()["sigma_delta"].get<double>();
        st.med_delta = it.value()["med_delta"].get<double>();
        stats[it.key()] = st;
    }
    return stats;
}

} // namespace tureis
