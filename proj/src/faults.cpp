#include "tureis/faults.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>

#include "json.hpp"
#include "tureis/rng.hpp"

namespace tureis {

const char* fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::Outlier: return "outlier";
        case FaultKind::Spike: return "spike";
        case FaultKind::StuckAt: return "stuck_at";
        case FaultKind::HighNoise: return "high_noise";
        case FaultKind::Drift: return "drift";
        case FaultKind::FailStop: return "fail_stop";
    }
    return "?";
}

FaultKind fault_kind_from_name(const std::string& name) {
    for (int i = 0; i < kFaultKindCount; ++i)
        if (name == fault_kind_name(static_cast<FaultKind>(i)))
            return static_cast<FaultKind>(i);
    throw std::invalid_argument("unknown fault kind: " + name);
}

ProfileMap profile_channels(const Trace& trace, const HomeSchema& schema) {
    if (trace.events.empty())
        throw std::invalid_argument("cannot profile an empty trace");
    ProfileMap out;
    double minutes = trace.duration / 60.0;
    for (const auto& sensor : schema.sensors()) {
        ChannelProfile p;
        double sum = 0.0, sum2 = 0.0;
        int n = 0, on = 0;
        for (const auto& e : trace.events) {
            if (e.sensor_id != sensor.sensor_id) continue;
            ++n;
            sum += e.value;
            sum2 += e.value * e.value;
            if (e.value != 0.0) ++on;
        }
        if (n > 0) {
            if (sensor.kind == SensorKind::Numeric) {
                p.mean = sum / n;
                double var = sum2 / n - p.mean * p.mean;
                p.std = var > 0.0 ? std::sqrt(var) : 0.0;
            } else {
                p.mean = static_cast<double>(on) / n;  // activation fraction
            }
            p.event_rate = minutes > 0.0 ? n / minutes : 0.0;
        }
        out[sensor.sensor_id] = p;
    }
    return out;
}

namespace {

double sigma_floor(double std) { return std > 0.0 ? std : 1.0; }

struct WindowBounds {
    double t0, t1;
};

WindowBounds clip_window(const FaultSpec& spec, double duration) {
    double t0 = spec.start_tau;
    double t1 = spec.kind == FaultKind::FailStop
                    ? duration
                    : spec.start_tau + spec.duration_delta;
    if (t1 > duration) {
        std::cerr << "[tureis] warning: fault window clipped to trace duration\n";
        t1 = duration;
    }
    return {t0, t1};
}

// Inserts spurious binary toggles over [t0, t1) as a Poisson process at
// rate_per_min. intensity(t) in [0,1] optionally thins the process (drift
// ramp). alternate=true emits ON/OFF pairs; otherwise each toggle is a coin
// flip.
int insert_toggles(std::vector<SensorEvent>& added, const std::string& id, Rng& rng,
                   double t0, double t1, double rate_per_min, bool alternate,
                   const std::function<double(double)>& intensity) {
    int count = 0;
    double t = t0;
    bool next_on = true;
    while (true) {
        t += rng.exponential(60.0 / rate_per_min);
        if (t >= t1) break;
        if (intensity && rng.uniform() >= intensity(t)) continue;
        double v = alternate ? (next_on ? 1.0 : 0.0) : (rng.bernoulli(0.5) ? 1.0 : 0.0);
        next_on = !next_on;
        added.push_back({t, id, v});
        ++count;
    }
    return count;
}

} // namespace

InjectionResult inject(const Trace& trace, const HomeSchema& schema,
                       const FaultSpec& spec, const ChannelProfile& profile) {
    const auto& sensor = schema.at(spec.sensor_id);
    Rng rng(spec.seed);
    InjectionResult out;
    out.trace.duration = trace.duration;
    auto [w0, w1] = clip_window(spec, trace.duration);

    std::vector<SensorEvent> added;
    int modified = 0, removed = 0;
    bool numeric = sensor.kind == SensorKind::Numeric;
    double sigma = sigma_floor(profile.std);
    double rate = std::max(profile.event_rate, 1.0);  // injection floor for quiet channels

    // Pre-sample stochastic knobs in a fixed order so the realization is a
    // pure function of spec.seed.
    double outlier_sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    Rng window_rng = rng.fork(1);

    if (numeric) {
        bool spike_up = true;
        int reading_in_window = 0;
        for (const auto& e : trace.events) {
            SensorEvent ev = e;
            if (e.sensor_id == spec.sensor_id) {
                switch (spec.kind) {
                    case FaultKind::Outlier:
                        break;
                    case FaultKind::Spike:
                        if (e.timestamp >= w0 && e.timestamp < w1) {
                            double delta = std::isnan(spec.param) ? 6.0 * sigma : spec.param;
                            ev.value += spike_up ? delta : -delta;
                            spike_up = !spike_up;
                            ++modified;
                        }
                        break;
                    case FaultKind::StuckAt:
                        if (e.timestamp >= w0 && e.timestamp < w1) {
                            ev.value = std::isnan(spec.param)
                                           ? profile.mean + 2.0 * sigma
                                           : spec.param;
                            ++modified;
                        }
                        break;
                    case FaultKind::HighNoise:
                        if (e.timestamp >= w0 && e.timestamp < w1) {
                            double se = std::isnan(spec.param)
                                            ? std::max(6.0 * profile.std, 1.0)
                                            : spec.param;
                            ev.value += window_rng.normal(0.0, se);
                            ++modified;
                        }
                        break;
                    case FaultKind::Drift:
                        if (e.timestamp >= w0 && e.timestamp < w1) {
                            double slope =
                                std::isnan(spec.param)
                                    ? std::max(10.0 * profile.std, 1.0) /
                                          std::max(w1 - w0, 1.0)
                                    : spec.param;
                            ev.value += slope * (e.timestamp - w0);
                            ++modified;
                        }
                        break;
                    case FaultKind::FailStop:
                        if (e.timestamp >= w0) {
                            ++removed;
                            continue;
                        }
                        break;
                }
                (void)reading_in_window;
            }
            out.trace.events.push_back(std::move(ev));
        }
        if (spec.kind == FaultKind::Outlier) {
            double o = std::isnan(spec.param)
                           ? profile.mean + outlier_sign * 6.0 * sigma
                           : spec.param;
            if (spec.start_tau < trace.duration)
                added.push_back({spec.start_tau, spec.sensor_id, o});
        }
    } else {
        // Binary realizations keep each fault's signature in event space:
        // isolated / gradient / flat / variance / trend.
        for (const auto& e : trace.events) {
            if (e.sensor_id == spec.sensor_id) {
                if (spec.kind == FaultKind::FailStop && e.timestamp >= w0) {
                    ++removed;
                    continue;
                }
                if (spec.kind == FaultKind::StuckAt && e.timestamp >= w0 &&
                    e.timestamp < w1) {
                    ++removed;  // state changes suppressed, value held
                    continue;
                }
            }
            out.trace.events.push_back(e);
        }
        switch (spec.kind) {
            case FaultKind::Outlier:
                if (spec.start_tau < trace.duration) {
                    added.push_back({spec.start_tau, spec.sensor_id, 1.0});
                    double off = spec.start_tau + 2.0;
                    if (off < trace.duration)
                        added.push_back({off, spec.sensor_id, 0.0});
                }
                break;
            case FaultKind::Spike: {
                double burst_end = std::min(w0 + 120.0, trace.duration);
                insert_toggles(added, spec.sensor_id, window_rng, w0, burst_end,
                               10.0 * rate, true, nullptr);
                break;
            }
            case FaultKind::HighNoise:
                insert_toggles(added, spec.sensor_id, window_rng, w0, w1, 5.0 * rate,
                               false, nullptr);
                break;
            case FaultKind::Drift: {
                double span = std::max(w1 - w0, 1.0);
                insert_toggles(added, spec.sensor_id, window_rng, w0, w1, 5.0 * rate,
                               true, [&](double t) { return (t - w0) / span; });
                break;
            }
            case FaultKind::StuckAt:
            case FaultKind::FailStop:
                break;
        }
    }

    if (spec.kind == FaultKind::FailStop && removed == 0)
        std::cerr << "[tureis] warning: fail-stop on already-silent sensor is a no-op\n";

    out.trace.events.insert(out.trace.events.end(), added.begin(), added.end());
    out.trace.sort_events();
    out.injected_event_count = modified + removed + static_cast<int>(added.size());
    return out;
}

namespace {

FaultSpec sample_one(const HomeSchema& schema, double t0, double t1, Rng& rng,
                     int sensor_index) {
    FaultSpec spec;
    spec.sensor_id = schema.at(sensor_index).sensor_id;
    spec.kind = static_cast<FaultKind>(rng.uniform_int(kFaultKindCount));
    double delta = std::min(kDefaultFaultDurationSec, t1 - t0);
    spec.duration_delta = spec.windowed() ? delta : 0.0;
    double latest_start = std::max(t1 - delta, t0);
    spec.start_tau = rng.uniform(t0, latest_start);
    spec.seed = rng.next_u64();
    return spec;
}

} // namespace

FaultSpec sample_single_fault(const HomeSchema& schema, double t0, double t1,
                              uint64_t rng_seed) {
    if (t1 <= t0) throw std::invalid_argument("empty sampling window");
    Rng rng(rng_seed);
    int sensor = static_cast<int>(rng.uniform_int(schema.sensor_count()));
    return sample_one(schema, t0, t1, rng, sensor);
}

std::vector<FaultSpec> sample_multi_faults(const HomeSchema& schema, double t0, double t1,
                                           uint64_t rng_seed) {
    if (schema.sensor_count() < 5)
        throw std::invalid_argument("multi-fault sampling needs >= 5 sensors");
    if (t1 <= t0) throw std::invalid_argument("empty sampling window");
    Rng rng(rng_seed);
    int count = std::clamp(rng.poisson(3.0), 1, 5);
    // sample distinct sensors without replacement
    std::vector<int> pool(schema.sensor_count());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    std::vector<FaultSpec> out;
    for (int i = 0; i < count; ++i) {
        std::size_t pick = rng.uniform_int(pool.size());
        int sensor = pool[pick];
        pool.erase(pool.begin() + pick);
        out.push_back(sample_one(schema, t0, t1, rng, sensor));
    }
    return out;
}

std::string fault_plan_to_json(const std::vector<FaultSpec>& specs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : specs) {
        nlohmann::json e = {{"kind", fault_kind_name(s.kind)},
                            {"sensor", s.sensor_id},
                            {"start", s.start_tau},
                            {"delta", s.duration_delta},
                            {"seed", s.seed}};
        if (!std::isnan(s.param)) e["param"] = s.param;
        j.push_back(e);
    }
    return j.dump(2);
}

std::vector<FaultSpec> fault_plan_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<FaultSpec> out;
    for (const auto& e : j) {
        FaultSpec s;
        s.kind = fault_kind_from_name(e.at("kind").get<std::string>());
        s.sensor_id = e.at("sensor").get<std::string>();
        s.start_tau = e.at("start").get<double>();
        s.duration_delta = e.value("delta", 0.0);
        s.seed = e.value("seed", uint64_t{0});
        if (e.contains("param")) s.param = e["param"].get<double>();
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace tureis
