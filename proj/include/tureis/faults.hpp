#pragma once
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "tureis/trace.hpp"

namespace tureis {

enum class FaultKind { Outlier, Spike, StuckAt, HighNoise, Drift, FailStop };

const char* fault_kind_name(FaultKind k);
FaultKind fault_kind_from_name(const std::string& name);
constexpr int kFaultKindCount = 6;

// Windowed faults default to a 30-minute duration.
constexpr double kDefaultFaultDurationSec = 30.0 * 60.0;

struct FaultSpec {
    FaultKind kind = FaultKind::Outlier;
    std::string sensor_id;
    double start_tau = 0.0;        // seconds
    double duration_delta = 0.0;   // seconds; ignored for Outlier/FailStop
    // Kind-specific magnitude. NaN = derive from the channel profile at
    // injection time (outlier offset, spike step, stuck value, noise sigma,
    // drift slope per second).
    double param = std::numeric_limits<double>::quiet_NaN();
    uint64_t seed = 0;             // drives the stochastic realizations

    bool windowed() const {
        return kind != FaultKind::Outlier && kind != FaultKind::FailStop;
    }
};

// Clean-stream statistics standing in for the "expected range" of a channel.
struct ChannelProfile {
    double mean = 0.0;
    double std = 0.0;
    double event_rate = 0.0;  // events per minute
};

using ProfileMap = std::map<std::string, ChannelProfile>;

struct InjectionRecord {
    FaultSpec spec;
    int segment_id = -1;
    int injected_event_count = 0;
};

ProfileMap profile_channels(const Trace& trace, const HomeSchema& schema);

struct InjectionResult {
    Trace trace;
    int injected_event_count = 0;  // modified + added + removed
};

// Applies one fault to the target sensor's events; all other sensors'
// events are returned bit-identical.
InjectionResult inject(const Trace& trace, const HomeSchema& schema,
                       const FaultSpec& spec, const ChannelProfile& profile);

FaultSpec sample_single_fault(const HomeSchema& schema, double t0, double t1,
                              uint64_t rng_seed);
std::vector<FaultSpec> sample_multi_faults(const HomeSchema& schema, double t0, double t1,
                                           uint64_t rng_seed);

std::string fault_plan_to_json(const std::vector<FaultSpec>& specs);
std::vector<FaultSpec> fault_plan_from_json(const std::string& text);

} // namespace tureis
