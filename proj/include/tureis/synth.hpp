#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "tureis/trace.hpp"

namespace tureis {

// Desk-scale multi-resident home simulator. Residents follow independent
// Markov schedules over rooms; an occupied room's binary sensors emit ON/OFF
// pairs as a Poisson process; numeric channels tick every 15 s as a daily
// sinusoid plus AR(1) noise.
struct SynthConfig {
    int n_rooms = 4;
    int binary_per_room = 2;
    int numeric_channels = 2;
    int n_residents = 2;
    double duration_hours = 24.0;
    uint64_t seed = 0;

    // generator shape (defaults are fixed but overridable)
    double dwell_mean_min = 20.0;       // exponential room dwell time
    double pair_rate_per_min = 2.0;     // ON/OFF pair arrivals while occupied
    double ar_coeff = 0.9;              // numeric AR(1) coefficient
    double noise_sigma = 0.1;           // numeric AR(1) innovation sigma
    double sinusoid_amplitude = 5.0;    // daily sinusoid amplitude
    double numeric_base = 20.0;         // numeric channel mean level
    double numeric_period_s = 15.0;     // numeric reading cadence
    // Optional deterministic reading micro-pattern (+step on every other tick).
    // 0 disables it; nonzero gives numeric channels a repeatable step texture
    // whose volatility statistics are constant on clean data.
    double sawtooth_step = 0.0;
};

struct OccupancySpan {
    int resident;
    int room;
    double t_start;
    double t_end;
};

using GroundTruthActivityLog = std::vector<OccupancySpan>;

struct SyntheticHome {
    Trace trace;
    HomeSchema schema;
    GroundTruthActivityLog activity;
    std::vector<std::vector<std::string>> room_sensors;  // binary ids per room
};

SyntheticHome generate_synthetic_trace(const SynthConfig& config);

} // namespace tureis
