#include "tureis/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "tureis/rng.hpp"

namespace tureis {

SyntheticHome generate_synthetic_trace(const SynthConfig& config) {
    if (config.n_rooms < 1 || config.binary_per_room < 1 || config.n_residents < 1)
        throw std::invalid_argument("synthetic config counts must be >= 1");
    if (config.duration_hours < 1.0)
        throw std::invalid_argument("synthetic duration must be >= 1 hour");

    const double duration = config.duration_hours * 3600.0;
    SyntheticHome home;

    std::vector<std::string> binary_ids, numeric_ids;
    home.room_sensors.resize(config.n_rooms);
    for (int r = 0; r < config.n_rooms; ++r) {
        for (int j = 0; j < config.binary_per_room; ++j) {
            std::string id = "room" + std::to_string(r) + "_b" + std::to_string(j);
            binary_ids.push_back(id);
            home.room_sensors[r].push_back(id);
        }
    }
    for (int c = 0; c < config.numeric_channels; ++c)
        numeric_ids.push_back("num" + std::to_string(c));
    home.schema = HomeSchema::build(binary_ids, numeric_ids);

    Rng rng(config.seed);

    // Resident schedules: exponential dwell, uniform jump to a different room.
    for (int res = 0; res < config.n_residents; ++res) {
        Rng r = rng.fork(1000 + res);
        double t = 0.0;
        int room = static_cast<int>(r.uniform_int(config.n_rooms));
        while (t < duration) {
            double dwell = r.exponential(config.dwell_mean_min * 60.0);
            double end = std::min(t + dwell, duration);
            home.activity.push_back({res, room, t, end});
            t = end;
            if (config.n_rooms > 1) {
                int next = static_cast<int>(r.uniform_int(config.n_rooms - 1));
                room = next >= room ? next + 1 : next;
            }
        }
    }

    // Binary emissions: per occupancy span, motion events arrive as a Poisson
    // process and every sensor in the room responds to each event with an
    // ON/OFF pair, so co-located sensors fire in the same minutes.
    for (std::size_t span_i = 0; span_i < home.activity.size(); ++span_i) {
        const auto& span = home.activity[span_i];
        Rng r = rng.fork(2000 + span_i);
        double t = span.t_start;
        while (true) {
            t += r.exponential(60.0 / config.pair_rate_per_min);
            if (t >= span.t_end) break;
            for (const auto& id : home.room_sensors[span.room]) {
                // a pair never straddles the one-minute grid, so it adds an
                // even event count to exactly one interval; events landing
                // right at the grid edge are dropped rather than inverted
                double boundary = (std::floor(t / 60.0) + 1.0) * 60.0;
                double off_t = std::min(t + r.uniform(1.0, 8.0), boundary - 1e-3);
                if (off_t <= t) continue;
                home.trace.events.push_back({t, id, 1.0});
                if (off_t < duration)
                    home.trace.events.push_back({off_t, id, 0.0});
            }
        }
    }

    // Numeric channels: one reading per cadence tick, daily sinusoid + AR(1).
    for (int c = 0; c < config.numeric_channels; ++c) {
        Rng r = rng.fork(3000 + c);
        double ar = 0.0;
        const std::string& id = numeric_ids[c];
        long tick = 0;
        for (double t = 0.0; t < duration; t += config.numeric_period_s, ++tick) {
            ar = config.ar_coeff * ar + r.normal(0.0, config.noise_sigma);
            double v = config.numeric_base +
                       config.sinusoid_amplitude * std::sin(2.0 * M_PI * t / 86400.0) +
                       config.sawtooth_step * static_cast<double>(tick % 2) + ar;
            home.trace.events.push_back({t, id, v});
        }
    }

    home.trace.sort_events();
    home.trace.duration = duration;
    return home;
}

} // namespace tureis
