#pragma once
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tureis/schema.hpp"

namespace tureis {

struct SensorEvent {
    double timestamp = 0.0;  // seconds since stream epoch
    std::string sensor_id;
    double value = 0.0;      // binary sensors: 1.0 = ON, 0.0 = OFF
};

struct Trace {
    std::vector<SensorEvent> events;  // sorted by timestamp, stable for ties
    double duration = 0.0;            // seconds; all timestamps < duration

    void sort_events();       // stable sort by timestamp
    void validate() const;    // ordering + duration invariants
};

struct ParsedTrace {
    Trace trace;
    HomeSchema schema;
};

// Parses a CASAS-style event log: one event per line,
//   <ISO date> <time-of-day> <sensor id> <value token> [annotations...]
// "#"-prefixed lines are comments. ON/OPEN/PRESENT map to 1.0,
// OFF/CLOSE/CLOSED/ABSENT map to 0.0, anything else must parse as a real.
// Timestamps are re-based so the earliest event is t = 0. When no schema is
// supplied one is inferred: a sensor is numeric iff any of its values was a
// non-{0,1} real.
ParsedTrace parse_trace(std::istream& in, const HomeSchema* schema = nullptr);
ParsedTrace parse_trace(const std::string& text, const HomeSchema* schema = nullptr);

// Inverse of parse_trace up to timestamp re-basing.
std::string serialize_trace(const Trace& trace);

// Events in [t0, t1) with timestamps re-based to t0.
Trace slice_trace(const Trace& trace, double t0, double t1);

struct ParseError : std::runtime_error {
    int line_no;
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_no(line) {}
};

} // namespace tureis
