#include "tureis/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

namespace tureis {
namespace {

// Howard Hinnant's days-from-civil; avoids timezone machinery entirely.
long long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    long long era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = static_cast<unsigned>(y - era * 400);
    unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    long long era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = static_cast<unsigned>(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int yr = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yr + (m <= 2);
}

bool parse_date(const std::string& tok, int& y, int& m, int& d) {
    return std::sscanf(tok.c_str(), "%d-%d-%d", &y, &m, &d) == 3;
}

bool parse_time_of_day(const std::string& tok, double& seconds) {
    int h = 0, mi = 0;
    double s = 0.0;
    if (std::sscanf(tok.c_str(), "%d:%d:%lf", &h, &mi, &s) != 3) return false;
    seconds = h * 3600.0 + mi * 60.0 + s;
    return true;
}

bool map_value_token(const std::string& tok, double& value, bool& was_binary_token) {
    if (tok == "ON" || tok == "OPEN" || tok == "PRESENT") {
        value = 1.0;
        was_binary_token = true;
        return true;
    }
    if (tok == "OFF" || tok == "CLOSE" || tok == "CLOSED" || tok == "ABSENT") {
        value = 0.0;
        was_binary_token = true;
        return true;
    }
    char* end = nullptr;
    value = std::strtod(tok.c_str(), &end);
    was_binary_token = false;
    return end && *end == '\0' && end != tok.c_str();
}

double round_up_to_minute(double t) {
    double m = std::ceil(t / 60.0) * 60.0;
    return m > t ? m : m + 60.0;
}

} // namespace

void Trace::sort_events() {
    std::stable_sort(events.begin(), events.end(),
                     [](const SensorEvent& a, const SensorEvent& b) {
                         return a.timestamp < b.timestamp;
                     });
}

void Trace::validate() const {
    double prev = -1.0;
    for (const auto& e : events) {
        if (e.timestamp < 0.0)
            throw std::logic_error("negative timestamp");
        if (e.timestamp < prev)
            throw std::logic_error("events not sorted");
        if (e.timestamp >= duration)
            throw std::logic_error("timestamp beyond trace duration");
        prev = e.timestamp;
    }
}

ParsedTrace parse_trace(std::istream& in, const HomeSchema* schema) {
    struct RawEvent {
        double abs_time;
        std::string id;
        double value;
    };
    std::vector<RawEvent> raw;
    // tracks whether a sensor ever produced a non-{0,1} real (=> numeric)
    std::vector<std::string> seen_order;
    std::set<std::string> seen;
    std::set<std::string> numeric_ids;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string date_tok, time_tok, id_tok, value_tok;
        if (!(ls >> date_tok)) continue;  // blank line
        if (date_tok[0] == '#') continue;
        if (!(ls >> time_tok >> id_tok >> value_tok))
            throw ParseError(line_no, "expected <date> <time> <sensor> <value>");
        int y, m, d;
        if (!parse_date(date_tok, y, m, d))
            throw ParseError(line_no, "bad date: " + date_tok);
        double tod;
        if (!parse_time_of_day(time_tok, tod))
            throw ParseError(line_no, "bad time: " + time_tok);
        double value;
        bool binary_token;
        if (!map_value_token(value_tok, value, binary_token))
            throw ParseError(line_no, "unparsable value token: " + value_tok);
        if (schema && !schema->contains(id_tok))
            throw ParseError(line_no, "unknown sensor: " + id_tok);
        if (!seen.count(id_tok)) {
            seen.insert(id_tok);
            seen_order.push_back(id_tok);
        }
        if (!binary_token && value != 0.0 && value != 1.0)
            numeric_ids.insert(id_tok);
        raw.push_back({days_from_civil(y, m, d) * 86400.0 + tod, id_tok, value});
    }

    ParsedTrace out;
    if (schema) {
        out.schema = *schema;
    } else {
        std::vector<std::string> bin, num;
        for (const auto& id : seen_order)
            (numeric_ids.count(id) ? num : bin).push_back(id);
        out.schema = HomeSchema::build(bin, num);
    }

    if (raw.empty()) return out;

    double epoch = raw.front().abs_time;
    for (const auto& e : raw) epoch = std::min(epoch, e.abs_time);
    for (const auto& e : raw)
        out.trace.events.push_back({e.abs_time - epoch, e.id, e.value});
    out.trace.sort_events();
    out.trace.duration = round_up_to_minute(out.trace.events.back().timestamp);
    return out;
}

ParsedTrace parse_trace(const std::string& text, const HomeSchema* schema) {
    std::istringstream in(text);
    return parse_trace(in, schema);
}

std::string serialize_trace(const Trace& trace) {
    // Arbitrary fixed epoch; parse_trace re-bases anyway.
    const long long epoch_days = days_from_civil(2000, 1, 1);
    std::string out;
    char buf[160];
    for (const auto& e : trace.events) {
        double abs_t = epoch_days * 86400.0 + e.timestamp;
        long long day = static_cast<long long>(std::floor(abs_t / 86400.0));
        double tod = abs_t - day * 86400.0;
        int y;
        unsigned m, d;
        civil_from_days(day, y, m, d);
        int h = static_cast<int>(tod / 3600.0);
        int mi = static_cast<int>((tod - h * 3600.0) / 60.0);
        double s = tod - h * 3600.0 - mi * 60.0;
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%09.6f %s %.9g\n",
                      y, m, d, h, mi, s, e.sensor_id.c_str(), e.value);
        out += buf;
    }
    return out;
}

Trace slice_trace(const Trace& trace, double t0, double t1) {
    Trace out;
    out.duration = t1 - t0;
    for (const auto& e : trace.events) {
        if (e.timestamp < t0) continue;
        if (e.timestamp >= t1) break;
        out.events.push_back({e.timestamp - t0, e.sensor_id, e.value});
    }
    return out;
}

} // namespace tureis
