#include "tureis/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tureis {

namespace {

double bce(double p, double y) {
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

Mat window_to_mat(const std::vector<IntervalVector>& buf, int bit_dim) {
    Mat m(kSeqLen, bit_dim);
    for (int r = 0; r < kSeqLen; ++r)
        for (int c = 0; c < bit_dim; ++c)
            m(r, c) = buf[r].bits[c];
    return m;
}

} // namespace

bool IsolationSet::contains(const std::string& id) const {
    for (const auto& [sid, tau] : flagged)
        if (sid == id) return true;
    return false;
}

void IsolationSet::add(const std::string& id, int tau) {
    if (!contains(id)) flagged.emplace_back(id, tau);
}

double sensor_residual(const Mat& logits, const Mat& observed_bits,
                       const SensorSchema& sensor) {
    double sum = 0.0;
    int n = 0;
    for (int r = 0; r < logits.rows; ++r)
        for (int c = sensor.bit_offset; c < sensor.bit_offset + sensor.bit_width; ++c) {
            double p = 1.0 / (1.0 + std::exp(-logits(r, c)));
            sum += bce(p, observed_bits(r, c));
            ++n;
        }
    return sum / n;
}

double ewma_alpha_from_halflife(int L) {
    if (L < 1) throw std::invalid_argument("half-life must be >= 1");
    return 1.0 - std::pow(2.0, -1.0 / L);
}

void ewma_update(ResidualState& state, const std::string& sensor_id, double r) {
    if (!std::isfinite(r)) throw std::invalid_argument("non-finite residual");
    auto it = state.r_hat.find(sensor_id);
    if (it == state.r_hat.end())
        state.r_hat[sensor_id] = r;
    else
        it->second = state.alpha * r + (1.0 - state.alpha) * it->second;
}

Baselines calibrate_baselines(const ModelParams& params,
                              const std::vector<SequenceWindow>& clean_validation_windows,
                              const HomeSchema& schema) {
    if (clean_validation_windows.empty())
        throw std::invalid_argument("empty validation stream");
    Baselines b;
    for (const auto& s : schema.sensors()) b.theta[s.sensor_id] = 0.0;
    for (const auto& w : clean_validation_windows) {
        Mat input(kSeqLen, schema.total_bits());
        for (std::size_t i = 0; i < w.bits.size(); ++i) input.a[i] = w.bits[i];
        Mat logits = forward(params, input, nullptr);
        for (const auto& s : schema.sensors()) {
            double r = sensor_residual(logits, input, s);
            b.theta[s.sensor_id] = std::max(b.theta[s.sensor_id], r);
        }
    }
    return b;
}

StreamRunner::StreamRunner(const ModelParams& params, const StatsMap& stats,
                           const Baselines& baselines, const HomeSchema& schema)
    : params_(params), stats_(stats), baselines_(baselines), schema_(schema) {
    state_.alpha = ewma_alpha_from_halflife(kSeqLen);
}

std::vector<Verdict> StreamRunner::step(const IntervalVector& interval) {
    buffer_.push_back(interval);
    if (buffer_.size() > static_cast<std::size_t>(kSeqLen))
        buffer_.erase(buffer_.begin());
    std::vector<Verdict> out;
    if (buffer_.size() < static_cast<std::size_t>(kSeqLen)) return out;  // warm-up

    Mat observed = window_to_mat(buffer_, schema_.total_bits());
    Mat input = observed;
    MaskSet mask;
    for (const auto& [sid, tau] : isolation_.flagged)
        mask.insert(schema_.index_of(sid));
    apply_mask_inplace(input, mask, params_, schema_);

    Mat logits = forward(params_, input, nullptr);
    int tau = interval.tau;
    for (const auto& s : schema_.sensors()) {
        if (isolation_.contains(s.sensor_id)) continue;
        double r = sensor_residual(logits, observed, s);
        ewma_update(state_, s.sensor_id, r);
        double theta = baselines_.theta.at(s.sensor_id);
        double rh = state_.r_hat.at(s.sensor_id);
        if (rh > theta) {
            Verdict v;
            v.sensor_id = s.sensor_id;
            v.tau = tau;
            v.flag_time_s = (tau + 1) * kIntervalSec;
            v.r_hat_at_flag = rh;
            v.theta = theta;
            out.push_back(v);
        }
    }
    // isolation takes effect from the next window
    for (const auto& v : out) isolation_.add(v.sensor_id, v.tau);
    return out;
}

VerdictLog run_stream(const ModelParams& params, const StatsMap& stats,
                      const Baselines& baselines, const HomeSchema& schema,
                      const Trace& trace) {
    VerdictLog log;
    StreamRunner runner(params, stats, baselines, schema);
    for (const auto& iv : encode_intervals(trace, stats, schema)) {
        auto verdicts = runner.step(iv);
        log.verdicts.insert(log.verdicts.end(), verdicts.begin(), verdicts.end());
    }
    log.final_isolation = runner.isolation();
    return log;
}

std::string baselines_to_json(const Baselines& b) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : b.theta) j[k] = v;
    return j.dump(2);
}

Baselines baselines_from_json(const std::string& text) {
    Baselines b;
    // items() keeps a reference into the document, so it must outlive the loop
    nlohmann::json j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.items()) b.theta[k] = v.get<double>();
    return b;
}

std::string verdicts_csv_header() {
    return "segment_id,sensor_id,flag_interval,flag_time_s,r_hat,theta\n";
}

std::string verdicts_to_csv_rows(const std::string& segment_id, const VerdictLog& log) {
    std::ostringstream os;
    for (const auto& v : log.verdicts)
        os << segment_id << ',' << v.sensor_id << ',' << v.tau << ',' << v.flag_time_s
           << ',' << v.r_hat_at_flag << ',' << v.theta << '\n';
    return os.str();
}

} // namespace tureis
