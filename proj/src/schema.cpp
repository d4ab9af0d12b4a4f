#include "tureis/schema.hpp"

#include <algorithm>

#include "json.hpp"

namespace tureis {

void HomeSchema::add(const std::string& id, SensorKind kind) {
    if (index_.count(id))
        throw std::invalid_argument("duplicate sensor id: " + id);
    SensorSchema s;
    s.sensor_id = id;
    s.kind = kind;
    s.bit_width = bit_width_for(kind);
    s.bit_offset = total_bits_;
    index_[id] = static_cast<int>(sensors_.size());
    sensors_.push_back(std::move(s));
    total_bits_ += bit_width_for(kind);
}

HomeSchema HomeSchema::build(const std::vector<std::string>& binary_ids,
                             const std::vector<std::string>& numeric_ids) {
    HomeSchema h;
    for (const auto& id : binary_ids) h.add(id, SensorKind::Binary);
    for (const auto& id : numeric_ids) h.add(id, SensorKind::Numeric);
    h.validate();
    return h;
}

const SensorSchema& HomeSchema::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("unknown sensor id: " + id);
    return sensors_[it->second];
}

int HomeSchema::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("unknown sensor id: " + id);
    return it->second;
}

void HomeSchema::validate() const {
    int cursor = 0;
    for (const auto& s : sensors_) {
        if (s.bit_width != bit_width_for(s.kind))
            throw std::logic_error("bit width inconsistent with kind for " + s.sensor_id);
        if (s.bit_offset != cursor)
            throw std::logic_error("bit ranges do not tile [0, D) at " + s.sensor_id);
        cursor += s.bit_width;
    }
    if (cursor != total_bits_)
        throw std::logic_error("total bit width mismatch");
    if (index_.size() != sensors_.size())
        throw std::logic_error("sensor ids are not unique");
}

std::string HomeSchema::to_json() const {
    nlohmann::json j;
    j["binary"] = nlohmann::json::array();
    j["numeric"] = nlohmann::json::array();
    for (const auto& s : sensors_) {
        if (s.kind == SensorKind::Binary)
            j["binary"].push_back(s.sensor_id);
        else
            j["numeric"].push_back(s.sensor_id);
    }
    return j.dump(2);
}

HomeSchema HomeSchema::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<std::string> bin, num;
    for (const auto& v : j.value("binary", nlohmann::json::array()))
        bin.push_back(v.get<std::string>());
    for (const auto& v : j.value("numeric", nlohmann::json::array()))
        num.push_back(v.get<std::string>());
    return build(bin, num);
}

} // namespace tureis
