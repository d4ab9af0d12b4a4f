#pragma once
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace tureis {

enum class SensorKind { Binary, Numeric };

inline int bit_width_for(SensorKind k) { return k == SensorKind::Binary ? 2 : 4; }

struct SensorSchema {
    std::string sensor_id;
    SensorKind kind = SensorKind::Binary;
    int bit_offset = 0;   // start of this sensor's bit range I_k in the fused vector
    int bit_width = 2;    // 2 for binary, 4 for numeric
};

// Ordered sensor inventory plus the bit layout of the fused feature vector.
// Bit ranges of the sensors tile [0, D) with no gaps or overlaps.
class HomeSchema {
public:
    HomeSchema() = default;

    static HomeSchema build(const std::vector<std::string>& binary_ids,
                            const std::vector<std::string>& numeric_ids);

    const std::vector<SensorSchema>& sensors() const { return sensors_; }
    int total_bits() const { return total_bits_; }  // D
    std::size_t sensor_count() const { return sensors_.size(); }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const SensorSchema& at(const std::string& id) const;
    const SensorSchema& at(std::size_t i) const { return sensors_.at(i); }
    int index_of(const std::string& id) const;

    // Throws if the bit ranges do not tile [0, D) or ids repeat.
    void validate() const;

    std::string to_json() const;
    static HomeSchema from_json(const std::string& text);

private:
    void add(const std::string& id, SensorKind kind);

    std::vector<SensorSchema> sensors_;
    std::unordered_map<std::string, int> index_;
    int total_bits_ = 0;
};

} // namespace tureis
