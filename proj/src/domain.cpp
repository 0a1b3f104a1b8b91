#include "fedmint/domain.hpp"

#include <cmath>

namespace fedmint {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw ValidationError(message);
    }
}

void check_resource(const char* name, double promised, double capacity) {
    const std::string field = std::string(name) + "_promised";
    require(std::isfinite(promised) && promised > 0.0, field + " must be positive");
    require(std::isfinite(capacity), std::string(name) + "_capacity must be finite");
    require(promised <= capacity, field + " exceeds capacity");
}

}  // namespace

AccuracyFraction::AccuracyFraction(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw RangeError("accuracy fraction outside [0, 1]: " + std::to_string(value));
    }
}

AccuracyFraction AccuracyFraction::from_percent(double percent) {
    if (!(percent >= 0.0 && percent <= 100.0)) {
        throw RangeError("accuracy percent outside [0, 100]: " + std::to_string(percent));
    }
    return AccuracyFraction(percent / 100.0);
}

LatencyMatrix::LatencyMatrix(double min_latency, double max_latency)
    : min_(min_latency), max_(max_latency) {
    if (!(min_latency < max_latency)) {
        throw ValidationError("min_latency must be below max_latency");
    }
}

void LatencyMatrix::set(const ServerId& server, const DeviceId& device, double seconds) {
    if (!(seconds >= min_ && seconds <= max_)) {
        throw RangeError("latency for (" + server + ", " + device + ") outside scaling bounds");
    }
    links_[{server, device}] = seconds;
}

double LatencyMatrix::raw(const ServerId& server, const DeviceId& device) const {
    auto it = links_.find({server, device});
    if (it == links_.end()) {
        throw std::out_of_range("no latency recorded for (" + server + ", " + device + ")");
    }
    return it->second;
}

double LatencyMatrix::scaled(const ServerId& server, const DeviceId& device) const {
    return scale_latency(raw(server, device), min_, max_);
}

bool LatencyMatrix::contains(const ServerId& server, const DeviceId& device) const {
    return links_.contains({server, device});
}

DeviceProfile new_device(DeviceProfile raw) {
    require(!raw.device_id.empty(), "device_id must not be empty");
    check_resource("cpu", raw.cpu_promised, raw.cpu_capacity);
    check_resource("ram", raw.ram_promised, raw.ram_capacity);
    check_resource("bandwidth", raw.bandwidth_promised, raw.bandwidth_capacity);
    require(!raw.data_labels.empty(), "data_labels must not be empty");
    require(raw.data_size > 0, "data_size must be positive");
    require(raw.test_data_size > 0, "test_data_size must be positive");
    require(raw.test_data_size <= raw.data_size, "test_data_size exceeds data_size");
    int last_round = -1;
    for (const auto& obs : raw.accuracy_history) {
        require(obs.round > last_round, "accuracy_history rounds must be strictly increasing");
        last_round = obs.round;
    }
    return raw;
}

ServerProfile new_server(ServerProfile raw) {
    require(!raw.server_id.empty(), "server_id must not be empty");
    require(raw.capacity >= 1, "capacity must be at least 1");
    require(raw.selected_count >= 0 && raw.selected_count <= raw.capacity,
            "selected_count exceeds capacity");
    require(raw.price_cpu > 0.0, "price_cpu must be positive");
    require(raw.price_ram > 0.0, "price_ram must be positive");
    require(raw.price_band > 0.0, "price_band must be positive");
    require(raw.calls_budget >= 0, "calls_budget must be nonnegative");
    require(raw.cumulative_contributions >= 0, "cumulative_contributions must be nonnegative");
    for (const auto& rec : raw.interaction_dataset) {
        require(rec.accuracy >= 0.0 && rec.accuracy <= 100.0,
                "interaction_dataset accuracy outside [0, 100]");
    }
    return raw;
}

InteractionRecord new_interaction(DeviceFeatures features, double accuracy_percent) {
    require(accuracy_percent >= 0.0 && accuracy_percent <= 100.0,
            "accuracy outside [0, 100]");
    return {std::move(features), accuracy_percent};
}

double scale_latency(double raw, double min_latency, double max_latency) {
    if (!(min_latency < max_latency)) {
        throw ValidationError("min_latency must be below max_latency");
    }
    if (!(raw >= min_latency && raw <= max_latency)) {
        throw RangeError("latency " + std::to_string(raw) + " outside [" +
                         std::to_string(min_latency) + ", " + std::to_string(max_latency) + "]");
    }
    return (raw - min_latency) / (max_latency - min_latency);
}

}  // namespace fedmint
