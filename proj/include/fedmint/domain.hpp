#pragma once

#include <compare>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fedmint {

/// Raised when a value object is built from inconsistent fields. The message
/// always starts with the offending field name.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numeric argument falls outside its admissible interval.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

using DeviceId = std::string;
using ServerId = std::string;

/// Accuracy in [0, 1]. All in-memory accuracies use this unit; only the
/// bootstrap interaction dataset stores percent.
class AccuracyFraction {
public:
    constexpr AccuracyFraction() = default;
    explicit AccuracyFraction(double value);

    static AccuracyFraction from_percent(double percent);

    [[nodiscard]] constexpr double value() const noexcept { return value_; }
    [[nodiscard]] constexpr double percent() const noexcept { return value_ * 100.0; }

    auto operator<=>(const AccuracyFraction&) const = default;

private:
    double value_ = 0.0;
};

/// Categorical features shared by devices and interaction records.
struct DeviceFeatures {
    std::string provider;
    std::string region;
    std::string device_type;

    auto operator<=>(const DeviceFeatures&) const = default;
};

struct AccuracyObservation {
    int round = 0;
    AccuracyFraction accuracy;

    bool operator==(const AccuracyObservation&) const = default;
};

struct DeviceProfile {
    DeviceId device_id;
    DeviceFeatures features;
    double cpu_capacity = 0.0;        // MIPS
    double ram_capacity = 0.0;        // MB
    double bandwidth_capacity = 0.0;  // Mbps
    double cpu_promised = 0.0;
    double ram_promised = 0.0;
    double bandwidth_promised = 0.0;
    std::set<int> data_labels;
    int data_size = 0;
    int test_data_size = 0;
    std::set<std::string> available_data_types;
    std::vector<AccuracyObservation> accuracy_history;

    [[nodiscard]] bool is_newcomer() const noexcept { return accuracy_history.empty(); }
    [[nodiscard]] const AccuracyObservation* latest_accuracy() const noexcept {
        return accuracy_history.empty() ? nullptr : &accuracy_history.back();
    }
    [[nodiscard]] bool offers(const std::string& data_type) const {
        return available_data_types.contains(data_type);
    }

    bool operator==(const DeviceProfile&) const = default;
};

/// One row of a server's interaction dataset. Accuracy is in percent.
struct InteractionRecord {
    DeviceFeatures features;
    double accuracy = 0.0;

    bool operator==(const InteractionRecord&) const = default;
};

struct ServerProfile {
    ServerId server_id;
    std::string requested_data_type;
    int capacity = 1;
    int selected_count = 0;
    double price_cpu = 0.0;   // money per MIPS
    double price_ram = 0.0;   // money per MB
    double price_band = 0.0;  // money per Mbps
    std::vector<InteractionRecord> interaction_dataset;
    long long calls_budget = 0;
    long long cumulative_contributions = 0;

    bool operator==(const ServerProfile&) const = default;
};

/// Raw per-link latency in seconds plus the bounds used to scale it.
class LatencyMatrix {
public:
    LatencyMatrix(double min_latency, double max_latency);

    void set(const ServerId& server, const DeviceId& device, double seconds);
    [[nodiscard]] double raw(const ServerId& server, const DeviceId& device) const;
    [[nodiscard]] double scaled(const ServerId& server, const DeviceId& device) const;
    [[nodiscard]] bool contains(const ServerId& server, const DeviceId& device) const;

    [[nodiscard]] double min_latency() const noexcept { return min_; }
    [[nodiscard]] double max_latency() const noexcept { return max_; }
    [[nodiscard]] std::size_t size() const noexcept { return links_.size(); }

private:
    double min_;
    double max_;
    std::map<std::pair<ServerId, DeviceId>, double> links_;
};

/// Validates every DeviceProfile invariant and returns the profile unchanged.
/// Throws ValidationError naming the first offending field.
DeviceProfile new_device(DeviceProfile raw);

/// Same for servers: capacity >= 1, selected_count <= capacity, prices > 0,
/// interaction accuracies within [0, 100].
ServerProfile new_server(ServerProfile raw);

InteractionRecord new_interaction(DeviceFeatures features, double accuracy_percent);

/// Min-max scaling of a raw latency into [0, 1].
double scale_latency(double raw, double min_latency, double max_latency);

}  // namespace fedmint
