#include "fedmint/economics.hpp"

#include <cmath>
#include <string>

namespace fedmint {

namespace {

void nonnegative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string(name) + " must be nonnegative");
    }
}

}  // namespace

double operational_earnings(double cpu_promised, double ram_promised, double price_cpu,
                            double price_ram) {
    nonnegative(cpu_promised, "cpu_promised");
    nonnegative(ram_promised, "ram_promised");
    nonnegative(price_cpu, "price_cpu");
    nonnegative(price_ram, "price_ram");
    return cpu_promised * price_cpu + ram_promised * price_ram;
}

double traffic_earnings(double band_promised, double price_band, double scaled_latency) {
    nonnegative(band_promised, "band_promised");
    nonnegative(price_band, "price_band");
    if (!(scaled_latency >= 0.0 && scaled_latency <= 1.0)) {
        throw RangeError("scaled_latency outside [0, 1]");
    }
    return (band_promised * price_band) * (1.0 - scaled_latency);
}

double accuracy_gap_std(AccuracyFraction acc_device, AccuracyFraction acc_global) {
    return std::fabs(acc_device.value() - acc_global.value()) / 2.0;
}

RewardBreakdown total_reward(double operational, double traffic, AccuracyFraction acc_device,
                             AccuracyFraction acc_global) {
    nonnegative(operational, "operational");
    nonnegative(traffic, "traffic");
    RewardBreakdown r;
    r.operational = operational;
    r.traffic = traffic;
    r.penalty_factor = 1.0 - accuracy_gap_std(acc_device, acc_global);
    r.total = (operational + traffic) * r.penalty_factor;
    return r;
}

RewardBreakdown device_reward(const DeviceProfile& device, const ServerProfile& server,
                              double scaled_latency, AccuracyFraction acc_device,
                              AccuracyFraction acc_global) {
    const double op = operational_earnings(device.cpu_promised, device.ram_promised,
                                           server.price_cpu, server.price_ram);
    const double tr = traffic_earnings(device.bandwidth_promised, server.price_band, scaled_latency);
    return total_reward(op, tr, acc_device, acc_global);
}

}  // namespace fedmint
