#pragma once

#include "fedmint/domain.hpp"

namespace fedmint {

/// Earnings of a matched device, split into its components.
/// Invariant: total == (operational + traffic) * penalty_factor.
struct RewardBreakdown {
    double operational = 0.0;
    double traffic = 0.0;
    double penalty_factor = 1.0;
    double total = 0.0;
};

/// CPU and RAM earnings: cpu * price_cpu + ram * price_ram.
double operational_earnings(double cpu_promised, double ram_promised, double price_cpu,
                            double price_ram);

/// Bandwidth earnings discounted by the scaled link latency.
double traffic_earnings(double band_promised, double price_band, double scaled_latency);

/// Population standard deviation of the pair {device, global}, i.e. half the gap.
double accuracy_gap_std(AccuracyFraction acc_device, AccuracyFraction acc_global);

RewardBreakdown total_reward(double operational, double traffic, AccuracyFraction acc_device,
                             AccuracyFraction acc_global);

/// Convenience: the full reward a device would earn from a server given the
/// link's scaled latency.
RewardBreakdown device_reward(const DeviceProfile& device, const ServerProfile& server,
                              double scaled_latency, AccuracyFraction acc_device,
                              AccuracyFraction acc_global);

}  // namespace fedmint
