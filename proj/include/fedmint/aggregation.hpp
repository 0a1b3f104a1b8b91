#pragma once

#include <span>
#include <vector>

#include "fedmint/domain.hpp"

namespace fedmint {

struct CohortEntry {
    DeviceId device_id;
    AccuracyFraction local_accuracy;
    int test_data_size = 0;
};

struct CohortReport {
    std::vector<CohortEntry> participants;
    AccuracyFraction global_accuracy;
};

double weighted_accuracy(AccuracyFraction acc, int test_size);

/// Test-size weighted mean of participant accuracies. Throws ValidationError
/// ("no participants") on an empty cohort.
AccuracyFraction global_accuracy(std::span<const CohortEntry> cohort);

CohortReport make_cohort_report(std::vector<CohortEntry> participants);

/// Held-out test size for a shard: ceil(fraction * data_size), at least 1.
int test_split_size(int data_size, double fraction);

}  // namespace fedmint
