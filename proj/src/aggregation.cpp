#include "fedmint/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace fedmint {

double weighted_accuracy(AccuracyFraction acc, int test_size) {
    if (test_size <= 0) {
        throw ValidationError("test_data_size must be positive");
    }
    return acc.value() * static_cast<double>(test_size);
}

AccuracyFraction global_accuracy(std::span<const CohortEntry> cohort) {
    if (cohort.empty()) {
        throw ValidationError("no participants");
    }
    double weighted = 0.0;
    double total = 0.0;
    double lo = 1.0;
    double hi = 0.0;
    for (const auto& p : cohort) {
        weighted += weighted_accuracy(p.local_accuracy, p.test_data_size);
        total += static_cast<double>(p.test_data_size);
        lo = std::min(lo, p.local_accuracy.value());
        hi = std::max(hi, p.local_accuracy.value());
    }
    // Result stays within the cohort's own range.
    return AccuracyFraction(std::clamp(weighted / total, lo, hi));
}

CohortReport make_cohort_report(std::vector<CohortEntry> participants) {
    CohortReport report;
    report.global_accuracy = global_accuracy(participants);
    report.participants = std::move(participants);
    return report;
}

int test_split_size(int data_size, double fraction) {
    if (data_size <= 0) {
        throw ValidationError("data_size must be positive");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw RangeError("test split fraction outside (0, 1]");
    }
    // ceil with a 1e-9 tolerance: 0.2 * 100 gives 20.
    const double raw = fraction * static_cast<double>(data_size);
    const int size = static_cast<int>(std::ceil(raw - 1e-9));
    return std::clamp(size, 1, data_size);
}

}  // namespace fedmint
