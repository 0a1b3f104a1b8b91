#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "fedmint/domain.hpp"
#include "fedmint/preferences.hpp"

namespace fedmint {

struct MatchingProblem {
    std::map<DeviceId, PreferenceList> device_prefs;  // rankings over server ids
    std::map<ServerId, PreferenceList> server_prefs;  // rankings over device ids
    std::map<ServerId, int> capacities;
};

/// A device <-> server assignment. Every device and server of the problem has
/// an entry; unmatched devices map to nullopt.
struct Matching {
    std::map<DeviceId, std::optional<ServerId>> device_to_server;
    std::map<ServerId, std::set<DeviceId>> server_to_devices;

    void assign(const DeviceId& device, const ServerId& server);
    [[nodiscard]] std::optional<ServerId> server_of(const DeviceId& device) const;
    [[nodiscard]] std::size_t matched_count() const;

    bool operator==(const Matching&) const = default;
};

/// Empty matching over all ids of the problem.
Matching empty_matching(const MatchingProblem& problem);

struct MatchingStats {
    std::size_t proposals = 0;
    std::size_t rejections = 0;
    std::size_t bumps = 0;
    std::size_t proposal_bound = 0;  // sum of device list lengths
};

/// Throws ValidationError when a ranking names an unknown counterpart, repeats
/// an entry, or a server has no (or a negative) capacity.
void validate_problem(const MatchingProblem& problem);

/// Device-proposing deferred acceptance with per-server FIFO request queues.
Matching run_matching(const MatchingProblem& problem, MatchingStats* stats = nullptr);

/// True iff both list each other, the device is unmatched or strictly prefers
/// `server` to its assignment, and the server has room or strictly prefers the
/// device to its worst holder.
bool is_blocking_pair(const Matching& matching, const DeviceId& device, const ServerId& server,
                      const MatchingProblem& problem);

/// Feasible (capacities, mutual acceptability) and free of blocking pairs,
/// including under-capacity servers with an acceptable unmatched device.
bool is_stable(const Matching& matching, const MatchingProblem& problem);

class OracleRefused : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kOracleMaxDevices = 8;
inline constexpr std::size_t kOracleMaxServers = 3;

/// Every stable matching, found by exhaustive enumeration. Refuses instances
/// larger than kOracleMaxDevices x kOracleMaxServers.
std::vector<Matching> brute_force_stable(const MatchingProblem& problem);

/// Uniqueness and capacity audit. Throws std::logic_error describing the
/// first violation.
void audit_matching(const Matching& matching, const std::map<ServerId, int>& capacities);

}  // namespace fedmint
