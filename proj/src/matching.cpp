#include "fedmint/matching.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace fedmint {

void Matching::assign(const DeviceId& device, const ServerId& server) {
    if (auto prev = device_to_server[device]) {
        server_to_devices[*prev].erase(device);
    }
    device_to_server[device] = server;
    server_to_devices[server].insert(device);
}

std::optional<ServerId> Matching::server_of(const DeviceId& device) const {
    auto it = device_to_server.find(device);
    return it == device_to_server.end() ? std::nullopt : it->second;
}

std::size_t Matching::matched_count() const {
    return static_cast<std::size_t>(std::count_if(
        device_to_server.begin(), device_to_server.end(), [](const auto& kv) { return kv.second.has_value(); }));
}

Matching empty_matching(const MatchingProblem& problem) {
    Matching m;
    for (const auto& [d, p] : problem.device_prefs) m.device_to_server[d] = std::nullopt;
    for (const auto& [s, p] : problem.server_prefs) m.server_to_devices[s];
    return m;
}

namespace {

constexpr int kUnlisted = std::numeric_limits<int>::max();

/// Index-based view of a problem: devices and servers in id order.
struct Indexed {
    std::vector<DeviceId> devices;
    std::vector<ServerId> servers;
    std::map<std::string, int> device_index;
    std::map<std::string, int> server_index;
    std::vector<std::vector<int>> device_list;  // servers, best first
    std::vector<std::vector<int>> device_rank;  // [d][s] -> position or kUnlisted
    std::vector<std::vector<int>> server_rank;  // [s][d] -> position or kUnlisted
    std::vector<int> capacity;

    [[nodiscard]] bool mutual(int d, int s) const {
        return device_rank[d][s] != kUnlisted && server_rank[s][d] != kUnlisted;
    }
};

Indexed index_problem(const MatchingProblem& p) {
    Indexed ix;
    for (const auto& [d, list] : p.device_prefs) {
        ix.device_index[d] = static_cast<int>(ix.devices.size());
        ix.devices.push_back(d);
    }
    for (const auto& [s, list] : p.server_prefs) {
        ix.server_index[s] = static_cast<int>(ix.servers.size());
        ix.servers.push_back(s);
    }
    for (const auto& [s, cap] : p.capacities) {
        if (!ix.server_index.contains(s)) {
            throw ValidationError("capacities: unknown server " + s);
        }
    }
    const auto nd = ix.devices.size();
    const auto ns = ix.servers.size();
    ix.device_list.resize(nd);
    ix.device_rank.assign(nd, std::vector<int>(ns, kUnlisted));
    ix.server_rank.assign(ns, std::vector<int>(nd, kUnlisted));
    ix.capacity.resize(ns);

    for (std::size_t d = 0; d < nd; ++d) {
        const auto& ranking = p.device_prefs.at(ix.devices[d]).ranking;
        for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
            auto it = ix.server_index.find(ranking[pos]);
            if (it == ix.server_index.end()) {
                throw ValidationError("device_prefs." + ix.devices[d] + ": unknown server " + ranking[pos]);
            }
            if (ix.device_rank[d][it->second] != kUnlisted) {
                throw ValidationError("device_prefs." + ix.devices[d] + ": duplicate server " + ranking[pos]);
            }
            ix.device_rank[d][it->second] = static_cast<int>(pos);
            ix.device_list[d].push_back(it->second);
        }
    }
    for (std::size_t s = 0; s < ns; ++s) {
        const auto& id = ix.servers[s];
        const auto& ranking = p.server_prefs.at(id).ranking;
        for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
            auto it = ix.device_index.find(ranking[pos]);
            if (it == ix.device_index.end()) {
                throw ValidationError("server_prefs." + id + ": unknown device " + ranking[pos]);
            }
            if (ix.server_rank[s][it->second] != kUnlisted) {
                throw ValidationError("server_prefs." + id + ": duplicate device " + ranking[pos]);
            }
            ix.server_rank[s][it->second] = static_cast<int>(pos);
        }
        auto cap = p.capacities.find(id);
        if (cap == p.capacities.end()) {
            throw ValidationError("capacities: missing entry for server " + id);
        }
        if (cap->second < 0) {
            throw ValidationError("capacities." + id + ": negative capacity");
        }
        ix.capacity[s] = cap->second;
    }
    return ix;
}

/// assignment[d] = server index or -1.
std::vector<int> index_matching(const Matching& m, const Indexed& ix) {
    std::vector<int> assignment(ix.devices.size(), -1);
    for (const auto& [d, s] : m.device_to_server) {
        auto di = ix.device_index.find(d);
        if (di == ix.device_index.end()) {
            throw ValidationError("matching names unknown device " + d);
        }
        if (!s) continue;
        auto si = ix.server_index.find(*s);
        if (si == ix.server_index.end()) {
            throw ValidationError("matching names unknown server " + *s);
        }
        assignment[di->second] = si->second;
    }
    for (const auto& [s, members] : m.server_to_devices) {
        auto si = ix.server_index.find(s);
        if (si == ix.server_index.end()) {
            throw ValidationError("matching names unknown server " + s);
        }
        for (const auto& d : members) {
            auto di = ix.device_index.find(d);
            if (di == ix.device_index.end() || assignment[di->second] != si->second) {
                throw ValidationError("matching is not bidirectionally consistent at " + s + "/" + d);
            }
        }
    }
    std::vector<int> load(ix.servers.size(), 0);
    for (int s : assignment) {
        if (s >= 0) ++load[s];
    }
    for (std::size_t s = 0; s < ix.servers.size(); ++s) {
        auto it = m.server_to_devices.find(ix.servers[s]);
        const auto listed = it == m.server_to_devices.end() ? 0 : it->second.size();
        if (listed != static_cast<std::size_t>(load[s])) {
            throw ValidationError("matching is not bidirectionally consistent at " + ix.servers[s]);
        }
    }
    return assignment;
}

Matching to_matching(const std::vector<int>& assignment, const Indexed& ix) {
    Matching m;
    for (const auto& s : ix.servers) m.server_to_devices[s];
    for (std::size_t d = 0; d < assignment.size(); ++d) {
        if (assignment[d] < 0) {
            m.device_to_server[ix.devices[d]] = std::nullopt;
        } else {
            m.assign(ix.devices[d], ix.servers[static_cast<std::size_t>(assignment[d])]);
        }
    }
    return m;
}

bool blocks(const Indexed& ix, const std::vector<int>& assignment, const std::vector<int>& load,
            const std::vector<int>& worst, int d, int s) {
    if (!ix.mutual(d, s) || assignment[d] == s) return false;
    const int current = assignment[d];
    if (current >= 0 && ix.device_rank[d][s] >= ix.device_rank[d][current]) return false;
    if (load[s] < ix.capacity[s]) return true;
    return ix.server_rank[s][d] < worst[s];
}

struct Occupancy {
    std::vector<int> load;
    std::vector<int> worst;  // worst server-side rank among holders, -1 if none
};

Occupancy occupancy(const Indexed& ix, const std::vector<int>& assignment) {
    Occupancy o{std::vector<int>(ix.servers.size(), 0), std::vector<int>(ix.servers.size(), -1)};
    for (std::size_t d = 0; d < assignment.size(); ++d) {
        const int s = assignment[d];
        if (s < 0) continue;
        ++o.load[s];
        o.worst[s] = std::max(o.worst[s], ix.server_rank[s][d]);
    }
    return o;
}

bool stable_indexed(const Indexed& ix, const std::vector<int>& assignment) {
    const auto occ = occupancy(ix, assignment);
    for (std::size_t s = 0; s < ix.servers.size(); ++s) {
        if (occ.load[s] > ix.capacity[s]) return false;
    }
    const int nd = static_cast<int>(ix.devices.size());
    for (int d = 0; d < nd; ++d) {
        const int s = assignment[d];
        if (s >= 0 && !ix.mutual(d, s)) return false;
    }
    for (int d = 0; d < nd; ++d) {
        for (int s : ix.device_list[d]) {
            if (blocks(ix, assignment, occ.load, occ.worst, d, s)) return false;
        }
    }
    return true;
}

}  // namespace

void validate_problem(const MatchingProblem& problem) { (void)index_problem(problem); }

Matching run_matching(const MatchingProblem& problem, MatchingStats* stats) {
    const Indexed ix = index_problem(problem);
    const auto nd = ix.devices.size();
    const auto ns = ix.servers.size();

    MatchingStats local;
    for (const auto& l : ix.device_list) local.proposal_bound += l.size();

    std::vector<std::size_t> next(nd, 0);
    std::vector<int> held_by(nd, -1);
    std::vector<std::vector<int>> held(ns);
    std::vector<std::deque<int>> inbox(ns);
    std::deque<int> pending;
    for (std::size_t d = 0; d < nd; ++d) pending.push_back(static_cast<int>(d));

    auto reject = [&](int d) {
        ++local.rejections;
        pending.push_back(d);
    };

    while (true) {
        // Every free device sends one request to the next server on its list.
        bool sent = false;
        for (auto waiting = pending.size(); waiting > 0; --waiting) {
            const int d = pending.front();
            pending.pop_front();
            if (next[d] >= ix.device_list[d].size()) continue;  // list exhausted
            const int s = ix.device_list[d][next[d]++];
            inbox[s].push_back(d);
            ++local.proposals;
            sent = true;
        }
        if (!sent) break;

        for (std::size_t s = 0; s < ns; ++s) {
            auto& q = inbox[s];
            auto& accepted = held[s];
            const auto& rank = ix.server_rank[s];
            while (!q.empty()) {
                const int d = q.front();
                q.pop_front();
                if (rank[d] == kUnlisted) {
                    reject(d);
                    continue;
                }
                if (static_cast<int>(accepted.size()) < ix.capacity[s]) {
                    accepted.push_back(d);
                    held_by[d] = static_cast<int>(s);
                    continue;
                }
                auto worst = std::max_element(accepted.begin(), accepted.end(),
                                              [&](int a, int b) { return rank[a] < rank[b]; });
                if (worst != accepted.end() && rank[d] < rank[*worst]) {
                    const int bumped = *worst;
                    *worst = d;
                    held_by[d] = static_cast<int>(s);
                    held_by[bumped] = -1;
                    ++local.bumps;
                    reject(bumped);
                    continue;
                }
                reject(d);
                // Queued proposers ranked below d are dropped too.
                for (auto it = q.begin(); it != q.end();) {
                    if (rank[*it] > rank[d]) {
                        reject(*it);
                        it = q.erase(it);
                    } else {
                        ++it;
                    }
                }
            }
        }
    }

    if (local.proposals > local.proposal_bound) {
        throw std::logic_error("deferred acceptance exceeded its proposal bound");
    }
    if (stats) *stats = local;
    return to_matching(held_by, ix);
}

bool is_blocking_pair(const Matching& matching, const DeviceId& device, const ServerId& server,
                      const MatchingProblem& problem) {
    const Indexed ix = index_problem(problem);
    auto di = ix.device_index.find(device);
    auto si = ix.server_index.find(server);
    if (di == ix.device_index.end() || si == ix.server_index.end()) {
        throw ValidationError("is_blocking_pair: unknown id");
    }
    const auto assignment = index_matching(matching, ix);
    const auto occ = occupancy(ix, assignment);
    return blocks(ix, assignment, occ.load, occ.worst, di->second, si->second);
}

bool is_stable(const Matching& matching, const MatchingProblem& problem) {
    const Indexed ix = index_problem(problem);
    return stable_indexed(ix, index_matching(matching, ix));
}

std::vector<Matching> brute_force_stable(const MatchingProblem& problem) {
    if (problem.device_prefs.size() > kOracleMaxDevices ||
        problem.server_prefs.size() > kOracleMaxServers) {
        throw OracleRefused("instance exceeds oracle bounds (" + std::to_string(kOracleMaxDevices) +
                            " devices, " + std::to_string(kOracleMaxServers) + " servers)");
    }
    const Indexed ix = index_problem(problem);
    const int nd = static_cast<int>(ix.devices.size());
    const int ns = static_cast<int>(ix.servers.size());

    std::vector<int> assignment(static_cast<std::size_t>(nd), -1);
    std::vector<int> load(static_cast<std::size_t>(ns), 0);
    std::vector<Matching> found;

    // Only mutually acceptable pairs can appear in a stable matching.
    auto dfs = [&](auto&& self, int d) -> void {
        if (d == nd) {
            if (stable_indexed(ix, assignment)) found.push_back(to_matching(assignment, ix));
            return;
        }
        assignment[d] = -1;
        self(self, d + 1);
        for (int s = 0; s < ns; ++s) {
            if (!ix.mutual(d, s) || load[s] >= ix.capacity[s]) continue;
            assignment[d] = s;
            ++load[s];
            self(self, d + 1);
            --load[s];
            assignment[d] = -1;
        }
    };
    dfs(dfs, 0);
    return found;
}

void audit_matching(const Matching& matching, const std::map<ServerId, int>& capacities) {
    std::map<DeviceId, ServerId> seen;
    for (const auto& [s, members] : matching.server_to_devices) {
        auto cap = capacities.find(s);
        if (cap == capacities.end()) {
            throw std::logic_error("audit: server " + s + " has no capacity");
        }
        if (static_cast<int>(members.size()) > cap->second) {
            throw std::logic_error("audit: server " + s + " holds " + std::to_string(members.size()) +
                                   " devices, capacity " + std::to_string(cap->second));
        }
        for (const auto& d : members) {
            auto [it, fresh] = seen.emplace(d, s);
            if (!fresh) {
                throw std::logic_error("audit: device " + d + " matched to both " + it->second +
                                       " and " + s);
            }
            if (matching.server_of(d) != s) {
                throw std::logic_error("audit: " + d + "/" + s + " not bidirectionally consistent");
            }
        }
    }
    for (const auto& [d, s] : matching.device_to_server) {
        if (s && !seen.contains(d)) {
            throw std::logic_error("audit: device " + d + " claims " + *s + " but is not held");
        }
    }
}

}  // namespace fedmint
