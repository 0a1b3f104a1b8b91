#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fedmint/bootstrap.hpp"
#include "fedmint/domain.hpp"
#include "fedmint/matching.hpp"
#include "fedmint/rng.hpp"

namespace fedmint::test {

inline DeviceProfile sample_device(const std::string& id, DeviceFeatures features = {"P1", "Asia", "Phone"}) {
    DeviceProfile d;
    d.device_id = id;
    d.features = std::move(features);
    d.cpu_capacity = 500;
    d.cpu_promised = 400;
    d.ram_capacity = 800;
    d.ram_promised = 600;
    d.bandwidth_capacity = 700;
    d.bandwidth_promised = 500;
    d.data_labels = {3, 7};
    d.data_size = 450;
    d.test_data_size = 90;
    d.available_data_types = {"mnist"};
    return d;
}

inline ServerProfile sample_server(const std::string& id, double price_scale = 1.0, int capacity = 10) {
    ServerProfile s;
    s.server_id = id;
    s.requested_data_type = "mnist";
    s.capacity = capacity;
    s.price_cpu = 0.002 * price_scale;
    s.price_ram = 0.001 * price_scale;
    s.price_band = 0.003 * price_scale;
    s.calls_budget = 5;
    return s;
}

inline BootstrapDataset device_sample() {
    std::ifstream in(std::string(FEDMINT_TEST_DATA_DIR) + "/device_sample.csv");
    return read_interactions_csv(in);
}

inline PreferenceList ranking(const std::string& owner, std::vector<std::string> ids) {
    PreferenceList p;
    p.owner = owner;
    for (std::size_t i = 0; i < ids.size(); ++i) p.score[ids[i]] = static_cast<double>(ids.size() - i);
    p.ranking = std::move(ids);
    return p;
}

/// Textbook device-proposing deferred acceptance: every free device proposes
/// to its next choice, each server keeps its best `capacity` proposers so far.
inline Matching reference_deferred_acceptance(const MatchingProblem& p) {
    std::map<DeviceId, std::size_t> next;
    std::map<ServerId, std::vector<DeviceId>> held;
    std::deque<DeviceId> free;
    for (const auto& [d, _] : p.device_prefs) free.push_back(d);
    while (!free.empty()) {
        DeviceId d = free.front();
        free.pop_front();
        const auto& list = p.device_prefs.at(d).ranking;
        while (next[d] < list.size()) {
            const ServerId s = list[next[d]++];
            const auto& sp = p.server_prefs.at(s);
            if (!sp.lists(d)) continue;
            auto& h = held[s];
            h.push_back(d);
            std::sort(h.begin(), h.end(), [&](const auto& a, const auto& b) {
                return *sp.rank_of(a) < *sp.rank_of(b);
            });
            if (static_cast<int>(h.size()) > p.capacities.at(s)) {
                free.push_back(h.back());
                h.pop_back();
            }
            break;
        }
    }
    Matching m = empty_matching(p);
    for (const auto& [s, ds] : held) {
        for (const auto& d : ds) m.assign(d, s);
    }
    return m;
}

/// Random instance with incomplete, possibly one-sided lists.
inline MatchingProblem random_problem(Rng& rng, int max_devices, int max_servers, int max_capacity) {
    MatchingProblem p;
    const int nd = static_cast<int>(rng.uniform_int(0, max_devices));
    const int ns = static_cast<int>(rng.uniform_int(1, max_servers));
    std::vector<std::string> devices, servers;
    for (int i = 0; i < nd; ++i) devices.push_back("d" + std::to_string(i));
    for (int j = 0; j < ns; ++j) servers.push_back("s" + std::to_string(j));
    for (const auto& d : devices) {
        std::vector<std::string> list;
        for (const auto& s : servers) {
            if (rng.bernoulli(0.8)) list.push_back(s);
        }
        rng.shuffle(list);
        p.device_prefs[d] = ranking(d, list);
    }
    for (const auto& s : servers) {
        std::vector<std::string> list;
        for (const auto& d : devices) {
            if (rng.bernoulli(0.85)) list.push_back(d);
        }
        rng.shuffle(list);
        p.server_prefs[s] = ranking(s, list);
        p.capacities[s] = static_cast<int>(rng.uniform_int(0, max_capacity));
    }
    return p;
}

/// True when every device weakly prefers its partner in `a` over `b`.
inline bool weakly_device_better(const Matching& a, const Matching& b, const MatchingProblem& p) {
    for (const auto& [d, prefs] : p.device_prefs) {
        auto sa = a.server_of(d);
        auto sb = b.server_of(d);
        if (!sb) continue;
        if (!sa) return false;
        if (*prefs.rank_of(*sa) > *prefs.rank_of(*sb)) return false;
    }
    return true;
}

inline double naive_sd(const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace fedmint::test
