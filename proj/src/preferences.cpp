#include "fedmint/preferences.hpp"

#include <algorithm>

#include "fedmint/economics.hpp"

namespace fedmint {

bool PreferenceList::lists(const std::string& id) const {
    return std::find(ranking.begin(), ranking.end(), id) != ranking.end();
}

std::optional<std::size_t> PreferenceList::rank_of(const std::string& id) const {
    auto it = std::find(ranking.begin(), ranking.end(), id);
    if (it == ranking.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ranking.begin());
}

PreferenceList make_preference_list(std::string owner, std::map<std::string, double> scores) {
    PreferenceList list;
    list.owner = std::move(owner);
    list.ranking.reserve(scores.size());
    for (const auto& [id, s] : scores) list.ranking.push_back(id);
    // Map order is id-ascending and stable_sort preserves it among equal scores.
    std::stable_sort(list.ranking.begin(), list.ranking.end(),
                     [&](const std::string& a, const std::string& b) {
                         return scores.at(a) > scores.at(b);
                     });
    list.score = std::move(scores);
    return list;
}

PreferenceList build_device_preferences(const DeviceProfile& device,
                                        std::span<const ServerProfile> servers,
                                        const LatencyMatrix& latency,
                                        const DevicePreferenceInputs& inputs) {
    AccuracyFraction own = inputs.prior;
    if (const auto* latest = device.latest_accuracy()) {
        own = latest->accuracy;
    } else if (inputs.newcomer_estimate) {
        own = *inputs.newcomer_estimate;
    }

    std::map<std::string, double> scores;
    for (const auto& s : servers) {
        if (!device.offers(s.requested_data_type)) continue;
        AccuracyFraction global = inputs.prior;
        if (inputs.previous_global) {
            if (auto it = inputs.previous_global->find(s.server_id);
                it != inputs.previous_global->end()) {
                global = it->second;
            }
        }
        const double l = latency.scaled(s.server_id, device.device_id);
        scores[s.server_id] = device_reward(device, s, l, own, global).total;
    }
    return make_preference_list(device.device_id, std::move(scores));
}

BootstrapScorer::BootstrapScorer(BootstrapServer& bootstrap, std::vector<ServerProfile>& registry,
                                 AccuracyFraction prior)
    : bootstrap_(bootstrap), registry_(registry), prior_(prior) {}

NewcomerScore BootstrapScorer::score(const ServerId& requester, const DeviceProfile& newcomer) {
    try {
        auto outcome = bootstrap_.handle_inquiry(requester, newcomer.features, registry_);
        return {outcome.predicted_accuracy, ScoreSource::Bootstrap};
    } catch (const BudgetExhausted&) {
        return {prior_, ScoreSource::PriorRefused};
    } catch (const NoTrainingData&) {
        return {prior_, ScoreSource::PriorNoData};
    }
}

NewcomerScore RandomScorer::score(const ServerId&, const DeviceProfile&) {
    return {AccuracyFraction(rng_.uniform01()), ScoreSource::Random};
}

ServerPreferenceResult build_server_preferences(const ServerProfile& server,
                                                std::span<const DeviceProfile> devices,
                                                NewcomerScorer& scorer) {
    // The scorer may mutate the registry holding `server`.
    const ServerId id = server.server_id;
    const std::string wanted = server.requested_data_type;

    ServerPreferenceResult result;
    std::map<std::string, double> scores;
    for (const auto& d : devices) {
        if (!d.offers(wanted)) continue;
        if (const auto* latest = d.latest_accuracy()) {
            scores[d.device_id] = latest->accuracy.value();
            continue;
        }
        const auto s = scorer.score(id, d);
        switch (s.source) {
            case ScoreSource::Bootstrap: ++result.inquiries; break;
            case ScoreSource::PriorRefused: ++result.refusals; break;
            case ScoreSource::PriorNoData: ++result.no_data; break;
            default: break;
        }
        scores[d.device_id] = s.accuracy.value();
        result.newcomer_scores.emplace(d.device_id, s);
    }
    result.list = make_preference_list(id, std::move(scores));
    return result;
}

}  // namespace fedmint
