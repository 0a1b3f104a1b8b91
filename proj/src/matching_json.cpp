#include "fedmint/matching_json.hpp"

#include <set>

namespace fedmint {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ValidationError(path + ": " + what);
}

PreferenceList ranked(const std::string& owner, const nlohmann::json& list,
                      const std::string& path) {
    if (!list.is_array()) bad(path, "expected an array of ids");
    PreferenceList out;
    out.owner = owner;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& item = list[i];
        if (!item.is_string()) bad(path + "[" + std::to_string(i) + "]", "expected a string id");
        auto id = item.get<std::string>();
        if (!seen.insert(id).second) bad(path, "'" + id + "' listed twice");
        out.score[id] = static_cast<double>(list.size() - i);
        out.ranking.push_back(std::move(id));
    }
    return out;
}

}  // namespace

MatchingProblem problem_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) bad("$", "expected an object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "devices" && key != "servers") bad("$." + key, "unknown key");
    }
    MatchingProblem problem;
    if (doc.contains("devices")) {
        const auto& devices = doc.at("devices");
        if (!devices.is_object()) bad("$.devices", "expected an object");
        for (const auto& [id, list] : devices.items()) {
            problem.device_prefs[id] = ranked(id, list, "$.devices." + id);
        }
    }
    if (doc.contains("servers")) {
        const auto& servers = doc.at("servers");
        if (!servers.is_object()) bad("$.servers", "expected an object");
        for (const auto& [id, entry] : servers.items()) {
            const std::string path = "$.servers." + id;
            if (!entry.is_object()) bad(path, "expected an object");
            for (const auto& [key, _] : entry.items()) {
                if (key != "capacity" && key != "ranking") bad(path + "." + key, "unknown key");
            }
            if (!entry.contains("capacity") || !entry.at("capacity").is_number_integer()) {
                bad(path + ".capacity", "expected an integer");
            }
            problem.capacities[id] = entry.at("capacity").get<int>();
            problem.server_prefs[id] =
                ranked(id, entry.value("ranking", nlohmann::json::array()), path + ".ranking");
        }
    }
    validate_problem(problem);
    return problem;
}

nlohmann::json problem_to_json(const MatchingProblem& problem) {
    nlohmann::json doc;
    doc["devices"] = nlohmann::json::object();
    doc["servers"] = nlohmann::json::object();
    for (const auto& [id, prefs] : problem.device_prefs) doc["devices"][id] = prefs.ranking;
    for (const auto& [id, prefs] : problem.server_prefs) {
        doc["servers"][id] = {{"capacity", problem.capacities.at(id)}, {"ranking", prefs.ranking}};
    }
    return doc;
}

nlohmann::json matching_to_json(const Matching& matching) {
    nlohmann::json doc;
    doc["devices"] = nlohmann::json::object();
    doc["servers"] = nlohmann::json::object();
    for (const auto& [device, server] : matching.device_to_server) {
        doc["devices"][device] = server ? nlohmann::json(*server) : nlohmann::json(nullptr);
    }
    for (const auto& [server, devices] : matching.server_to_devices) {
        doc["servers"][server] = std::vector<std::string>(devices.begin(), devices.end());
    }
    return doc;
}

}  // namespace fedmint
