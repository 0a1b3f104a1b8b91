#include "fedmint/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fedmint/aggregation.hpp"
#include "fedmint/economics.hpp"
#include "fedmint/preferences.hpp"

namespace fedmint {

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
    kTagDevice = 1,
    kTagLatency,
    kTagServers,
    kTagNoise,
    kTagVanilla,
    kTagRandomScore,
    kTagBootstrap,
    kTagKFold,
    kTagRepetition,
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

void require_range(const Range& r, const char* name, bool strictly_positive = false) {
    require(r.lo <= r.hi, std::string(name) + ": lower bound exceeds upper bound");
    if (strictly_positive) require(r.lo > 0.0, std::string(name) + ": must be positive");
}

std::uint64_t index_of(const DeviceId& id) {
    return static_cast<std::uint64_t>(std::stoi(id.substr(1)));
}

std::size_t pick(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

}  // namespace

std::string_view arm_name(Arm arm) noexcept {
    switch (arm) {
        case Arm::FedMint: return "fedmint";
        case Arm::Vanilla: return "vanilla";
        case Arm::FedMintRandomBootstrap: return "fedmint_random_bootstrap";
    }
    return "?";
}

std::optional<Arm> parse_arm(std::string_view name) noexcept {
    for (auto a : {Arm::FedMint, Arm::Vanilla, Arm::FedMintRandomBootstrap}) {
        if (arm_name(a) == name) return a;
    }
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    require(repetitions >= 1, "repetitions: must be positive");
    require(initial_devices >= 1, "population.initial_devices: must be positive");
    require(arrivals_per_round >= 0, "population.arrivals_per_round: must be nonnegative");
    require(rounds >= 1, "rounds: must be positive");
    require(servers >= 1, "servers.count: must be positive");
    require(clients_per_server >= 1, "servers.clients_per_server: must be positive");
    require_range(cpu, "resources.cpu", true);
    require_range(ram, "resources.ram", true);
    require_range(bandwidth, "resources.bandwidth", true);
    require_range(promised_fraction, "resources.promised_fraction", true);
    require(promised_fraction.hi <= 1.0, "resources.promised_fraction: upper bound above 1");
    require_range(latency, "resources.latency", true);
    require(latency.lo < latency.hi, "resources.latency: bounds must differ");
    require_range(price_cpu, "prices.cpu", true);
    require_range(price_ram, "prices.ram", true);
    require_range(price_band, "prices.band", true);
    require(num_classes >= 1, "data.num_classes: must be positive");
    require(min_labels >= 1 && min_labels <= max_labels, "data.min_labels: must be in [1, max_labels]");
    require(max_labels <= num_classes, "data.max_labels: exceeds num_classes");
    require(min_data_size >= 1 && min_data_size <= max_data_size,
            "data.min_data_size: must be in [1, max_data_size]");
    require(test_split > 0.0 && test_split <= 1.0, "data.test_split: must be in (0, 1]");
    require(!providers.empty(), "features.providers: must not be empty");
    require(!regions.empty(), "features.regions: must not be empty");
    require(!device_types.empty(), "features.device_types: must not be empty");
    require(!data_types.empty(), "features.data_types: must not be empty");
    require(feature_correlation >= 0.0 && feature_correlation <= 1.0,
            "features.correlation: must be in [0, 1]");
    require(min_instances >= 1, "bootstrap.min_instances: must be positive");
    require(cv_threshold > 0.0, "bootstrap.cv_threshold: must be positive");
    require(initial_calls_budget >= 0, "bootstrap.calls_budget: must be nonnegative");
    require(upload_fraction > 0.0 && upload_fraction <= 1.0,
            "bootstrap.upload_fraction: must be in (0, 1]");
    require(kfold >= 2, "bootstrap.kfold: must be at least 2");
    require(prior_accuracy >= 0.0 && prior_accuracy <= 1.0,
            "bootstrap.prior_accuracy: must be in [0, 1]");
    require(proxy.floor >= 0.0 && proxy.floor <= proxy.ceiling && proxy.ceiling <= 1.0,
            "proxy.floor: must satisfy 0 <= floor <= ceiling <= 1");
    require(proxy.noise >= 0.0, "proxy.noise: must be nonnegative");
    require(proxy.experience_cap >= 0, "proxy.experience_cap: must be nonnegative");
    require(!arms.empty(), "arms: must not be empty");
}

// ---------------------------------------------------------------------------
// Population
// ---------------------------------------------------------------------------

DataShard assign_noniid_data(const ExperimentConfig& config, Rng& rng) {
    DataShard shard;
    const auto count = rng.uniform_int(config.min_labels, config.max_labels);
    std::vector<int> classes(static_cast<std::size_t>(config.num_classes));
    std::iota(classes.begin(), classes.end(), 0);
    // Partial Fisher-Yates: the first `count` slots are a uniform sample.
    for (std::int64_t i = 0; i < count; ++i) {
        const auto j = rng.uniform_int(i, config.num_classes - 1);
        std::swap(classes[static_cast<std::size_t>(i)], classes[static_cast<std::size_t>(j)]);
        shard.labels.insert(classes[static_cast<std::size_t>(i)]);
    }
    shard.data_size = static_cast<int>(rng.uniform_int(config.min_data_size, config.max_data_size));
    shard.test_data_size = test_split_size(shard.data_size, config.test_split);
    return shard;
}

int first_device_index(const ExperimentConfig& config, int round) {
    return round == 0 ? 0 : config.initial_devices + (round - 1) * config.arrivals_per_round;
}

std::string device_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "D%05d", index);
    return buf;
}

namespace {

/// Provider tracks label diversity and device type tracks shard size with
/// probability `feature_correlation`; region is always independent.
DeviceFeatures draw_features(const ExperimentConfig& c, const DataShard& shard, Rng& rng) {
    DeviceFeatures f;
    const std::size_t label_span = static_cast<std::size_t>(c.max_labels - c.min_labels + 1);
    const std::size_t label_rank = shard.labels.size() - static_cast<std::size_t>(c.min_labels);
    if (rng.bernoulli(c.feature_correlation)) {
        f.provider = c.providers[label_rank * c.providers.size() / label_span];
    } else {
        f.provider = c.providers[pick(rng, c.providers.size())];
    }
    f.region = c.regions[pick(rng, c.regions.size())];
    if (rng.bernoulli(c.feature_correlation)) {
        const double width = static_cast<double>(c.max_data_size - c.min_data_size + 1);
        const double pos = static_cast<double>(shard.data_size - c.min_data_size) / width;
        const auto bucket = std::min(c.device_types.size() - 1,
                                     static_cast<std::size_t>(pos * static_cast<double>(c.device_types.size())));
        f.device_type = c.device_types[bucket];
    } else {
        f.device_type = c.device_types[pick(rng, c.device_types.size())];
    }
    return f;
}

DeviceProfile make_device(const ExperimentConfig& c, int index) {
    Rng rng(derive_seed({c.seed, kTagDevice, static_cast<std::uint64_t>(index)}));
    DeviceProfile d;
    d.device_id = device_id_for(index);
    d.cpu_capacity = rng.uniform(c.cpu.lo, c.cpu.hi);
    d.ram_capacity = rng.uniform(c.ram.lo, c.ram.hi);
    d.bandwidth_capacity = rng.uniform(c.bandwidth.lo, c.bandwidth.hi);
    d.cpu_promised = d.cpu_capacity * rng.uniform(c.promised_fraction.lo, c.promised_fraction.hi);
    d.ram_promised = d.ram_capacity * rng.uniform(c.promised_fraction.lo, c.promised_fraction.hi);
    d.bandwidth_promised =
        d.bandwidth_capacity * rng.uniform(c.promised_fraction.lo, c.promised_fraction.hi);
    const auto shard = assign_noniid_data(c, rng);
    d.data_labels = shard.labels;
    d.data_size = shard.data_size;
    d.test_data_size = shard.test_data_size;
    d.features = draw_features(c, shard, rng);
    if (c.data_types.size() == 1) {
        d.available_data_types.insert(c.data_types.front());
    } else {
        for (const auto& t : c.data_types) {
            if (rng.bernoulli(0.5)) d.available_data_types.insert(t);
        }
        if (d.available_data_types.empty()) {
            d.available_data_types.insert(c.data_types[pick(rng, c.data_types.size())]);
        }
    }
    return new_device(std::move(d));
}

}  // namespace

std::vector<DeviceProfile> generate_population(const ExperimentConfig& config, int round) {
    if (round < 0) throw std::invalid_argument("round must be nonnegative");
    const int count = round == 0 ? config.initial_devices : config.arrivals_per_round;
    const int first = first_device_index(config, round);
    std::vector<DeviceProfile> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(make_device(config, first + i));
    return out;
}

std::vector<ServerProfile> generate_servers(const ExperimentConfig& config) {
    Rng rng(derive_seed({config.seed, kTagServers}));
    std::vector<ServerProfile> out;
    for (int i = 0; i < config.servers; ++i) {
        ServerProfile s;
        s.server_id = "S" + std::to_string(i + 1);
        s.requested_data_type = config.data_types[static_cast<std::size_t>(i) % config.data_types.size()];
        s.capacity = config.clients_per_server;
        s.price_cpu = rng.uniform(config.price_cpu.lo, config.price_cpu.hi);
        s.price_ram = rng.uniform(config.price_ram.lo, config.price_ram.hi);
        s.price_band = rng.uniform(config.price_band.lo, config.price_band.hi);
        s.calls_budget = config.initial_calls_budget;
        out.push_back(new_server(std::move(s)));
    }
    return out;
}

void generate_latencies(const ExperimentConfig& config, std::span<const ServerProfile> servers,
                        std::span<const DeviceProfile> devices, LatencyMatrix& latency) {
    for (const auto& d : devices) {
        Rng rng(derive_seed({config.seed, kTagLatency, index_of(d.device_id)}));
        for (const auto& s : servers) {
            latency.set(s.server_id, d.device_id, rng.uniform(config.latency.lo, config.latency.hi));
        }
    }
}

// ---------------------------------------------------------------------------
// Training stand-in and baseline
// ---------------------------------------------------------------------------

AccuracyFraction accuracy_proxy(const DeviceProfile& device, int participation_count, Rng& rng,
                                const AccuracyProxyParams& p) {
    const double normalized_size = (static_cast<double>(device.data_size) - 100.0) / 350.0;
    const double labels = static_cast<double>(device.data_labels.size());
    const int experience = std::min(std::max(participation_count, 0), p.experience_cap);
    double acc = p.base + p.size_weight * normalized_size + p.label_weight * (labels - 1.0) +
                 p.experience_gain * static_cast<double>(experience);
    acc += rng.uniform(-p.noise, p.noise);
    return AccuracyFraction(std::clamp(acc, p.floor, p.ceiling));
}

Matching vanilla_select(std::span<const DeviceProfile> devices,
                        std::span<const ServerProfile> servers, int k, Rng& rng) {
    Matching m;
    for (const auto& d : devices) m.device_to_server[d.device_id] = std::nullopt;
    for (const auto& s : servers) m.server_to_devices[s.server_id];
    if (k <= 0) return m;

    std::vector<bool> taken(devices.size(), false);
    for (const auto& s : servers) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < devices.size(); ++i) {
            if (!taken[i] && devices[i].offers(s.requested_data_type)) pool.push_back(i);
        }
        const auto want = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
        for (std::size_t i = 0; i < want; ++i) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size()) - 1));
            std::swap(pool[i], pool[j]);
            taken[pool[i]] = true;
            m.assign(devices[pool[i]].device_id, s.server_id);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Rounds
// ---------------------------------------------------------------------------

const ArmRoundMetrics* RoundMetrics::arm(Arm a) const {
    for (const auto& m : arms) {
        if (m.arm == a) return &m;
    }
    return nullptr;
}

SimulationState init_state(const ExperimentConfig& config, LocalTrainer trainer) {
    config.validate();
    SimulationState state{config, {}, LatencyMatrix(config.latency.lo, config.latency.hi), {}, std::move(trainer)};
    if (!state.trainer) {
        state.trainer = [proxy = config.proxy](const DeviceProfile& d, int participation, Rng& rng) {
            return accuracy_proxy(d, participation, rng, proxy);
        };
    }
    const auto servers = generate_servers(config);
    for (auto arm : config.arms) {
        BootstrapOptions opts{{config.min_instances, config.cv_threshold}, config.upload_fraction};
        state.arms.push_back(ArmState{arm, {}, servers, {},
                                      BootstrapServer(opts, derive_seed({config.seed, kTagBootstrap,
                                                                         static_cast<std::uint64_t>(arm)}))});
    }
    state.population = generate_population(config, 0);
    generate_latencies(config, servers, state.population, state.latency);
    for (auto& a : state.arms) a.devices = state.population;
    return state;
}

namespace {

std::map<ServerId, int> capacities_of(std::span<const ServerProfile> servers) {
    std::map<ServerId, int> caps;
    for (const auto& s : servers) caps[s.server_id] = s.capacity;
    return caps;
}

/// Trains the matched cohorts, aggregates, pays rewards and records the
/// interactions.
void settle_round(SimulationState& state, ArmState& arm, const Matching& matching, int round,
                  ArmRoundMetrics& metrics) {
    const auto& config = state.config;
    std::map<DeviceId, std::size_t> position;
    for (std::size_t i = 0; i < arm.devices.size(); ++i) position[arm.devices[i].device_id] = i;

    for (auto& server : arm.servers) {
        ServerRoundMetrics* sm = nullptr;
        for (auto& m : metrics.servers) {
            if (m.server_id == server.server_id) sm = &m;
        }
        const auto& members = matching.server_to_devices.at(server.server_id);
        server.selected_count = static_cast<int>(members.size());
        sm->cohort.assign(members.begin(), members.end());
        if (members.empty()) continue;

        std::vector<CohortEntry> cohort;
        for (const auto& id : members) {
            const auto& d = arm.devices[position.at(id)];
            // One noise stream per (round, device), shared by all arms.
            Rng noise(derive_seed({config.seed, kTagNoise, static_cast<std::uint64_t>(round),
                                   index_of(id)}));
            const auto participation = static_cast<int>(d.accuracy_history.size());
            cohort.push_back({id, state.trainer(d, participation, noise), d.test_data_size});
        }
        const auto global = global_accuracy(cohort);

        double reward_sum = 0.0;
        for (const auto& entry : cohort) {
            auto& d = arm.devices[position.at(entry.device_id)];
            const double l = state.latency.scaled(server.server_id, d.device_id);
            reward_sum += device_reward(d, server, l, entry.local_accuracy, global).total;
            d.accuracy_history.push_back({round, entry.local_accuracy});
            server.interaction_dataset.push_back(
                new_interaction(d.features, entry.local_accuracy.percent()));
        }
        sm->global_accuracy = global.value();
        sm->mean_reward = reward_sum / static_cast<double>(cohort.size());
        arm.previous_global[server.server_id] = global;
    }

    std::vector<InteractionRecord> pooled;
    for (const auto& s : arm.servers) {
        pooled.insert(pooled.end(), s.interaction_dataset.begin(), s.interaction_dataset.end());
    }
    metrics.pooled_rows = pooled.size();
    if (pooled.size() >= static_cast<std::size_t>(config.kfold)) {
        const auto seed = derive_seed({config.seed, kTagKFold, static_cast<std::uint64_t>(round),
                                       static_cast<std::uint64_t>(arm.arm)});
        metrics.bootstrap_mse =
            kfold_mse(pooled, config.kfold, seed, {config.min_instances, config.cv_threshold}).mean_mse;
    }
}

Matching fedmint_select(SimulationState& state, ArmState& arm, int round, ArmRoundMetrics& metrics,
                        std::size_t& proposals) {
    const auto& config = state.config;
    const AccuracyFraction prior(config.prior_accuracy);
    Rng random_scores(derive_seed({config.seed, kTagRandomScore, static_cast<std::uint64_t>(round)}));
    BootstrapScorer bootstrap_scorer(arm.bootstrap, arm.servers, prior);
    RandomScorer random_scorer(random_scores);
    NewcomerScorer& scorer = arm.arm == Arm::FedMintRandomBootstrap
                                 ? static_cast<NewcomerScorer&>(random_scorer)
                                 : static_cast<NewcomerScorer&>(bootstrap_scorer);

    MatchingProblem problem;
    std::map<DeviceId, AccuracyFraction> estimates;
    for (std::size_t i = 0; i < arm.servers.size(); ++i) {
        auto result = build_server_preferences(arm.servers[i], arm.devices, scorer);
        auto& sm = metrics.servers[i];
        sm.inquiries = result.inquiries;
        sm.refusals = result.refusals;
        sm.no_data = result.no_data;
        for (const auto& [id, score] : result.newcomer_scores) estimates.emplace(id, score.accuracy);
        problem.server_prefs.emplace(arm.servers[i].server_id, std::move(result.list));
    }
    problem.capacities = capacities_of(arm.servers);

    for (const auto& d : arm.devices) {
        DevicePreferenceInputs inputs{&arm.previous_global, std::nullopt, prior};
        if (auto it = estimates.find(d.device_id); it != estimates.end()) inputs.newcomer_estimate = it->second;
        problem.device_prefs.emplace(d.device_id,
                                     build_device_preferences(d, arm.servers, state.latency, inputs));
    }
    MatchingStats stats;
    auto matching = run_matching(problem, &stats);
    proposals = stats.proposals;
    return matching;
}

}  // namespace

RoundMetrics run_round(SimulationState& state, int round) {
    if (round < 1) throw std::invalid_argument("rounds are numbered from 1");
    const auto& config = state.config;

    auto arrivals = generate_population(config, round);
    generate_latencies(config, state.arms.empty() ? std::span<const ServerProfile>{}
                                                  : std::span<const ServerProfile>(state.arms.front().servers),
                       arrivals, state.latency);
    state.population.insert(state.population.end(), arrivals.begin(), arrivals.end());
    for (auto& arm : state.arms) arm.devices.insert(arm.devices.end(), arrivals.begin(), arrivals.end());

    RoundMetrics metrics;
    metrics.round = round;
    metrics.population = state.population.size();

    for (auto& arm : state.arms) {
        ArmRoundMetrics am;
        am.arm = arm.arm;
        for (const auto& s : arm.servers) am.servers.push_back(ServerRoundMetrics{s.server_id, {}, {}, 0.0, 0, 0, 0});

        try {
            Matching matching;
            if (arm.arm == Arm::Vanilla) {
                Rng rng(derive_seed({config.seed, kTagVanilla, static_cast<std::uint64_t>(round)}));
                matching = vanilla_select(arm.devices, arm.servers, config.clients_per_server, rng);
            } else {
                matching = fedmint_select(state, arm, round, am, am.proposals);
            }
            audit_matching(matching, capacities_of(arm.servers));
            settle_round(state, arm, matching, round, am);
        } catch (const std::exception& e) {
            throw std::runtime_error("round " + std::to_string(round) + ", arm " +
                                     std::string(arm_name(arm.arm)) + ": " + e.what());
        }
        metrics.arms.push_back(std::move(am));
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

std::uint64_t repetition_seed(std::uint64_t seed, int repetition) {
    return derive_seed({seed, kTagRepetition, static_cast<std::uint64_t>(repetition)});
}

RepetitionReport run_repetition(const ExperimentConfig& config, int repetition, LocalTrainer trainer) {
    ExperimentConfig rep_config = config;
    rep_config.seed = repetition_seed(config.seed, repetition);
    auto state = init_state(rep_config, std::move(trainer));
    RepetitionReport report{repetition, rep_config.seed, {}};
    for (int r = 1; r <= config.rounds; ++r) {
        report.rounds.push_back(run_round(state, r));
    }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, int jobs, LocalTrainer trainer) {
    config.validate();
    ExperimentReport report;
    report.config = config;
    report.repetitions.resize(static_cast<std::size_t>(config.repetitions));

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int rep = next++; rep < config.repetitions; rep = next++) {
            try {
                report.repetitions[static_cast<std::size_t>(rep)] = run_repetition(config, rep, trainer);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(jobs, 1, config.repetitions);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    for (auto arm : config.arms) {
        double reward_sum = 0.0;
        std::size_t reward_n = 0;
        double final_sum = 0.0;
        std::size_t final_n = 0;
        for (const auto& rep : report.repetitions) {
            for (const auto& round : rep.rounds) {
                for (const auto& s : round.arm(arm)->servers) {
                    if (s.cohort.empty()) continue;
                    reward_sum += s.mean_reward;
                    ++reward_n;
                }
            }
            for (const auto& s : rep.rounds.back().arm(arm)->servers) {
                if (s.global_accuracy) {
                    final_sum += *s.global_accuracy;
                    ++final_n;
                }
            }
        }
        report.summary.push_back({arm, reward_n ? reward_sum / static_cast<double>(reward_n) : 0.0,
                                  final_n ? final_sum / static_cast<double>(final_n) : 0.0});
    }
    return report;
}

}  // namespace fedmint
