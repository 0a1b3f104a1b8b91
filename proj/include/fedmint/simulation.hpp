#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedmint/bootstrap.hpp"
#include "fedmint/domain.hpp"
#include "fedmint/matching.hpp"
#include "fedmint/rng.hpp"

namespace fedmint {

enum class Arm { FedMint, Vanilla, FedMintRandomBootstrap };

std::string_view arm_name(Arm arm) noexcept;
std::optional<Arm> parse_arm(std::string_view name) noexcept;

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    bool operator==(const Range&) const = default;
};

/// Stand-in for local MNIST training. See accuracy_proxy().
struct AccuracyProxyParams {
    double base = 0.35;
    double size_weight = 0.40;
    double label_weight = 0.05;
    double experience_gain = 0.02;
    int experience_cap = 5;
    double noise = 0.03;
    double floor = 0.05;
    double ceiling = 0.99;

    bool operator==(const AccuracyProxyParams&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    int repetitions = 5;
    int initial_devices = 100;
    int arrivals_per_round = 10;
    int rounds = 15;
    int servers = 2;
    int clients_per_server = 10;

    // Device resources and links.
    Range cpu{300.0, 700.0};          // MIPS
    Range ram{400.0, 900.0};          // MB
    Range bandwidth{500.0, 900.0};    // Mbps
    Range promised_fraction{0.5, 1.0};
    Range latency{0.1, 5.0};          // seconds

    // Per-server unit prices, drawn once per repetition.
    Range price_cpu{0.001, 0.003};
    Range price_ram{0.0005, 0.0015};
    Range price_band{0.002, 0.004};

    // Non-IID shards.
    int num_classes = 10;
    int min_labels = 1;
    int max_labels = 4;
    int min_data_size = 100;
    int max_data_size = 450;
    double test_split = 0.2;

    // Categorical vocabularies and how strongly they track the shard.
    std::vector<std::string> providers{"P1", "P2", "P3", "P4"};
    std::vector<std::string> regions{"Africa", "America", "Asia", "Europe"};
    std::vector<std::string> device_types{"Lock", "Phone", "Security", "Watch"};
    std::vector<std::string> data_types{"mnist"};
    double feature_correlation = 0.7;

    // Bootstrapping.
    int min_instances = 3;
    double cv_threshold = 10.0;  // percent
    long long initial_calls_budget = 5;
    double upload_fraction = 1.0;
    int kfold = 10;
    double prior_accuracy = 0.5;

    AccuracyProxyParams proxy;
    std::vector<Arm> arms{Arm::FedMint, Arm::Vanilla, Arm::FedMintRandomBootstrap};

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Local training hook: shard and participation count in, accuracy out.
using LocalTrainer = std::function<AccuracyFraction(const DeviceProfile&, int participation, Rng&)>;

// ---------------------------------------------------------------------------
// Population
// ---------------------------------------------------------------------------

struct DataShard {
    std::set<int> labels;
    int data_size = 0;
    int test_data_size = 0;
};

/// 1..4 labels without replacement from num_classes, size uniform in
/// [min_data_size, max_data_size], test split rounded up.
DataShard assign_noniid_data(const ExperimentConfig& config, Rng& rng);

/// Global index of the first device arriving at `round` (round 0 = initial set).
int first_device_index(const ExperimentConfig& config, int round);

/// Devices created at `round`: the initial set for round 0, arrivals after.
/// Attributes depend only on (config.seed, device index).
std::vector<DeviceProfile> generate_population(const ExperimentConfig& config, int round);

std::vector<ServerProfile> generate_servers(const ExperimentConfig& config);

/// Adds raw latencies for every (server, device) link of the given devices.
void generate_latencies(const ExperimentConfig& config, std::span<const ServerProfile> servers,
                        std::span<const DeviceProfile> devices, LatencyMatrix& latency);

std::string device_id_for(int index);

// ---------------------------------------------------------------------------
// Training stand-in and baseline
// ---------------------------------------------------------------------------

/// base + size_weight * (size - 100) / 350 + label_weight * (labels - 1)
/// + experience_gain * min(participation, cap) + U[-noise, noise], clipped.
AccuracyFraction accuracy_proxy(const DeviceProfile& device, int participation_count, Rng& rng,
                                const AccuracyProxyParams& params = {});

/// Random selection: k distinct compatible devices per server, disjoint
/// across servers. Short pools yield smaller cohorts.
Matching vanilla_select(std::span<const DeviceProfile> devices,
                        std::span<const ServerProfile> servers, int k, Rng& rng);

// ---------------------------------------------------------------------------
// Rounds and experiments
// ---------------------------------------------------------------------------

struct ServerRoundMetrics {
    ServerId server_id;
    std::optional<double> global_accuracy;  // absent for an empty cohort
    std::vector<DeviceId> cohort;
    double mean_reward = 0.0;
    int inquiries = 0;
    int refusals = 0;
    int no_data = 0;
};

struct ArmRoundMetrics {
    Arm arm = Arm::FedMint;
    std::vector<ServerRoundMetrics> servers;
    std::optional<double> bootstrap_mse;  // k-fold MSE of the pooled dataset after the round
    std::size_t pooled_rows = 0;
    std::size_t proposals = 0;
};

struct RoundMetrics {
    int round = 0;
    std::size_t population = 0;
    std::vector<ArmRoundMetrics> arms;

    [[nodiscard]] const ArmRoundMetrics* arm(Arm a) const;
};

struct ArmState {
    Arm arm = Arm::FedMint;
    std::vector<DeviceProfile> devices;  // same order as the shared population
    std::vector<ServerProfile> servers;
    std::map<ServerId, AccuracyFraction> previous_global;
    BootstrapServer bootstrap;
};

/// Full state of one repetition. Arms share the population and latencies but
/// own their histories, server datasets and budgets.
struct SimulationState {
    ExperimentConfig config;
    std::vector<DeviceProfile> population;
    LatencyMatrix latency;
    std::vector<ArmState> arms;
    LocalTrainer trainer;
};

SimulationState init_state(const ExperimentConfig& config, LocalTrainer trainer = {});

/// Admits this round's arrivals, then selects, trains and rewards per arm.
/// Every matching passes audit_matching before metrics are recorded.
RoundMetrics run_round(SimulationState& state, int round);

struct RepetitionReport {
    int repetition = 0;
    std::uint64_t seed = 0;
    std::vector<RoundMetrics> rounds;
};

struct ArmSummary {
    Arm arm = Arm::FedMint;
    double mean_reward = 0.0;
    double mean_final_accuracy = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RepetitionReport> repetitions;
    std::vector<ArmSummary> summary;
};

std::uint64_t repetition_seed(std::uint64_t seed, int repetition);

RepetitionReport run_repetition(const ExperimentConfig& config, int repetition,
                                LocalTrainer trainer = {});

/// Runs every repetition, up to `jobs` at a time.
ExperimentReport run_experiment(const ExperimentConfig& config, int jobs = 1,
                                LocalTrainer trainer = {});

}  // namespace fedmint
