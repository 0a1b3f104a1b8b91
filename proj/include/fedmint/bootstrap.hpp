#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedmint/domain.hpp"
#include "fedmint/rng.hpp"

namespace fedmint {

// ---------------------------------------------------------------------------
// Interaction dataset schema
// ---------------------------------------------------------------------------

enum class Feature { Provider, Region, DeviceType };

/// Declared schema order. SDR ties resolve to the earlier feature.
inline constexpr std::array<Feature, 3> kFeatureSchema = {Feature::Provider, Feature::Region,
                                                         Feature::DeviceType};

std::string_view feature_name(Feature f) noexcept;
std::optional<Feature> parse_feature(std::string_view name) noexcept;
const std::string& feature_value(const DeviceFeatures& features, Feature f) noexcept;

using BootstrapDataset = std::vector<InteractionRecord>;

/// CSV with header `provider,region,device_type,accuracy`; accuracy in percent.
/// Throws std::runtime_error naming the 1-based line on malformed input.
BootstrapDataset read_interactions_csv(std::istream& in);
void write_interactions_csv(std::ostream& out, std::span<const InteractionRecord> rows);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Population SD (divides by n).
double population_sd(std::span<const double> values);
double sample_mean(std::span<const double> values);
/// SD / mean * 100.
double coefficient_of_variation(std::span<const double> values);

std::vector<double> target_values(std::span<const InteractionRecord> rows);

/// Frequency-weighted mean of the per-category target SDs.
double sd_after_split(std::span<const InteractionRecord> rows, Feature attribute);
/// SD(target) - sd_after_split(rows, attribute).
double sdr(std::span<const InteractionRecord> rows, Feature attribute);

struct SplitSummary {
    Feature attribute;
    std::size_t categories = 0;
    double sd_after = 0.0;
    double reduction = 0.0;
};

std::vector<SplitSummary> split_table(std::span<const InteractionRecord> rows);

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

struct TreeOptions {
    int min_instances = 3;       // branches with fewer rows become leaves
    double cv_threshold = 10.0;  // percent; branches below it become leaves
};

/// ID3-style regression tree split by standard deviation reduction. Nodes
/// live in a flat vector; node 0 is the root.
class RegressionTree {
public:
    struct Node {
        double value = 0.0;  // mean target of the training rows reaching this node
        std::size_t row_count = 0;
        std::optional<Feature> split;
        std::map<std::string, std::size_t> children;  // category -> node index

        [[nodiscard]] bool is_leaf() const noexcept { return !split.has_value(); }
    };

    static RegressionTree build(std::span<const InteractionRecord> rows, TreeOptions options = {});

    /// Predicted accuracy in percent. A category missing at a split yields the
    /// training mean of that split node.
    [[nodiscard]] double predict(const DeviceFeatures& features) const;

    [[nodiscard]] const Node& root() const { return nodes_.front(); }
    [[nodiscard]] const Node& node(std::size_t index) const { return nodes_.at(index); }
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t depth() const;

    /// Indented rendering, one line per branch.
    void print(std::ostream& out) const;

private:
    RegressionTree() = default;
    std::size_t grow(std::vector<const InteractionRecord*>& rows, std::vector<Feature>& unused,
                     const TreeOptions& options);

    std::vector<Node> nodes_;
};

RegressionTree build_tree(std::span<const InteractionRecord> rows, int min_instances,
                          double cv_threshold);
double predict(const RegressionTree& tree, const DeviceFeatures& features);

struct KFoldResult {
    std::vector<double> fold_mse;  // fraction^2 units
    double mean_mse = 0.0;
};

/// Seeded shuffle, k contiguous folds, squared error in fraction units.
KFoldResult kfold_mse(std::span<const InteractionRecord> rows, int k, std::uint64_t seed,
                      TreeOptions options = {});

// ---------------------------------------------------------------------------
// Motivation function and inquiry protocol
// ---------------------------------------------------------------------------

/// Share of the pooled upload contributed by one server.
double data_rate(long long uploaded_size, long long total_uploaded);

/// calls_prev + ccont + floor(ccont * dr) + 1.
long long update_calls(long long calls_prev, long long ccont, double dr);

class BudgetExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoTrainingData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Contribution {
    ServerId server_id;
    std::size_t uploaded_rows = 0;
    double data_rate = 0.0;
    long long calls_granted = 0;
};

struct InquiryOutcome {
    AccuracyFraction predicted_accuracy;
    std::vector<Contribution> contributors;
    std::size_t pooled_rows = 0;
};

struct BootstrapOptions {
    TreeOptions tree;
    double upload_fraction = 1.0;  // share of its dataset each server uploads
};

/// The central bootstrapping server. Owns no server state; inquiries mutate
/// the registry passed in and must be issued serially.
class BootstrapServer {
public:
    explicit BootstrapServer(BootstrapOptions options = {}, std::uint64_t seed = 0);

    /// Charges the requester one call, pools every server's upload, rewards
    /// each non-requesting uploader, rebuilds the tree and predicts.
    /// Throws BudgetExhausted or NoTrainingData; in both cases no server state
    /// is modified.
    InquiryOutcome handle_inquiry(const ServerId& requester, const DeviceFeatures& newcomer,
                                  std::span<ServerProfile> servers);

    [[nodiscard]] const BootstrapOptions& options() const noexcept { return options_; }
    [[nodiscard]] std::size_t inquiries_served() const noexcept { return served_; }

private:
    std::vector<InteractionRecord> upload(const ServerProfile& server);

    BootstrapOptions options_;
    Rng rng_;
    std::size_t served_ = 0;
};

}  // namespace fedmint
