#include "fedmint/bootstrap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fedmint {

std::string_view feature_name(Feature f) noexcept {
    switch (f) {
        case Feature::Provider: return "Provider";
        case Feature::Region: return "Region";
        case Feature::DeviceType: return "DeviceType";
    }
    return "?";
}

std::optional<Feature> parse_feature(std::string_view name) noexcept {
    for (auto f : kFeatureSchema) {
        if (feature_name(f) == name) {
            return f;
        }
    }
    if (name == "provider") return Feature::Provider;
    if (name == "region") return Feature::Region;
    if (name == "device_type") return Feature::DeviceType;
    return std::nullopt;
}

const std::string& feature_value(const DeviceFeatures& features, Feature f) noexcept {
    switch (f) {
        case Feature::Provider: return features.provider;
        case Feature::Region: return features.region;
        case Feature::DeviceType: break;
    }
    return features.device_type;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kCsvHeader = "provider,region,device_type,accuracy";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

BootstrapDataset read_interactions_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw std::runtime_error("line 1: missing header");
    }
    ++line_no;
    if (trim(line) != kCsvHeader) {
        csv_error(line_no, "expected header '" + std::string(kCsvHeader) + "'");
    }
    BootstrapDataset rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_commas(line);
        if (fields.size() != 4) {
            csv_error(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t i = 0; i < 3; ++i) {
            if (fields[i].empty()) csv_error(line_no, "empty categorical field");
        }
        double acc = 0.0;
        auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), acc);
        if (ec != std::errc{} || ptr != fields[3].data() + fields[3].size()) {
            csv_error(line_no, "accuracy is not a number: '" + std::string(fields[3]) + "'");
        }
        if (!(acc >= 0.0 && acc <= 100.0)) {
            csv_error(line_no, "accuracy outside [0, 100]");
        }
        rows.push_back({{std::string(fields[0]), std::string(fields[1]), std::string(fields[2])}, acc});
    }
    return rows;
}

void write_interactions_csv(std::ostream& out, std::span<const InteractionRecord> rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", r.accuracy);
        out << r.features.provider << ',' << r.features.region << ',' << r.features.device_type
            << ',' << buf << '\n';
    }
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

double sample_mean(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("sample_mean of empty sample");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_sd(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("population_sd of empty sample");
    }
    const double mean = sample_mean(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(values.size()));
}

double coefficient_of_variation(std::span<const double> values) {
    const double mean = sample_mean(values);
    if (mean == 0.0) {
        throw std::domain_error("coefficient of variation undefined for zero mean");
    }
    return population_sd(values) / mean * 100.0;
}

std::vector<double> target_values(std::span<const InteractionRecord> rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.accuracy);
    return out;
}

namespace {

using RowRefs = std::vector<const InteractionRecord*>;

std::map<std::string, RowRefs> partition(const RowRefs& rows, Feature attribute) {
    std::map<std::string, RowRefs> groups;
    for (const auto* r : rows) {
        groups[feature_value(r->features, attribute)].push_back(r);
    }
    return groups;
}

std::vector<double> targets_of(const RowRefs& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto* r : rows) out.push_back(r->accuracy);
    return out;
}

double weighted_split_sd(const std::map<std::string, RowRefs>& groups, std::size_t n) {
    double sd = 0.0;
    for (const auto& [category, members] : groups) {
        const auto t = targets_of(members);
        sd += static_cast<double>(members.size()) / static_cast<double>(n) * population_sd(t);
    }
    return sd;
}

RowRefs refs_of(std::span<const InteractionRecord> rows) {
    RowRefs refs;
    refs.reserve(rows.size());
    for (const auto& r : rows) refs.push_back(&r);
    return refs;
}

}  // namespace

double sd_after_split(std::span<const InteractionRecord> rows, Feature attribute) {
    if (rows.empty()) {
        throw std::invalid_argument("sd_after_split on empty dataset");
    }
    const auto refs = refs_of(rows);
    return weighted_split_sd(partition(refs, attribute), refs.size());
}

double sdr(std::span<const InteractionRecord> rows, Feature attribute) {
    const auto t = target_values(rows);
    return population_sd(t) - sd_after_split(rows, attribute);
}

std::vector<SplitSummary> split_table(std::span<const InteractionRecord> rows) {
    std::vector<SplitSummary> out;
    const auto refs = refs_of(rows);
    for (auto f : kFeatureSchema) {
        const auto groups = partition(refs, f);
        SplitSummary s{f, groups.size(), weighted_split_sd(groups, refs.size()), 0.0};
        s.reduction = sdr(rows, f);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

RegressionTree RegressionTree::build(std::span<const InteractionRecord> rows, TreeOptions options) {
    if (rows.empty()) {
        throw std::invalid_argument("cannot build a tree from an empty dataset");
    }
    if (options.min_instances < 1) {
        throw std::invalid_argument("min_instances must be at least 1");
    }
    if (!(options.cv_threshold > 0.0)) {
        throw std::invalid_argument("cv_threshold must be positive");
    }
    RegressionTree tree;
    auto refs = refs_of(rows);
    std::vector<Feature> unused(kFeatureSchema.begin(), kFeatureSchema.end());
    tree.grow(refs, unused, options);
    return tree;
}

std::size_t RegressionTree::grow(RowRefs& rows, std::vector<Feature>& unused,
                                 const TreeOptions& options) {
    const auto targets = targets_of(rows);
    const std::size_t index = nodes_.size();
    nodes_.push_back(Node{sample_mean(targets), rows.size(), std::nullopt, {}});

    const double sd = population_sd(targets);
    if (rows.size() < static_cast<std::size_t>(options.min_instances) || sd == 0.0) {
        return index;
    }
    const double mean = nodes_[index].value;
    if (mean != 0.0 && sd / mean * 100.0 < options.cv_threshold) {
        return index;
    }

    // Only attributes that actually separate the rows are candidates.
    std::optional<Feature> best;
    double best_sdr = -1.0;
    std::map<std::string, RowRefs> best_groups;
    for (auto f : unused) {
        auto groups = partition(rows, f);
        if (groups.size() < 2) continue;
        const double reduction = sd - weighted_split_sd(groups, rows.size());
        if (reduction > best_sdr) {  // strict: earlier schema entry wins ties
            best_sdr = reduction;
            best = f;
            best_groups = std::move(groups);
        }
    }
    if (!best) {
        return index;
    }

    nodes_[index].split = best;
    std::vector<Feature> remaining;
    for (auto f : unused) {
        if (f != *best) remaining.push_back(f);
    }
    for (auto& [category, members] : best_groups) {
        const std::size_t child = grow(members, remaining, options);
        nodes_[index].children.emplace(category, child);
    }
    return index;
}

double RegressionTree::predict(const DeviceFeatures& features) const {
    std::size_t at = 0;
    while (!nodes_[at].is_leaf()) {
        const auto& n = nodes_[at];
        auto it = n.children.find(feature_value(features, *n.split));
        if (it == n.children.end()) {
            return n.value;
        }
        at = it->second;
    }
    return nodes_[at].value;
}

std::size_t RegressionTree::depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [at, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        for (const auto& [cat, child] : nodes_[at].children) {
            stack.emplace_back(child, d + 1);
        }
    }
    return deepest;
}

void RegressionTree::print(std::ostream& out) const {
    auto fmt = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(2) << v;
        return s.str();
    };
    if (root().is_leaf()) {
        out << "leaf " << fmt(root().value) << " (n=" << root().row_count << ")\n";
        return;
    }
    auto walk = [&](auto&& self, std::size_t at, int indent) -> void {
        const auto& n = nodes_[at];
        for (const auto& [category, child] : n.children) {
            const auto& c = nodes_[child];
            out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << feature_name(*n.split)
                << " = " << category;
            if (c.is_leaf()) {
                out << " -> " << fmt(c.value) << " (n=" << c.row_count << ")\n";
            } else {
                out << '\n';
                self(self, child, indent + 1);
            }
        }
    };
    walk(walk, 0, 0);
}

RegressionTree build_tree(std::span<const InteractionRecord> rows, int min_instances,
                          double cv_threshold) {
    return RegressionTree::build(rows, TreeOptions{min_instances, cv_threshold});
}

double predict(const RegressionTree& tree, const DeviceFeatures& features) {
    return tree.predict(features);
}

KFoldResult kfold_mse(std::span<const InteractionRecord> rows, int k, std::uint64_t seed,
                      TreeOptions options) {
    if (k < 2) {
        throw std::invalid_argument("k must be at least 2");
    }
    if (rows.size() < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("k-fold needs at least k rows (have " +
                                    std::to_string(rows.size()) + ", k=" + std::to_string(k) + ")");
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n = rows.size();
    const auto folds = static_cast<std::size_t>(k);
    KFoldResult result;
    std::size_t start = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t len = n / folds + (f < n % folds ? 1 : 0);
        std::vector<InteractionRecord> train;
        train.reserve(n - len);
        for (std::size_t i = 0; i < n; ++i) {
            if (i < start || i >= start + len) train.push_back(rows[order[i]]);
        }
        const auto tree = RegressionTree::build(train, options);
        double se = 0.0;
        for (std::size_t i = start; i < start + len; ++i) {
            const auto& r = rows[order[i]];
            const double err = (tree.predict(r.features) - r.accuracy) / 100.0;
            se += err * err;
        }
        result.fold_mse.push_back(se / static_cast<double>(len));
        start += len;
    }
    result.mean_mse = sample_mean(result.fold_mse);
    return result;
}

// ---------------------------------------------------------------------------
// Motivation function and inquiries
// ---------------------------------------------------------------------------

double data_rate(long long uploaded_size, long long total_uploaded) {
    if (total_uploaded <= 0) {
        throw std::invalid_argument("data_rate needs a positive total upload");
    }
    if (uploaded_size < 0 || uploaded_size > total_uploaded) {
        throw RangeError("uploaded size outside [0, total]");
    }
    return static_cast<double>(uploaded_size) / static_cast<double>(total_uploaded);
}

long long update_calls(long long calls_prev, long long ccont, double dr) {
    if (calls_prev < 0 || ccont < 0 || !(dr >= 0.0)) {
        throw std::invalid_argument("update_calls inputs must be nonnegative");
    }
    const auto bonus = static_cast<long long>(std::floor(static_cast<double>(ccont) * dr));
    return calls_prev + ccont + bonus + 1;
}

BootstrapServer::BootstrapServer(BootstrapOptions options, std::uint64_t seed)
    : options_(options), rng_(seed) {
    if (!(options_.upload_fraction > 0.0 && options_.upload_fraction <= 1.0)) {
        throw RangeError("upload_fraction outside (0, 1]");
    }
}

std::vector<InteractionRecord> BootstrapServer::upload(const ServerProfile& server) {
    const auto& data = server.interaction_dataset;
    if (options_.upload_fraction >= 1.0 || data.empty()) {
        return data;
    }
    const auto keep = static_cast<std::size_t>(
        std::ceil(options_.upload_fraction * static_cast<double>(data.size())));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_.shuffle(order);
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<InteractionRecord> out;
    out.reserve(keep);
    for (auto i : order) out.push_back(data[i]);
    return out;
}

InquiryOutcome BootstrapServer::handle_inquiry(const ServerId& requester,
                                               const DeviceFeatures& newcomer,
                                               std::span<ServerProfile> servers) {
    auto req = std::find_if(servers.begin(), servers.end(),
                            [&](const ServerProfile& s) { return s.server_id == requester; });
    if (req == servers.end()) {
        throw std::invalid_argument("unknown requesting server " + requester);
    }
    if (req->calls_budget < 1) {
        throw BudgetExhausted("bootstrap budget exhausted for " + requester);
    }

    std::vector<std::vector<InteractionRecord>> uploads;
    uploads.reserve(servers.size());
    std::size_t total = 0;
    for (const auto& s : servers) {
        uploads.push_back(upload(s));
        total += uploads.back().size();
    }
    if (total == 0) {
        throw NoTrainingData("no server holds interaction data");
    }

    req->calls_budget -= 1;
    InquiryOutcome outcome;
    outcome.pooled_rows = total;
    std::vector<InteractionRecord> pooled;
    pooled.reserve(total);
    for (std::size_t i = 0; i < servers.size(); ++i) {
        auto& s = servers[i];
        const auto rows = uploads[i].size();
        pooled.insert(pooled.end(), uploads[i].begin(), uploads[i].end());
        if (s.server_id == requester || rows == 0) continue;
        s.cumulative_contributions += 1;
        const double dr = data_rate(static_cast<long long>(rows), static_cast<long long>(total));
        const long long before = s.calls_budget;
        s.calls_budget = update_calls(before, s.cumulative_contributions, dr);
        outcome.contributors.push_back({s.server_id, rows, dr, s.calls_budget - before});
    }

    const auto tree = RegressionTree::build(pooled, options_.tree);
    outcome.predicted_accuracy =
        AccuracyFraction::from_percent(std::clamp(tree.predict(newcomer), 0.0, 100.0));
    ++served_;
    return outcome;
}

}  // namespace fedmint
