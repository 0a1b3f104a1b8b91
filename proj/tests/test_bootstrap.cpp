#include "doctest.h"

#include <sstream>
#include <vector>

#include "fedmint/bootstrap.hpp"
#include "helpers.hpp"

using namespace fedmint;
using fedmint::test::naive_sd;
using fedmint::test::device_sample;

namespace {

std::vector<double> column(const BootstrapDataset& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.accuracy);
    return v;
}

// Weighted SD of the partitions induced by one attribute, computed directly.
double naive_sd_after(const BootstrapDataset& rows, Feature f) {
    std::map<std::string, std::vector<double>> parts;
    for (const auto& r : rows) parts[feature_value(r.features, f)].push_back(r.accuracy);
    double out = 0;
    for (const auto& [_, v] : parts) {
        out += static_cast<double>(v.size()) / static_cast<double>(rows.size()) * naive_sd(v);
    }
    return out;
}

BootstrapDataset rows_of(std::initializer_list<std::tuple<const char*, const char*, const char*, double>> xs) {
    BootstrapDataset out;
    for (const auto& [p, r, d, a] : xs) out.push_back(new_interaction({p, r, d}, a));
    return out;
}

}  // namespace

TEST_CASE("summary statistics") {
    const std::vector<double> c{4.2, 4.2, 4.2};
    CHECK(population_sd(c) == doctest::Approx(0.0));
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(population_sd(v) == doctest::Approx(1.1180).epsilon(1e-4));
    CHECK(sample_mean(std::vector<double>{7.5}) == 7.5);
    CHECK(sample_mean(std::vector<double>{2, 4}) == 3.0);
    CHECK(coefficient_of_variation(std::vector<double>{2, 4}) == doctest::Approx(33.3333).epsilon(1e-4));
    CHECK(coefficient_of_variation(c) == 0.0);
    CHECK_THROWS(population_sd(std::vector<double>{}));
    CHECK_THROWS_AS(coefficient_of_variation(std::vector<double>{-1, 1}), std::domain_error);
}

TEST_CASE("sample dataset statistics") {
    const auto rows = device_sample();
    REQUIRE(rows.size() == 14);
    const auto v = target_values(rows);
    CHECK(sample_mean(v) == doctest::Approx(65.53).epsilon(0.02 / 65.53));
    CHECK(std::abs(population_sd(v) - 13.96) <= 0.01);
    CHECK(std::abs(coefficient_of_variation(v) - 21.31) <= 0.05);
    CHECK(std::abs(sd_after_split(rows, Feature::Provider) - 8.13) <= 0.02);
    CHECK(std::abs(sdr(rows, Feature::Provider) - 5.83) <= 0.03);
    CHECK(std::abs(sdr(rows, Feature::Region) - 4.45) <= 0.03);
    CHECK(std::abs(sdr(rows, Feature::DeviceType) - 1.67) <= 0.03);
}

TEST_CASE("split statistics agree with a direct computation") {
    const auto rows = device_sample();
    for (auto f : kFeatureSchema) {
        CHECK(sd_after_split(rows, f) == doctest::Approx(naive_sd_after(rows, f)));
        CHECK(sdr(rows, f) == doctest::Approx(naive_sd(column(rows)) - naive_sd_after(rows, f)));
    }
    const auto table = split_table(rows);
    REQUIRE(table.size() == 3);
    CHECK(table[0].attribute == Feature::Provider);
    CHECK(table[0].categories == 4);
}

TEST_CASE("degenerate partitions") {
    auto rows = rows_of({{"P1", "Asia", "A", 50}, {"P1", "Asia", "B", 60}, {"P1", "Asia", "C", 80}});
    CHECK(sd_after_split(rows, Feature::Provider) == doctest::Approx(population_sd(target_values(rows))));
    CHECK(sd_after_split(rows, Feature::DeviceType) == doctest::Approx(0.0));
}

TEST_CASE("the sample dataset tree roots on Provider") {
    const auto rows = device_sample();
    const auto tree = build_tree(rows, 3, 10.0);
    REQUIRE(tree.root().split.has_value());
    CHECK(*tree.root().split == Feature::Provider);

    // The attribute with the largest reduction, found without the library.
    Feature best = Feature::Provider;
    double best_sdr = -1;
    for (auto f : kFeatureSchema) {
        const double r = naive_sd(column(rows)) - naive_sd_after(rows, f);
        if (r > best_sdr) best_sdr = r, best = f;
    }
    CHECK(best == *tree.root().split);

    const auto& p2 = tree.node(tree.root().children.at("P2"));
    CHECK(p2.is_leaf());
    CHECK(p2.value == doctest::Approx((56.37 + 52.88) / 2));
    CHECK(tree.predict({"P2", "Europe", "Phone"}) == doctest::Approx(54.625));
    CHECK(predict(tree, {"P2", "Africa", "Lock"}) == doctest::Approx(54.625));
}

TEST_CASE("unseen categories fall back to the split node's mean") {
    const auto rows = device_sample();
    const auto tree = build_tree(rows, 3, 10.0);
    // Row-weighted mean of the root's leaves is the mean of every row.
    double weighted = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        const auto& node = tree.node(i);
        if (!node.is_leaf()) continue;
        weighted += node.value * static_cast<double>(node.row_count);
        n += node.row_count;
    }
    CHECK(n == rows.size());
    CHECK(tree.predict({"P9", "Asia", "Watch"}) == doctest::Approx(weighted / static_cast<double>(n)));
}

TEST_CASE("stopping rules") {
    auto one = rows_of({{"P1", "Asia", "Watch", 61.5}});
    auto t1 = build_tree(one, 3, 10.0);
    CHECK(t1.root().is_leaf());
    CHECK(t1.predict({"P4", "Europe", "Lock"}) == doctest::Approx(61.5));

    auto constant = rows_of({{"P1", "Asia", "Watch", 70}, {"P2", "Africa", "Lock", 70},
                             {"P3", "Europe", "Phone", 70}, {"P4", "America", "Security", 70}});
    auto t2 = build_tree(constant, 1, 10.0);
    CHECK(t2.root().is_leaf());
    CHECK(t2.predict({"P2", "Asia", "Lock"}) == doctest::Approx(70));

    std::ostringstream out;
    t2.print(out);
    CHECK(out.str() == "leaf 70.00 (n=4)\n");

    CHECK_THROWS(build_tree(BootstrapDataset{}, 3, 10.0));
}

TEST_CASE("tree text rendering") {
    std::ostringstream out;
    build_tree(device_sample(), 3, 10.0).print(out);
    const auto text = out.str();
    CHECK(text.find("Provider = P2 -> 54.62 (n=2)") != std::string::npos);
    CHECK(text.rfind("Provider = P1", 0) == 0);
}

TEST_CASE("csv round trip and errors") {
    std::stringstream buf;
    const auto rows = device_sample();
    write_interactions_csv(buf, rows);
    const auto back = read_interactions_csv(buf);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].features == rows[i].features);
        CHECK(back[i].accuracy == doctest::Approx(rows[i].accuracy));
    }

    std::istringstream bad_header("a,b,c,d\nP1,Asia,Phone,50\n");
    CHECK_THROWS(read_interactions_csv(bad_header));
    std::istringstream bad_value("provider,region,device_type,accuracy\nP1,Asia,Phone,abc\n");
    CHECK_THROWS_WITH(read_interactions_csv(bad_value), doctest::Contains("line 2"));
    std::istringstream out_of_range("provider,region,device_type,accuracy\nP1,Asia,Phone,150\n");
    CHECK_THROWS(read_interactions_csv(out_of_range));
    std::istringstream header_only("provider,region,device_type,accuracy\n");
    CHECK(read_interactions_csv(header_only).empty());
}

TEST_CASE("k-fold mse") {
    auto constant = BootstrapDataset(20, new_interaction({"P1", "Asia", "Phone"}, 60));
    CHECK(kfold_mse(constant, 10, 1).mean_mse == doctest::Approx(0.0));

    const auto rows = device_sample();
    const auto a = kfold_mse(rows, 2, 99);
    const auto b = kfold_mse(rows, 2, 99);
    CHECK(a.fold_mse == b.fold_mse);
    CHECK(a.fold_mse.size() == 2);
    CHECK(a.mean_mse > 0.0);
    CHECK(a.mean_mse < 1.0);
    CHECK_THROWS(kfold_mse(rows, 15, 1));
    CHECK_THROWS(kfold_mse(rows, 1, 1));
}

TEST_CASE("data rate and motivation function") {
    CHECK(data_rate(50, 200) == doctest::Approx(0.25));
    CHECK(data_rate(0, 10) == 0.0);
    CHECK(data_rate(7, 7) == 1.0);
    CHECK_THROWS(data_rate(5, 0));
    CHECK_THROWS(data_rate(11, 10));

    CHECK(update_calls(0, 0, 0.0) == 1);
    CHECK(update_calls(5, 3, 0.5) == 10);
    CHECK(update_calls(2, 4, 1.0) == 11);
    CHECK_THROWS(update_calls(-1, 0, 0.0));

    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const long long prev = rng.uniform_int(0, 1000), ccont = rng.uniform_int(0, 100);
        const double dr = rng.uniform01();
        CHECK(update_calls(prev + 1, ccont, dr) > update_calls(prev, ccont, dr));
        CHECK(update_calls(prev, ccont, dr) >= prev + ccont + 1);
    }
}

namespace {

std::vector<ServerProfile> inquiry_registry(std::size_t a_rows, std::size_t b_rows) {
    std::vector<ServerProfile> servers{fedmint::test::sample_server("R"),
                                       fedmint::test::sample_server("A"),
                                       fedmint::test::sample_server("B")};
    servers[0].calls_budget = 1;
    servers[1].calls_budget = 0;
    servers[2].calls_budget = 3;
    for (std::size_t i = 0; i < a_rows; ++i) {
        servers[1].interaction_dataset.push_back(new_interaction({"P1", "Asia", "Phone"}, 70));
    }
    for (std::size_t i = 0; i < b_rows; ++i) {
        servers[2].interaction_dataset.push_back(new_interaction({"P2", "Europe", "Watch"}, 50));
    }
    return servers;
}

}  // namespace

TEST_CASE("inquiry charges the requester and rewards contributors") {
    auto servers = inquiry_registry(60, 40);
    servers[2].cumulative_contributions = 4;
    BootstrapServer bootstrap;
    const auto out = bootstrap.handle_inquiry("R", {"P1", "Asia", "Watch"}, servers);

    CHECK(servers[0].calls_budget == 0);
    // A: first contribution, share 0.6 -> 0 + 1 + floor(0.6) + 1.
    CHECK(servers[1].calls_budget == 2);
    CHECK(servers[1].cumulative_contributions == 1);
    // B: fifth contribution, share 0.4 -> 3 + 5 + floor(2.0) + 1.
    CHECK(servers[2].calls_budget == 11);
    REQUIRE(out.contributors.size() == 2);
    CHECK(out.contributors[0].data_rate == doctest::Approx(0.6));
    CHECK(out.contributors[1].data_rate == doctest::Approx(0.4));
    CHECK(out.pooled_rows == 100);
    CHECK(out.predicted_accuracy.value() == doctest::Approx(0.70));
    CHECK(bootstrap.inquiries_served() == 1);
}

TEST_CASE("inquiry refusals leave state untouched") {
    auto servers = inquiry_registry(60, 40);
    servers[0].calls_budget = 0;
    const auto before = servers;
    BootstrapServer bootstrap;
    CHECK_THROWS_AS(bootstrap.handle_inquiry("R", {"P1", "Asia", "Phone"}, servers), BudgetExhausted);
    CHECK(servers == before);

    auto empty = inquiry_registry(0, 0);
    const auto empty_before = empty;
    CHECK_THROWS_AS(bootstrap.handle_inquiry("R", {"P1", "Asia", "Phone"}, empty), NoTrainingData);
    CHECK(empty == empty_before);
}

TEST_CASE("partial uploads keep the requested share") {
    auto servers = inquiry_registry(60, 40);
    BootstrapServer bootstrap({{}, 0.5}, 3);
    const auto out = bootstrap.handle_inquiry("R", {"P1", "Asia", "Phone"}, servers);
    CHECK(out.pooled_rows == 50);
    CHECK_THROWS_AS(BootstrapServer(BootstrapOptions{{}, 0.0}), RangeError);
}
