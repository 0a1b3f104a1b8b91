#include "doctest.h"

#include "fedmint/economics.hpp"
#include "fedmint/rng.hpp"
#include "helpers.hpp"

using namespace fedmint;

TEST_CASE("operational earnings") {
    CHECK(operational_earnings(500, 600, 0.002, 0.001) == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(operational_earnings(0, 0, 0.002, 0.001) == 0.0);
    CHECK(operational_earnings(300, 400, 0.001, 0.001) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("traffic earnings shrink with latency") {
    CHECK(traffic_earnings(700, 0.001, 0.2) == doctest::Approx(0.56).epsilon(1e-12));
    CHECK(traffic_earnings(700, 0.001, 1.0) == 0.0);
    CHECK(traffic_earnings(123, 0.7, 1.0) == 0.0);
    CHECK(traffic_earnings(500, 0.002, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(traffic_earnings(500, 0.002, 1.2), RangeError);
}

TEST_CASE("accuracy gap") {
    CHECK(accuracy_gap_std(AccuracyFraction(0.7), AccuracyFraction(0.8)) == doctest::Approx(0.05));
    CHECK(accuracy_gap_std(AccuracyFraction(0.4), AccuracyFraction(0.4)) == 0.0);
    CHECK(accuracy_gap_std(AccuracyFraction(0.0), AccuracyFraction(1.0)) == doctest::Approx(0.5));
}

TEST_CASE("total reward examples") {
    auto r = total_reward(1.6, 0.56, AccuracyFraction(0.7), AccuracyFraction(0.8));
    CHECK(std::abs(r.total - 2.052) < 1e-9);
    CHECK(r.penalty_factor == doctest::Approx(0.95));
    CHECK(total_reward(0, 0, AccuracyFraction(0.1), AccuracyFraction(0.9)).total == 0.0);
    CHECK(std::abs(total_reward(1.0, 1.0, AccuracyFraction(0.9), AccuracyFraction(0.9)).total - 2.0) < 1e-9);
}

TEST_CASE("device reward composes the three terms") {
    auto d = fedmint::test::sample_device("D1");
    d.cpu_promised = 500;
    d.ram_promised = 600;
    d.bandwidth_promised = 700;
    auto s = fedmint::test::sample_server("S1");
    s.price_cpu = 0.002;
    s.price_ram = 0.001;
    s.price_band = 0.001;
    auto r = device_reward(d, s, 0.2, AccuracyFraction(0.7), AccuracyFraction(0.8));
    CHECK(r.operational == doctest::Approx(1.6));
    CHECK(r.traffic == doctest::Approx(0.56));
    CHECK(std::abs(r.total - 2.052) < 1e-9);
}

TEST_CASE("reward properties over random inputs") {
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const double op = rng.uniform(0, 5), tr = rng.uniform(0, 5);
        const AccuracyFraction a(rng.uniform01()), g(rng.uniform01());
        const auto r = total_reward(op, tr, a, g);
        CHECK(r.penalty_factor >= 0.5);
        CHECK(r.penalty_factor <= 1.0);
        CHECK(r.total <= op + tr + 1e-12);
        CHECK(total_reward(op + 0.1, tr, a, g).total >= r.total);
        CHECK(total_reward(op, tr + 0.1, a, g).total >= r.total);
        const double lat = rng.uniform01();
        CHECK(traffic_earnings(500, 0.002, std::min(1.0, lat + 0.1)) <= traffic_earnings(500, 0.002, lat));
    }
}
