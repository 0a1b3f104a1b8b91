#include "doctest.h"

#include "fedmint/config.hpp"

using namespace fedmint;

TEST_CASE("empty config yields defaults") {
    const auto opts = parse_config("");
    CHECK(opts.experiment.rounds == 15);
    CHECK(opts.experiment.servers == 2);
    CHECK(opts.charts);
    CHECK(opts.jobs == 1);
}

TEST_CASE("default config text parses back to the defaults") {
    const auto opts = parse_config(default_config_text());
    const ExperimentConfig d;
    const auto& c = opts.experiment;
    CHECK(c.seed == d.seed);
    CHECK(c.price_band == d.price_band);
    CHECK(c.latency == d.latency);
    CHECK(c.providers == d.providers);
    CHECK(c.proxy == d.proxy);
    CHECK(c.arms == d.arms);
    CHECK(c.feature_correlation == d.feature_correlation);
    CHECK(c.initial_calls_budget == d.initial_calls_budget);
}

TEST_CASE("sections, comments and value types") {
    const auto opts = parse_config(R"(
# experiment
seed = 7
rounds = 3   # short
arms = ["fedmint", "vanilla"]

[servers]
count = 3

[resources]
latency = [0.5, 4]

[features]
providers = ["A", "B",]

[output]
dir = "out/run"
charts = false
jobs = 4
)");
    const auto& c = opts.experiment;
    CHECK(c.seed == 7);
    CHECK(c.rounds == 3);
    CHECK(c.arms == std::vector<Arm>{Arm::FedMint, Arm::Vanilla});
    CHECK(c.servers == 3);
    CHECK(c.latency == Range{0.5, 4.0});
    CHECK(c.providers == std::vector<std::string>{"A", "B"});
    CHECK(opts.out_dir == "out/run");
    CHECK_FALSE(opts.charts);
    CHECK(opts.jobs == 4);
}

TEST_CASE("errors carry a field path or line") {
    CHECK_THROWS_WITH_AS(parse_config("[bootstrap]\nkfold = 1\n"), doctest::Contains("bootstrap.kfold"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("[servers]\ncount = \"two\"\n"),
                         doctest::Contains("servers.count"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("[servers]\nbogus = 1\n"), doctest::Contains("servers.bogus"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("seed = \n"), doctest::Contains("line 1"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("a = 1\na = 2\n"), doctest::Contains("duplicate"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("arms = [\"greedy\"]\n"), doctest::Contains("arms"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("[resources]\ncpu = [1]\n"), doctest::Contains("resources.cpu"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("rounds = 99999999999\n"), doctest::Contains("rounds"), ConfigError);
    CHECK_THROWS_AS(parse_config("name = \"unterminated\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/fedmint.toml"), ConfigError);
}
