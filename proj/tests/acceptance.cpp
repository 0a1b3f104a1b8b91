// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "fedmint/bootstrap.hpp"
#include "fedmint/economics.hpp"
#include "fedmint/matching.hpp"
#include "fedmint/simulation.hpp"

#include "helpers.hpp"

using namespace fedmint;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

bool near(double value, double expected, double tol) { return std::abs(value - expected) <= tol; }

Verdict sdr_golden(const fs::path& data) {
    std::ifstream in(data / "device_sample.csv");
    const auto rows = read_interactions_csv(in);
    const auto v = target_values(rows);
    const double mean = sample_mean(v), sd = population_sd(v), cv = coefficient_of_variation(v);
    const double sdp = sd_after_split(rows, Feature::Provider);
    const double rp = sdr(rows, Feature::Provider), rr = sdr(rows, Feature::Region),
                 rd = sdr(rows, Feature::DeviceType);
    const auto tree = build_tree(rows, 3, 10.0);
    Verdict out;
    out.pass = rows.size() == 14 && near(mean, 65.53, 0.02) && near(sd, 13.96, 0.01) &&
               near(cv, 21.31, 0.05) && near(sdp, 8.13, 0.02) && near(rp, 5.83, 0.03) &&
               near(rr, 4.45, 0.03) && near(rd, 1.67, 0.03) && tree.root().split == Feature::Provider;
    out.detail = fmt("mean %.3f sd %.3f cv %.3f", mean, sd, cv) +
                 fmt(" sd|provider %.3f sdr %.3f", sdp, rp) + fmt("/%.3f/%.3f", rr, rd) +
                 " root " + (tree.root().split ? std::string(feature_name(*tree.root().split)) : "leaf");
    return out;
}

Verdict matching_oracle() {
    Rng rng(20240601);
    int members = 0, optimal = 0;
    const int instances = 1000;
    for (int i = 0; i < instances; ++i) {
        const auto p = test::random_problem(rng, static_cast<int>(kOracleMaxDevices),
                                            static_cast<int>(kOracleMaxServers), 4);
        const auto m = run_matching(p);
        const auto all = brute_force_stable(p);
        bool member = false, best = true;
        for (const auto& s : all) {
            member = member || s == m;
            best = best && test::weakly_device_better(m, s, p);
        }
        members += member;
        optimal += member && best;
    }
    return {members == instances && optimal == instances,
            std::to_string(members) + "/" + std::to_string(instances) + " members, " +
                std::to_string(optimal) + " device-optimal"};
}

Verdict reward_arithmetic() {
    Rng rng(77);
    int ok = 0;
    const int cases = 50;
    for (int i = 0; i < cases; ++i) {
        const double op = rng.uniform(0, 3), tr = rng.uniform(0, 3), extra = rng.uniform(0.01, 1);
        const AccuracyFraction a(rng.uniform01()), g(rng.uniform01());
        const auto r = total_reward(op, tr, a, g);
        const bool monotone = total_reward(op + extra, tr, a, g).total >= r.total &&
                              total_reward(op, tr + extra, a, g).total >= r.total;
        const double closer = a.value() + (g.value() - a.value()) * 0.5;
        const bool gap = total_reward(op, tr, AccuracyFraction(closer), g).total >= r.total;
        ok += monotone && gap && r.penalty_factor >= 0.5 && r.penalty_factor <= 1.0;
    }
    const double e1 = total_reward(1.6, 0.56, AccuracyFraction(0.7), AccuracyFraction(0.8)).total;
    const double e2 = total_reward(0, 0, AccuracyFraction(0.3), AccuracyFraction(0.9)).total;
    const double e3 = total_reward(1.0, 1.0, AccuracyFraction(0.9), AccuracyFraction(0.9)).total;
    const bool examples = std::abs(e1 - 2.052) < 1e-9 && std::abs(e2) < 1e-9 && std::abs(e3 - 2.0) < 1e-9;
    return {ok == cases && examples,
            std::to_string(ok) + "/50 property cases" + fmt(", examples %.12f %.1f %.12f", e1, e2, e3)};
}

Verdict motivation() {
    const bool examples = update_calls(0, 0, 0) == 1 && update_calls(5, 3, 0.5) == 10 &&
                          update_calls(2, 4, 1.0) == 11;
    Rng rng(3);
    int increasing = 0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
        const long long prev = rng.uniform_int(0, 100000), ccont = rng.uniform_int(0, 1000);
        const double dr = rng.uniform01();
        increasing += update_calls(prev + 1 + rng.uniform_int(0, 50), ccont, dr) > update_calls(prev, ccont, dr);
    }
    return {examples && increasing == trials,
            std::string(examples ? "examples ok" : "examples wrong") + ", strictly increasing in " +
                std::to_string(increasing) + "/" + std::to_string(trials)};
}

double mean_reward(const RepetitionReport& rep, Arm arm) {
    double sum = 0;
    int n = 0;
    for (const auto& r : rep.rounds) {
        for (const auto& s : r.arm(arm)->servers) {
            if (s.cohort.empty()) continue;
            sum += s.mean_reward;
            ++n;
        }
    }
    return n ? sum / n : 0.0;
}

Verdict dominance(const ExperimentReport& report, double seconds) {
    int reward_wins = 0, cells = 0, cell_wins = 0;
    for (const auto& rep : report.repetitions) {
        reward_wins += mean_reward(rep, Arm::FedMint) >= mean_reward(rep, Arm::Vanilla);
        for (const auto& r : rep.rounds) {
            if (r.round < 3) continue;
            const auto& f = r.arm(Arm::FedMint)->servers;
            const auto& v = r.arm(Arm::Vanilla)->servers;
            for (std::size_t s = 0; s < f.size(); ++s) {
                ++cells;
                cell_wins += f[s].global_accuracy.value_or(0) >= v[s].global_accuracy.value_or(0);
            }
        }
    }
    const auto reps = static_cast<int>(report.repetitions.size());
    const bool pass = reps >= 20 && reward_wins >= 0.9 * reps && cell_wins >= 0.9 * cells && seconds < 120;
    return {pass, "reward " + std::to_string(reward_wins) + "/" + std::to_string(reps) + ", accuracy cells " +
                      std::to_string(cell_wins) + "/" + std::to_string(cells) + fmt(", %.1f s", seconds)};
}

Verdict ablation(const ExperimentReport& report) {
    int wins = 0;
    for (const auto& rep : report.repetitions) {
        double boot = 0, random = 0;
        for (const auto& r : rep.rounds) {
            if (r.round > 5) continue;
            for (const auto& s : r.arm(Arm::FedMint)->servers) boot += s.global_accuracy.value_or(0);
            for (const auto& s : r.arm(Arm::FedMintRandomBootstrap)->servers) random += s.global_accuracy.value_or(0);
        }
        wins += boot >= random;
    }
    const auto reps = static_cast<int>(report.repetitions.size());
    return {wins >= 0.8 * reps, std::to_string(wins) + "/" + std::to_string(reps) + " repetitions"};
}

Verdict model_quality(const ExperimentReport& report) {
    int round5_ok = 0, decreasing = 0;
    double worst5 = 0;
    const int last = report.config.rounds;
    for (const auto& rep : report.repetitions) {
        auto mse = [&](int round) { return rep.rounds.at(static_cast<std::size_t>(round - 1)).arm(Arm::FedMint)->bootstrap_mse; };
        const auto m5 = mse(5), m1 = mse(1), mlast = mse(last);
        if (m5) {
            worst5 = std::max(worst5, *m5);
            round5_ok += *m5 <= 0.02;
        }
        decreasing += m1 && mlast && *mlast <= *m1;
    }
    const auto reps = static_cast<int>(report.repetitions.size());
    return {round5_ok == reps && decreasing >= 0.7 * reps,
            "round-5 mse <= 0.02 in " + std::to_string(round5_ok) + "/" + std::to_string(reps) +
                fmt(" (max %.4f)", worst5) + ", final <= first in " + std::to_string(decreasing) + "/" +
                std::to_string(reps)};
}

Verdict determinism(const std::string& cli, const fs::path& work) {
    fs::remove_all(work);
    fs::create_directories(work);
    auto run = [&](const std::string& dir) {
        const std::string cmd = "\"" + cli + "\" run --seed 7 --no-charts --out \"" + (work / dir).string() +
                                "\" > \"" + (work / (dir + ".log")).string() + "\" 2>&1";
        return std::system(cmd.c_str());
    };
    if (run("a") != 0 || run("b") != 0) return {false, "fedmint run failed"};
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const auto a = slurp(work / "a" / "rounds.csv"), b = slurp(work / "b" / "rounds.csv");
    return {!a.empty() && a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

Verdict invariants(const ExperimentReport& report) {
    std::size_t rounds = 0, violations = 0;
    for (const auto& rep : report.repetitions) {
        for (const auto& r : rep.rounds) {
            for (const auto& arm : r.arms) {
                ++rounds;
                std::set<DeviceId> seen;
                for (const auto& s : arm.servers) {
                    if (static_cast<int>(s.cohort.size()) > report.config.clients_per_server) ++violations;
                    for (const auto& d : s.cohort) {
                        if (!seen.insert(d).second) ++violations;
                    }
                }
            }
        }
    }
    return {rounds > 0 && violations == 0,
            std::to_string(rounds) + " arm-rounds audited, " + std::to_string(violations) + " violations"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedmint acceptance checks"};
    std::string data, cli, work = (fs::temp_directory_path() / "fedmint_acceptance").string();
    app.add_option("--data", data, "Directory holding device_sample.csv")->required();
    app.add_option("--cli", cli, "Path to the fedmint executable")->required();
    app.add_option("--work", work, "Scratch directory");
    CLI11_PARSE(app, argc, argv);

    int failures = 0;
    auto report_line = [&](int id, const std::string& name, const std::function<Verdict()>& check) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " (" << v.detail
                  << ")" << std::endl;
    };
    using clock = std::chrono::steady_clock;
    auto timed = [](const std::function<Verdict()>& f, double limit) {
        return [f, limit] {
            const auto t0 = clock::now();
            auto v = f();
            const double s = std::chrono::duration<double>(clock::now() - t0).count();
            v.detail += fmt(", %.3f s", s);
            v.pass = v.pass && s < limit;
            return v;
        };
    };

    report_line(1, "SDR golden values on the sample dataset", timed([&] { return sdr_golden(data); }, 1.0));
    report_line(2, "matching stability against the exhaustive oracle", timed(matching_oracle, 30.0));
    report_line(3, "reward arithmetic", reward_arithmetic);
    report_line(4, "motivation function", motivation);

    ExperimentConfig config;
    config.repetitions = 20;
    ExperimentReport report;
    double seconds = 0;
    std::string experiment_error;
    try {
        const auto t0 = clock::now();
        report = run_experiment(config, 1);
        seconds = std::chrono::duration<double>(clock::now() - t0).count();
    } catch (const std::exception& e) {
        experiment_error = e.what();
    }
    auto needs_report = [&](std::function<Verdict()> f) {
        return [f, &experiment_error]() -> Verdict {
            if (!experiment_error.empty()) return {false, "experiment failed: " + experiment_error};
            return f();
        };
    };
    report_line(5, "directional dominance over vanilla", needs_report([&] { return dominance(report, seconds); }));
    report_line(6, "bootstrap ablation", needs_report([&] { return ablation(report); }));
    report_line(7, "bootstrap model quality", needs_report([&] { return model_quality(report); }));
    report_line(8, "determinism of fedmint run --seed 7", [&] { return determinism(cli, work); });
    report_line(9, "capacity and uniqueness invariants", needs_report([&] { return invariants(report); }));

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
    return failures ? 1 : 0;
}
