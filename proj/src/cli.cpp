#include "fedmint/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "fedmint/bootstrap.hpp"
#include "fedmint/config.hpp"
#include "fedmint/matching_json.hpp"
#include "fedmint/report_io.hpp"
#include "fedmint/simulation.hpp"

namespace fedmint::cli {

namespace {

struct RunOverrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds;
    std::optional<int> reps;
    std::optional<int> jobs;
    std::optional<std::string> out;
    bool no_charts = false;
};

int cmd_run(const RunOverrides& o, std::ostream& out, std::ostream& err) {
    RunOptions opts;
    try {
        if (!o.config.empty()) opts = load_config(o.config);
        auto& c = opts.experiment;
        if (o.seed) c.seed = *o.seed;
        if (o.rounds) c.rounds = *o.rounds;
        if (o.reps) c.repetitions = *o.reps;
        if (o.jobs) opts.jobs = *o.jobs;
        if (o.out) opts.out_dir = *o.out;
        if (o.no_charts) opts.charts = false;
        if (opts.jobs < 1) throw ConfigError("--jobs: must be at least 1");
        c.validate();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    try {
        const auto report = run_experiment(opts.experiment, opts.jobs);
        write_outputs(opts.out_dir, report, opts.charts);
        out << "wrote " << (opts.out_dir / "rounds.csv").string() << '\n';
        for (const auto& s : report.summary) {
            out << std::left << std::setw(26) << arm_name(s.arm) << std::fixed << std::setprecision(4)
                << "mean reward " << s.mean_reward << "  final accuracy " << s.mean_final_accuracy
                << '\n';
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

}  // namespace

int cmd_tree(const std::string& dataset, int min_instances, double cv_threshold,
             std::ostream& out, std::ostream& err) {
    BootstrapDataset rows;
    try {
        std::ifstream in(dataset);
        if (!in) throw std::runtime_error("cannot open " + dataset);
        rows = read_interactions_csv(in);
        if (rows.empty()) throw std::runtime_error("dataset has no rows");
    } catch (const std::exception& e) {
        err << "error: " << dataset << ": " << e.what() << '\n';
        return kInputError;
    }

    try {
        const auto tree = build_tree(rows, min_instances, cv_threshold);
        const auto values = target_values(rows);
        out << std::fixed << std::setprecision(2);
        out << "n = " << rows.size() << '\n'
            << "mean = " << sample_mean(values) << '\n'
            << "sd = " << population_sd(values) << '\n';
        try {
            out << "cv = " << coefficient_of_variation(values) << "%\n";
        } catch (const std::domain_error&) {
            out << "cv = undefined\n";
        }
        out << "\nattribute    categories  sd_after  sdr\n";
        for (const auto& s : split_table(rows)) {
            out << std::left << std::setw(13) << feature_name(s.attribute) << std::right
                << std::setw(10) << s.categories << std::setw(10) << s.sd_after << std::setw(7)
                << s.reduction << '\n';
        }
        out << "\ntree:\n";
        tree.print(out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

int cmd_match(const std::string& problem_path, bool oracle, std::ostream& out, std::ostream& err) {
    MatchingProblem problem;
    try {
        std::ifstream in(problem_path);
        if (!in) throw std::runtime_error("cannot open file");
        problem = problem_from_json(nlohmann::json::parse(in));
    } catch (const std::exception& e) {
        err << "error: " << problem_path << ": " << e.what() << '\n';
        return kInputError;
    }

    try {
        MatchingStats stats;
        const Matching m = run_matching(problem, &stats);
        for (const auto& [server, devices] : m.server_to_devices) {
            out << server << ':';
            for (const auto& d : devices) out << ' ' << d;
            out << '\n';
        }
        std::vector<DeviceId> unmatched;
        for (const auto& [device, server] : m.device_to_server) {
            if (!server) unmatched.push_back(device);
        }
        if (!unmatched.empty()) {
            out << "unmatched:";
            for (const auto& d : unmatched) out << ' ' << d;
            out << '\n';
        }
        out << "proposals: " << stats.proposals << '\n';
        out << "stable: " << (is_stable(m, problem) ? "true" : "false") << '\n';

        if (oracle) {
            std::vector<Matching> all;
            try {
                all = brute_force_stable(problem);
            } catch (const OracleRefused& e) {
                err << "refused: " << e.what() << '\n';
                return kRefused;
            }
            const bool member = std::find(all.begin(), all.end(), m) != all.end();
            out << "oracle: " << all.size() << " stable matching" << (all.size() == 1 ? "" : "s")
                << ", result is " << (member ? "a member" : "NOT a member") << '\n';
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bilateral client selection for federated learning"};
    app.require_subcommand(1);

    RunOverrides run;
    auto* run_cmd = app.add_subcommand("run", "Run the multi-round experiment");
    run_cmd->add_option("--config", run.config, "TOML config file");
    run_cmd->add_option("--seed", run.seed, "Base seed");
    run_cmd->add_option("--rounds", run.rounds, "Rounds per repetition");
    run_cmd->add_option("--reps", run.reps, "Repetitions");
    run_cmd->add_option("--jobs", run.jobs, "Repetitions run in parallel");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_flag("--no-charts", run.no_charts, "Skip SVG charts");

    std::string dataset;
    int min_instances = 3;
    double cv = 10.0;
    auto* tree_cmd = app.add_subcommand("tree", "Fit the SDR regression tree to a CSV dataset");
    tree_cmd->add_option("dataset", dataset, "CSV with provider,region,device_type,accuracy")
        ->required();
    tree_cmd->add_option("--min-instances", min_instances, "Smallest branch that may split");
    tree_cmd->add_option("--cv", cv, "Coefficient of variation threshold in percent");

    std::string problem;
    bool oracle = false;
    auto* match_cmd = app.add_subcommand("match", "Solve a matching problem given as JSON");
    match_cmd->add_option("problem", problem, "Problem JSON")->required();
    match_cmd->add_flag("--oracle", oracle, "Cross-check against exhaustive enumeration");

    auto* config_cmd = app.add_subcommand("default-config", "Print the default config file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    if (*run_cmd) return cmd_run(run, out, err);
    if (*tree_cmd) return cmd_tree(dataset, min_instances, cv, out, err);
    if (*match_cmd) return cmd_match(problem, oracle, out, err);
    if (*config_cmd) {
        out << default_config_text();
        return kOk;
    }
    return kInputError;
}

}  // namespace fedmint::cli
