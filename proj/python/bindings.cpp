#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fedmint/aggregation.hpp"
#include "fedmint/bootstrap.hpp"
#include "fedmint/config.hpp"
#include "fedmint/economics.hpp"
#include "fedmint/matching.hpp"
#include "fedmint/report_io.hpp"
#include "fedmint/simulation.hpp"

namespace py = pybind11;
using namespace fedmint;

namespace {

using Row = std::tuple<std::string, std::string, std::string, double>;
using Rankings = std::map<std::string, std::vector<std::string>>;

BootstrapDataset to_dataset(const std::vector<Row>& rows) {
    BootstrapDataset out;
    out.reserve(rows.size());
    for (const auto& [p, r, d, a] : rows) out.push_back(new_interaction({p, r, d}, a));
    return out;
}

Feature to_feature(const std::string& name) {
    if (auto f = parse_feature(name)) return *f;
    throw std::invalid_argument("unknown attribute '" + name + "'");
}

PreferenceList ordered(const std::string& owner, const std::vector<std::string>& ids) {
    PreferenceList p;
    p.owner = owner;
    p.ranking = ids;
    for (std::size_t i = 0; i < ids.size(); ++i) p.score[ids[i]] = static_cast<double>(ids.size() - i);
    return p;
}

MatchingProblem to_problem(const Rankings& devices, const Rankings& servers,
                           const std::map<std::string, int>& capacities) {
    MatchingProblem p;
    for (const auto& [id, list] : devices) p.device_prefs[id] = ordered(id, list);
    for (const auto& [id, list] : servers) p.server_prefs[id] = ordered(id, list);
    p.capacities = capacities;
    return p;
}

std::map<std::string, std::optional<std::string>> assignment(const Matching& m) {
    return {m.device_to_server.begin(), m.device_to_server.end()};
}

Matching from_assignment(const MatchingProblem& p,
                         const std::map<std::string, std::optional<std::string>>& a) {
    Matching m = empty_matching(p);
    for (const auto& [d, s] : a) {
        if (s) m.assign(d, *s);
    }
    return m;
}

py::dict reward_dict(const RewardBreakdown& r) {
    py::dict d;
    d["operational"] = r.operational;
    d["traffic"] = r.traffic;
    d["penalty_factor"] = r.penalty_factor;
    d["total"] = r.total;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bilateral client selection for federated learning";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
    py::register_exception<BudgetExhausted>(m, "BudgetExhausted", PyExc_RuntimeError);
    py::register_exception<NoTrainingData>(m, "NoTrainingData", PyExc_RuntimeError);
    py::register_exception<OracleRefused>(m, "OracleRefused", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    // Rewards and aggregation
    m.def("scale_latency", &scale_latency, py::arg("raw"), py::arg("min_latency"), py::arg("max_latency"));
    m.def("operational_earnings", &operational_earnings, py::arg("cpu"), py::arg("ram"),
          py::arg("price_cpu"), py::arg("price_ram"));
    m.def("traffic_earnings", &traffic_earnings, py::arg("bandwidth"), py::arg("price_band"),
          py::arg("scaled_latency"));
    m.def("accuracy_gap_std", [](double a, double g) {
        return accuracy_gap_std(AccuracyFraction(a), AccuracyFraction(g));
    }, py::arg("acc_device"), py::arg("acc_global"));
    m.def("total_reward", [](double op, double tr, double a, double g) {
        return reward_dict(total_reward(op, tr, AccuracyFraction(a), AccuracyFraction(g)));
    }, py::arg("operational"), py::arg("traffic"), py::arg("acc_device"), py::arg("acc_global"),
          "Reward breakdown as a dict with operational, traffic, penalty_factor and total.");
    m.def("global_accuracy", [](const std::vector<std::pair<double, int>>& cohort) {
        std::vector<CohortEntry> entries;
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            entries.push_back({std::to_string(i), AccuracyFraction(cohort[i].first), cohort[i].second});
        }
        return global_accuracy(entries).value();
    }, py::arg("cohort"), "Test-size weighted mean of (accuracy, test_size) pairs.");

    // Bootstrapping
    m.def("population_sd", [](const std::vector<double>& v) { return population_sd(v); });
    m.def("sample_mean", [](const std::vector<double>& v) { return sample_mean(v); });
    m.def("coefficient_of_variation", [](const std::vector<double>& v) { return coefficient_of_variation(v); });
    m.def("sdr", [](const std::vector<Row>& rows, const std::string& attribute) {
        return sdr(to_dataset(rows), to_feature(attribute));
    }, py::arg("rows"), py::arg("attribute"));
    m.def("split_table", [](const std::vector<Row>& rows) {
        py::list out;
        for (const auto& s : split_table(to_dataset(rows))) {
            py::dict d;
            d["attribute"] = std::string(feature_name(s.attribute));
            d["categories"] = s.categories;
            d["sd_after"] = s.sd_after;
            d["reduction"] = s.reduction;
            out.append(d);
        }
        return out;
    }, py::arg("rows"));
    m.def("data_rate", &data_rate, py::arg("uploaded"), py::arg("total"));
    m.def("update_calls", &update_calls, py::arg("calls_prev"), py::arg("ccont"), py::arg("dr"));
    m.def("kfold_mse", [](const std::vector<Row>& rows, int k, std::uint64_t seed, int min_instances,
                          double cv_threshold) {
        return kfold_mse(to_dataset(rows), k, seed, {min_instances, cv_threshold}).mean_mse;
    }, py::arg("rows"), py::arg("k") = 10, py::arg("seed") = 0, py::arg("min_instances") = 3,
          py::arg("cv_threshold") = 10.0);

    py::class_<RegressionTree>(m, "RegressionTree")
        .def_static("build", [](const std::vector<Row>& rows, int min_instances, double cv_threshold) {
            return build_tree(to_dataset(rows), min_instances, cv_threshold);
        }, py::arg("rows"), py::arg("min_instances") = 3, py::arg("cv_threshold") = 10.0)
        .def("predict", [](const RegressionTree& t, const std::string& provider, const std::string& region,
                           const std::string& device_type) {
            return t.predict({provider, region, device_type});
        }, py::arg("provider"), py::arg("region"), py::arg("device_type"))
        .def_property_readonly("root_split", [](const RegressionTree& t) -> std::optional<std::string> {
            if (!t.root().split) return std::nullopt;
            return std::string(feature_name(*t.root().split));
        })
        .def_property_readonly("node_count", &RegressionTree::node_count)
        .def_property_readonly("depth", &RegressionTree::depth)
        .def("__str__", [](const RegressionTree& t) {
            std::ostringstream s;
            t.print(s);
            return s.str();
        });

    // Matching
    m.def("run_matching", [](const Rankings& devices, const Rankings& servers,
                             const std::map<std::string, int>& capacities) {
        return assignment(run_matching(to_problem(devices, servers, capacities)));
    }, py::arg("device_prefs"), py::arg("server_prefs"), py::arg("capacities"),
          "Device-proposing deferred acceptance. Returns device -> server (or None).");
    m.def("is_stable", [](const Rankings& devices, const Rankings& servers,
                          const std::map<std::string, int>& capacities,
                          const std::map<std::string, std::optional<std::string>>& matching) {
        const auto p = to_problem(devices, servers, capacities);
        return is_stable(from_assignment(p, matching), p);
    }, py::arg("device_prefs"), py::arg("server_prefs"), py::arg("capacities"), py::arg("matching"));
    m.def("brute_force_stable", [](const Rankings& devices, const Rankings& servers,
                                   const std::map<std::string, int>& capacities) {
        std::vector<std::map<std::string, std::optional<std::string>>> out;
        for (const auto& s : brute_force_stable(to_problem(devices, servers, capacities))) {
            out.push_back(assignment(s));
        }
        return out;
    }, py::arg("device_prefs"), py::arg("server_prefs"), py::arg("capacities"));

    // Simulation
    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("from_toml", [](const std::string& text) { return parse_config(text).experiment; })
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("repetitions", &ExperimentConfig::repetitions)
        .def_readwrite("rounds", &ExperimentConfig::rounds)
        .def_readwrite("initial_devices", &ExperimentConfig::initial_devices)
        .def_readwrite("arrivals_per_round", &ExperimentConfig::arrivals_per_round)
        .def_readwrite("servers", &ExperimentConfig::servers)
        .def_readwrite("clients_per_server", &ExperimentConfig::clients_per_server)
        .def_readwrite("min_instances", &ExperimentConfig::min_instances)
        .def_readwrite("cv_threshold", &ExperimentConfig::cv_threshold)
        .def_readwrite("initial_calls_budget", &ExperimentConfig::initial_calls_budget)
        .def_readwrite("kfold", &ExperimentConfig::kfold)
        .def_readwrite("prior_accuracy", &ExperimentConfig::prior_accuracy)
        .def_readwrite("feature_correlation", &ExperimentConfig::feature_correlation)
        .def_property("arms",
            [](const ExperimentConfig& c) {
                std::vector<std::string> names;
                for (auto a : c.arms) names.emplace_back(arm_name(a));
                return names;
            },
            [](ExperimentConfig& c, const std::vector<std::string>& names) {
                std::vector<Arm> arms;
                for (const auto& n : names) {
                    auto a = parse_arm(n);
                    if (!a) throw std::invalid_argument("unknown arm '" + n + "'");
                    arms.push_back(*a);
                }
                c.arms = std::move(arms);
            })
        .def("validate", &ExperimentConfig::validate);

    py::class_<ExperimentReport>(m, "ExperimentReport")
        .def("rounds_csv", [](const ExperimentReport& r) {
            std::ostringstream s;
            write_rounds_csv(s, r);
            return s.str();
        })
        .def("summary_json", [](const ExperimentReport& r) { return summary_json(r).dump(2); })
        .def("write", [](const ExperimentReport& r, const std::string& dir, bool charts) {
            write_outputs(dir, r, charts);
        }, py::arg("directory"), py::arg("charts") = true)
        .def_property_readonly("summary", [](const ExperimentReport& r) {
            py::dict out;
            for (const auto& s : r.summary) {
                py::dict d;
                d["mean_reward"] = s.mean_reward;
                d["mean_final_accuracy"] = s.mean_final_accuracy;
                out[py::str(std::string(arm_name(s.arm)))] = d;
            }
            return out;
        });

    m.def("run_experiment", [](const ExperimentConfig& config, int jobs,
                               std::optional<std::function<double(py::dict, int)>> trainer) {
        LocalTrainer hook;
        if (trainer) {
            jobs = 1;
            hook = [fn = *trainer](const DeviceProfile& d, int participation, Rng&) {
                py::gil_scoped_acquire gil;
                py::dict info;
                info["device_id"] = d.device_id;
                info["data_size"] = d.data_size;
                info["labels"] = d.data_labels;
                info["provider"] = d.features.provider;
                info["region"] = d.features.region;
                info["device_type"] = d.features.device_type;
                return AccuracyFraction(fn(info, participation));
            };
        }
        py::gil_scoped_release release;
        return run_experiment(config, jobs, hook);
    }, py::arg("config"), py::arg("jobs") = 1, py::arg("trainer") = py::none(),
          "Runs every repetition. `trainer(device_info, participation)` may replace the accuracy proxy.");
}
