#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedmint/simulation.hpp"

namespace fedmint {

inline constexpr const char* kRoundsCsvHeader =
    "rep,round,arm,server_id,global_accuracy,mean_reward,cohort_size,bootstrap_inquiries,"
    "bootstrap_mse";

/// One row per repetition x round x arm x server. Empty fields mark values
/// that do not exist (an empty cohort, too few pooled rows for k-fold).
void write_rounds_csv(std::ostream& out, const ExperimentReport& report);

nlohmann::json summary_json(const ExperimentReport& report);

/// Per-arm curve: mean over repetitions (and servers) for each round.
struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

enum class ChartMetric { Reward, Accuracy, Mse };

std::vector<Series> round_means(const ExperimentReport& report, ChartMetric metric);

/// Standalone SVG line chart.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series);

/// Writes rounds.csv, summary.json and, if `charts`, rewards.svg,
/// accuracy.svg and mse.svg into `dir` (created if missing).
void write_outputs(const std::filesystem::path& dir, const ExperimentReport& report, bool charts);

}  // namespace fedmint
