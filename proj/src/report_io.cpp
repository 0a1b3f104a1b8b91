#include "fedmint/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fedmint {

namespace {

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

double nice_step(double span, int target_ticks) {
    const double raw = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) return m * mag;
    }
    return 10.0 * mag;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_rounds_csv(std::ostream& out, const ExperimentReport& report) {
    out << kRoundsCsvHeader << '\n';
    for (const auto& rep : report.repetitions) {
        for (const auto& round : rep.rounds) {
            for (const auto& arm : round.arms) {
                const std::string mse = arm.bootstrap_mse ? fixed(*arm.bootstrap_mse) : "";
                for (const auto& s : arm.servers) {
                    out << rep.repetition << ',' << round.round << ',' << arm_name(arm.arm) << ','
                        << s.server_id << ','
                        << (s.global_accuracy ? fixed(*s.global_accuracy) : "") << ','
                        << (s.cohort.empty() ? "" : fixed(s.mean_reward)) << ','
                        << s.cohort.size() << ',' << s.inquiries << ',' << mse << '\n';
                }
            }
        }
    }
}

std::vector<Series> round_means(const ExperimentReport& report, ChartMetric metric) {
    std::vector<Series> out;
    for (Arm arm : report.config.arms) {
        std::map<int, std::pair<double, int>> acc;
        for (const auto& rep : report.repetitions) {
            for (const auto& round : rep.rounds) {
                const auto* a = round.arm(arm);
                if (!a) continue;
                auto& [sum, n] = acc[round.round];
                if (metric == ChartMetric::Mse) {
                    if (a->bootstrap_mse) {
                        sum += *a->bootstrap_mse;
                        ++n;
                    }
                    continue;
                }
                for (const auto& s : a->servers) {
                    if (s.cohort.empty()) continue;
                    sum += metric == ChartMetric::Reward ? s.mean_reward : s.global_accuracy.value_or(0.0);
                    ++n;
                }
            }
        }
        Series series{std::string(arm_name(arm)), {}};
        for (const auto& [round, sn] : acc) {
            if (sn.second > 0) series.points.emplace_back(round, sn.first / sn.second);
        }
        out.push_back(std::move(series));
    }
    return out;
}

nlohmann::json summary_json(const ExperimentReport& report) {
    const auto& c = report.config;
    nlohmann::json doc;
    doc["seed"] = c.seed;
    doc["repetitions"] = c.repetitions;
    doc["rounds"] = c.rounds;
    doc["servers"] = c.servers;
    doc["clients_per_server"] = c.clients_per_server;
    doc["initial_devices"] = c.initial_devices;
    doc["arrivals_per_round"] = c.arrivals_per_round;

    nlohmann::json arms = nlohmann::json::object();
    const auto rewards = round_means(report, ChartMetric::Reward);
    const auto accuracy = round_means(report, ChartMetric::Accuracy);
    const auto mse = round_means(report, ChartMetric::Mse);
    auto curve = [](const Series& s) {
        nlohmann::json points = nlohmann::json::array();
        for (const auto& [x, y] : s.points) points.push_back({{"round", static_cast<int>(x)}, {"value", y}});
        return points;
    };
    for (std::size_t i = 0; i < report.summary.size(); ++i) {
        const auto& s = report.summary[i];
        arms[std::string(arm_name(s.arm))] = {
            {"mean_reward", s.mean_reward},
            {"mean_final_accuracy", s.mean_final_accuracy},
            {"reward_by_round", curve(rewards[i])},
            {"accuracy_by_round", curve(accuracy[i])},
            {"mse_by_round", curve(mse[i])},
        };
    }
    doc["arms"] = std::move(arms);
    return doc;
}

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series) {
    constexpr double width = 640, height = 400;
    constexpr double left = 70, right = 160, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (!std::isfinite(x_min)) {
        x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) {
        y_min -= 0.5 * std::max(std::abs(y_min), 1e-3);
        y_max += 0.5 * std::max(std::abs(y_max), 1e-3);
    }
    const double y_step = nice_step(y_max - y_min, 5);
    y_min = std::floor(y_min / y_step) * y_step;
    y_max = std::ceil(y_max / y_step) * y_step;
    const double x_step = std::max(1.0, nice_step(x_max - x_min, 8));

    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };
    const int y_digits = y_step >= 1 ? 0 : static_cast<int>(std::ceil(-std::log10(y_step)));

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << svg_escape(title) << "</text>\n";

    for (double y = y_min; y <= y_max + y_step * 1e-6; y += y_step) {
        const std::string yy = fixed(py(y), 2);
        o << "<line x1=\"" << left << "\" y1=\"" << yy << "\" x2=\"" << left + plot_w << "\" y2=\"" << yy
          << "\" stroke=\"#e0e0e0\"/>\n"
          << "<text x=\"" << left - 6 << "\" y=\"" << yy << "\" text-anchor=\"end\" dominant-baseline=\"middle\">"
          << fixed(y, y_digits) << "</text>\n";
    }
    for (double x = x_min; x <= x_max + 1e-9; x += x_step) {
        const std::string xx = fixed(px(x), 2);
        o << "<line x1=\"" << xx << "\" y1=\"" << top + plot_h << "\" x2=\"" << xx << "\" y2=\""
          << top + plot_h + 5 << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << xx << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
          << fixed(x, 0) << "</text>\n";
    }
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
      << svg_escape(x_label) << "</text>\n"
      << "<text transform=\"translate(18," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << svg_escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        const auto& s = series[i];
        if (!s.points.empty()) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < s.points.size(); ++k) {
                if (k) o << ' ';
                o << fixed(px(s.points[k].first), 2) << ',' << fixed(py(s.points[k].second), 2);
            }
            o << "\"/>\n";
            for (const auto& [x, y] : s.points) {
                o << "<circle cx=\"" << fixed(px(x), 2) << "\" cy=\"" << fixed(py(y), 2)
                  << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
            }
        }
        const double ly = top + 10 + 20.0 * static_cast<double>(i);
        o << "<line x1=\"" << left + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + plot_w + 32
          << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << left + plot_w + 38 << "\" y=\"" << ly << "\" dominant-baseline=\"middle\">"
          << svg_escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_outputs(const std::filesystem::path& dir, const ExperimentReport& report, bool charts) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_rounds_csv(csv, report);
    write_file(dir / "rounds.csv", csv.str());
    write_file(dir / "summary.json", summary_json(report).dump(2) + "\n");
    if (!charts) return;
    write_file(dir / "rewards.svg",
               render_line_chart("Mean cohort reward", "Round", "Reward",
                                 round_means(report, ChartMetric::Reward)));
    write_file(dir / "accuracy.svg",
               render_line_chart("Global model accuracy", "Round", "Accuracy",
                                 round_means(report, ChartMetric::Accuracy)));
    write_file(dir / "mse.svg",
               render_line_chart("Bootstrap model MSE (k-fold)", "Round", "MSE",
                                 round_means(report, ChartMetric::Mse)));
}

}  // namespace fedmint
