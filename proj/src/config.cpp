#include "fedmint/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fedmint {
namespace toml {
namespace {

class Parser {
public:
    Parser(std::string_view line, int line_no) : s_(line), line_no_(line_no) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("line " + std::to_string(line_no_) + ": " + what);
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool at_end_or_comment() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }

    std::string key() {
        skip_ws();
        std::string out;
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') {
                out.push_back(c);
                ++pos_;
            } else {
                break;
            }
        }
        if (out.empty()) fail("expected a key");
        if (out.front() == '.' || out.back() == '.' || out.find("..") != std::string::npos) {
            fail("malformed key '" + out + "'");
        }
        return out;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    Value value() {
        skip_ws();
        if (pos_ >= s_.size()) fail("missing value");
        char c = s_[pos_];
        if (c == '"') return Value{string()};
        if (c == '[') return Value{array()};
        if (s_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return Value{true};
        }
        if (s_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return Value{false};
        }
        return number();
    }

private:
    std::string string() {
        ++pos_;
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            char c = s_[pos_++];
            if (c == '\\') {
                if (pos_ >= s_.size()) break;
                char e = s_[pos_++];
                switch (e) {
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    default: fail(std::string("unsupported escape \\") + e);
                }
            } else {
                out.push_back(c);
            }
        }
        if (pos_ >= s_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    Array array() {
        ++pos_;
        Array out;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
            ++pos_;
            return out;
        }
        while (true) {
            out.push_back(value());
            skip_ws();
            if (pos_ >= s_.size()) fail("unterminated array");
            if (s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ']') {
                    ++pos_;
                    return out;
                }
                continue;
            }
            if (s_[pos_] == ']') {
                ++pos_;
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }

    Value number() {
        std::size_t start = pos_;
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' ||
                c == 'e' || c == 'E' || c == '_') {
                ++pos_;
            } else {
                break;
            }
        }
        std::string text;
        for (char c : s_.substr(start, pos_ - start)) {
            if (c != '_') text.push_back(c);
        }
        if (text.empty()) fail("unrecognised value");
        if (text.front() == '+') text.erase(0, 1);
        const bool is_float = text.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc{} || ptr != text.data() + text.size()) {
                fail("bad integer '" + text + "'");
            }
            return Value{v};
        }
        try {
            std::size_t used = 0;
            double v = std::stod(text, &used);
            if (used != text.size()) fail("bad number '" + text + "'");
            return Value{v};
        } catch (const std::logic_error&) {
            fail("bad number '" + text + "'");
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    int line_no_;
};

}  // namespace

Table parse(std::string_view text) {
    Table table;
    std::string section;
    int line_no = 0;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        std::size_t end = text.find('\n', begin);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        begin = end + 1;

        Parser p(line, line_no);
        if (p.at_end_or_comment()) continue;
        p.skip_ws();
        if (line.find_first_not_of(" \t") != std::string_view::npos &&
            line[line.find_first_not_of(" \t")] == '[') {
            p.expect('[');
            section = p.key();
            p.expect(']');
            if (!p.at_end_or_comment()) p.fail("trailing characters after section header");
            continue;
        }
        std::string k = p.key();
        p.expect('=');
        Value v = p.value();
        if (!p.at_end_or_comment()) p.fail("trailing characters after value");
        std::string full = section.empty() ? k : section + "." + k;
        if (!table.emplace(full, std::move(v)).second) p.fail("duplicate key '" + full + "'");
    }
    return table;
}

}  // namespace toml

namespace {

struct Binder {
    const toml::Table& table;
    std::set<std::string> used;

    const toml::Value* find(const std::string& key) {
        auto it = table.find(key);
        if (it == table.end()) return nullptr;
        used.insert(key);
        return &it->second;
    }

    [[noreturn]] static void bad(const std::string& key, const std::string& what) {
        throw ConfigError(key + ": " + what);
    }

    static double as_double(const std::string& key, const toml::Value& v) {
        if (auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
        if (auto* d = std::get_if<double>(&v.data)) return *d;
        bad(key, "expected a number");
    }

    void number(const std::string& key, double& out) {
        if (auto* v = find(key)) out = as_double(key, *v);
    }

    template <typename Int>
    void integer(const std::string& key, Int& out) {
        auto* v = find(key);
        if (!v) return;
        auto* i = std::get_if<std::int64_t>(&v->data);
        if (!i) bad(key, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (*i < 0) bad(key, "must be non-negative");
        } else if (*i < std::numeric_limits<Int>::min() || *i > std::numeric_limits<Int>::max()) {
            bad(key, "out of range");
        }
        out = static_cast<Int>(*i);
    }

    void boolean(const std::string& key, bool& out) {
        auto* v = find(key);
        if (!v) return;
        auto* b = std::get_if<bool>(&v->data);
        if (!b) bad(key, "expected true or false");
        out = *b;
    }

    void string(const std::string& key, std::string& out) {
        auto* v = find(key);
        if (!v) return;
        auto* s = std::get_if<std::string>(&v->data);
        if (!s) bad(key, "expected a string");
        out = *s;
    }

    void strings(const std::string& key, std::vector<std::string>& out) {
        auto* v = find(key);
        if (!v) return;
        auto* a = std::get_if<toml::Array>(&v->data);
        if (!a) bad(key, "expected an array of strings");
        std::vector<std::string> result;
        for (const auto& item : *a) {
            auto* s = std::get_if<std::string>(&item.data);
            if (!s) bad(key, "expected an array of strings");
            result.push_back(*s);
        }
        out = std::move(result);
    }

    void range(const std::string& key, Range& out) {
        auto* v = find(key);
        if (!v) return;
        auto* a = std::get_if<toml::Array>(&v->data);
        if (!a || a->size() != 2) bad(key, "expected [lo, hi]");
        out = Range{as_double(key, (*a)[0]), as_double(key, (*a)[1])};
    }

    void arms(const std::string& key, std::vector<Arm>& out) {
        std::vector<std::string> names;
        if (!table.count(key)) return;
        strings(key, names);
        std::vector<Arm> result;
        for (const auto& n : names) {
            auto arm = parse_arm(n);
            if (!arm) bad(key, "unknown arm '" + n + "'");
            result.push_back(*arm);
        }
        out = std::move(result);
    }
};

}  // namespace

RunOptions parse_config(std::string_view text) {
    const toml::Table table = toml::parse(text);
    RunOptions opts;
    ExperimentConfig& c = opts.experiment;
    Binder b{table, {}};

    b.integer("seed", c.seed);
    b.integer("repetitions", c.repetitions);
    b.integer("rounds", c.rounds);
    b.arms("arms", c.arms);

    b.integer("population.initial_devices", c.initial_devices);
    b.integer("population.arrivals_per_round", c.arrivals_per_round);

    b.integer("servers.count", c.servers);
    b.integer("servers.clients_per_server", c.clients_per_server);

    b.range("resources.cpu", c.cpu);
    b.range("resources.ram", c.ram);
    b.range("resources.bandwidth", c.bandwidth);
    b.range("resources.promised_fraction", c.promised_fraction);
    b.range("resources.latency", c.latency);

    b.range("prices.cpu", c.price_cpu);
    b.range("prices.ram", c.price_ram);
    b.range("prices.band", c.price_band);

    b.integer("data.num_classes", c.num_classes);
    b.integer("data.min_labels", c.min_labels);
    b.integer("data.max_labels", c.max_labels);
    b.integer("data.min_data_size", c.min_data_size);
    b.integer("data.max_data_size", c.max_data_size);
    b.number("data.test_split", c.test_split);

    b.strings("features.providers", c.providers);
    b.strings("features.regions", c.regions);
    b.strings("features.device_types", c.device_types);
    b.strings("features.data_types", c.data_types);
    b.number("features.correlation", c.feature_correlation);

    b.integer("bootstrap.min_instances", c.min_instances);
    b.number("bootstrap.cv_threshold", c.cv_threshold);
    b.integer("bootstrap.calls_budget", c.initial_calls_budget);
    b.number("bootstrap.upload_fraction", c.upload_fraction);
    b.integer("bootstrap.kfold", c.kfold);
    b.number("bootstrap.prior_accuracy", c.prior_accuracy);

    b.number("proxy.base", c.proxy.base);
    b.number("proxy.size_weight", c.proxy.size_weight);
    b.number("proxy.label_weight", c.proxy.label_weight);
    b.number("proxy.experience_gain", c.proxy.experience_gain);
    b.integer("proxy.experience_cap", c.proxy.experience_cap);
    b.number("proxy.noise", c.proxy.noise);
    b.number("proxy.floor", c.proxy.floor);
    b.number("proxy.ceiling", c.proxy.ceiling);

    std::string out_dir = opts.out_dir.string();
    b.string("output.dir", out_dir);
    opts.out_dir = out_dir;
    b.boolean("output.charts", opts.charts);
    b.integer("output.jobs", opts.jobs);
    if (opts.jobs < 1) throw ConfigError("output.jobs: must be at least 1");

    for (const auto& [key, value] : table) {
        if (!b.used.count(key)) throw ConfigError(key + ": unknown key");
    }

    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    return opts;
}

RunOptions load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_config(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string default_config_text() {
    const RunOptions d;
    const ExperimentConfig& c = d.experiment;
    std::ostringstream o;
    auto num = [](double v) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
        return std::string(buf, res.ptr);
    };
    auto range = [&](const Range& r) { return "[" + num(r.lo) + ", " + num(r.hi) + "]"; };
    auto list = [](const std::vector<std::string>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ", ";
            s += "\"" + v[i] + "\"";
        }
        return s + "]";
    };
    std::vector<std::string> arms;
    for (Arm a : c.arms) arms.emplace_back(arm_name(a));

    o << "seed = " << c.seed << "\n"
      << "repetitions = " << c.repetitions << "\n"
      << "rounds = " << c.rounds << "\n"
      << "arms = " << list(arms) << "\n\n"
      << "[population]\n"
      << "initial_devices = " << c.initial_devices << "\n"
      << "arrivals_per_round = " << c.arrivals_per_round << "\n\n"
      << "[servers]\n"
      << "count = " << c.servers << "\n"
      << "clients_per_server = " << c.clients_per_server << "\n\n"
      << "[resources]\n"
      << "cpu = " << range(c.cpu) << "\n"
      << "ram = " << range(c.ram) << "\n"
      << "bandwidth = " << range(c.bandwidth) << "\n"
      << "promised_fraction = " << range(c.promised_fraction) << "\n"
      << "latency = " << range(c.latency) << "\n\n"
      << "[prices]\n"
      << "cpu = " << range(c.price_cpu) << "\n"
      << "ram = " << range(c.price_ram) << "\n"
      << "band = " << range(c.price_band) << "\n\n"
      << "[data]\n"
      << "num_classes = " << c.num_classes << "\n"
      << "min_labels = " << c.min_labels << "\n"
      << "max_labels = " << c.max_labels << "\n"
      << "min_data_size = " << c.min_data_size << "\n"
      << "max_data_size = " << c.max_data_size << "\n"
      << "test_split = " << num(c.test_split) << "\n\n"
      << "[features]\n"
      << "providers = " << list(c.providers) << "\n"
      << "regions = " << list(c.regions) << "\n"
      << "device_types = " << list(c.device_types) << "\n"
      << "data_types = " << list(c.data_types) << "\n"
      << "correlation = " << num(c.feature_correlation) << "\n\n"
      << "[bootstrap]\n"
      << "min_instances = " << c.min_instances << "\n"
      << "cv_threshold = " << num(c.cv_threshold) << "\n"
      << "calls_budget = " << c.initial_calls_budget << "\n"
      << "upload_fraction = " << num(c.upload_fraction) << "\n"
      << "kfold = " << c.kfold << "\n"
      << "prior_accuracy = " << num(c.prior_accuracy) << "\n\n"
      << "[proxy]\n"
      << "base = " << num(c.proxy.base) << "\n"
      << "size_weight = " << num(c.proxy.size_weight) << "\n"
      << "label_weight = " << num(c.proxy.label_weight) << "\n"
      << "experience_gain = " << num(c.proxy.experience_gain) << "\n"
      << "experience_cap = " << c.proxy.experience_cap << "\n"
      << "noise = " << num(c.proxy.noise) << "\n"
      << "floor = " << num(c.proxy.floor) << "\n"
      << "ceiling = " << num(c.proxy.ceiling) << "\n\n"
      << "[output]\n"
      << "dir = \"" << d.out_dir.string() << "\"\n"
      << "charts = " << (d.charts ? "true" : "false") << "\n"
      << "jobs = " << d.jobs << "\n";
    return o.str();
}

}  // namespace fedmint
