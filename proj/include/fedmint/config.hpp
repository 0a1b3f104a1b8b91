#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedmint/simulation.hpp"

namespace fedmint {

/// Config problems, always prefixed with the dotted key path (or line number
/// for syntax errors).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything `fedmint run` needs.
struct RunOptions {
    ExperimentConfig experiment;
    std::filesystem::path out_dir = "results";
    bool charts = true;
    int jobs = 1;
};

namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array> data;
};

/// Flat view of a document: "section.key" -> value.
using Table = std::map<std::string, Value>;

/// Parses the subset used by config files: comments, [dotted.sections],
/// `key = value` with strings, integers, floats, booleans and single-line
/// arrays of those.
Table parse(std::string_view text);

}  // namespace toml

RunOptions parse_config(std::string_view text);
RunOptions load_config(const std::filesystem::path& path);

/// The defaults rendered as a config file.
std::string default_config_text();

}  // namespace fedmint
