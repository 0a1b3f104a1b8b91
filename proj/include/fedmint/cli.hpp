#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedmint::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kInputError = 2, kRefused = 3 };

/// Entry point behind the `fedmint` binary. `args` excludes the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_tree(const std::string& dataset, int min_instances, double cv_threshold,
             std::ostream& out, std::ostream& err);
int cmd_match(const std::string& problem_path, bool oracle, std::ostream& out, std::ostream& err);

}  // namespace fedmint::cli
