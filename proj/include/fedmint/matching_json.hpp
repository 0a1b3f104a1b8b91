#pragma once

#include "json.hpp"

#include "fedmint/matching.hpp"

namespace fedmint {

/// Problem format:
///   {"devices": {"d1": ["A", "B"], ...},
///    "servers": {"A": {"capacity": 1, "ranking": ["d1", ...]}, ...}}
/// Throws ValidationError with a JSON path on malformed input.
MatchingProblem problem_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const MatchingProblem& problem);

/// {"devices": {"d1": "A" | null}, "servers": {"A": ["d1"]}}
nlohmann::json matching_to_json(const Matching& matching);

}  // namespace fedmint
