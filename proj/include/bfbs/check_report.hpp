#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace bfbs {

/// Outcome of one property check. `worst_case` is a signed margin: the check
/// passes iff worst_case >= -tolerance.
struct CheckReport {
    std::string name;
    bool passed = false;
    double worst_case = 0.0;
    double tolerance = 0.0;
    std::string location;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<CheckReport> children;

    /// Sets `passed` from the margin rule.
    void settle() { passed = worst_case >= -tolerance; }

    nlohmann::json to_json() const;
};

/// Report for a check that could not run (an exception was thrown).
CheckReport failed_report(std::string name, const std::string& error);

}  // namespace bfbs
