#include "bfbs/check_report.hpp"

#include <cmath>
#include <limits>

namespace bfbs {

namespace {

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

nlohmann::json CheckReport::to_json() const {
    nlohmann::json j = {{"name", name},
                        {"passed", passed},
                        {"worst_case", finite_or_null(worst_case)},
                        {"tolerance", tolerance},
                        {"location", location},
                        {"metadata", metadata}};
    if (!children.empty()) {
        j["children"] = nlohmann::json::array();
        for (const auto& c : children) j["children"].push_back(c.to_json());
    }
    return j;
}

CheckReport failed_report(std::string name, const std::string& error) {
    CheckReport r;
    r.name = std::move(name);
    r.passed = false;
    r.worst_case = -std::numeric_limits<double>::infinity();
    r.metadata = {{"error", error}};
    return r;
}

}  // namespace bfbs
