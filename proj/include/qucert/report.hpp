#ifndef QUCERT_REPORT_HPP
#define QUCERT_REPORT_HPP

#include <optional>
#include <string>

#include "json.hpp"
#include "qucert/stability.hpp"
#include "qucert/time_sim.hpp"

namespace qucert {

inline constexpr const char* kToolVersion = "0.1.0";

/// Certification outcome for one grid and one DER representation.
struct AssessmentReport {
    std::string grid_id;
    std::string representation;
    std::string criterion = "circle";
    SlopeSearchResult search;
    std::optional<double> sim_threshold;
    std::optional<bool> sim_limit_found;
    double penetration_kw_per_km = 0.0;
    std::string timestamp;  // ISO 8601 UTC
    std::string tool_version = kToolVersion;
    // Guideline recommendation band for the slope, %/p.u.
    static constexpr double kTarBandLow = 6.0;
    static constexpr double kTarBandHigh = 20.0;
};

std::string current_timestamp_utc();

nlohmann::ordered_json report_to_json(const AssessmentReport& report);
void save_report(const nlohmann::ordered_json& doc, const std::string& path);

}  // namespace qucert

#endif
