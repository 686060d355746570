#include "qucert/report.hpp"

#include <ctime>
#include <fstream>

namespace qucert {

std::string current_timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::ordered_json report_to_json(const AssessmentReport& r) {
    nlohmann::ordered_json doc;
    doc["grid_id"] = r.grid_id;
    doc["representation"] = r.representation;
    doc["criterion"] = r.criterion;
    // m_max is present only when the search found a limit below the cap
    if (r.search.limit_found) doc["m_max_percent_per_pu"] = r.search.m_max;
    doc["limit_found"] = r.search.limit_found;
    doc["bracket_percent_per_pu"] = {r.search.bracket_low, r.search.bracket_high};
    doc["evaluations"] = r.search.evaluations;
    doc["tar_recommendation_band"] = {AssessmentReport::kTarBandLow,
                                      AssessmentReport::kTarBandHigh};
    auto trace = nlohmann::ordered_json::array();
    for (const auto& [slope, pass] : r.search.per_step)
        trace.push_back({{"slope", slope}, {"spr", pass}});
    doc["verdict_trace"] = std::move(trace);
    if (r.sim_threshold) {
        doc["sim_threshold_percent_per_pu"] = *r.sim_threshold;
        doc["sim_limit_found"] = r.sim_limit_found.value_or(true);
    }
    doc["penetration_kw_per_km"] = r.penetration_kw_per_km;
    doc["timestamp"] = r.timestamp;
    doc["tool_version"] = r.tool_version;
    return doc;
}

void save_report(const nlohmann::ordered_json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ComputationError("cannot write report file: " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace qucert
