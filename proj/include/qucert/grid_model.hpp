#ifndef QUCERT_GRID_MODEL_HPP
#define QUCERT_GRID_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qucert/der_models.hpp"

namespace qucert {

/// Grid invariant violation (dangling reference, missing slack, disconnection).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class NodeKind { Slack, Pq };

struct Node {
    std::string id;
    double vn_kv = 0.0;
    NodeKind kind = NodeKind::Pq;
    std::optional<double> u_set_pu;
};

struct Branch {
    std::string id, from, to;
    double r_ohm = 0.0, x_ohm = 0.0;
    double b_us = 0.0;
    double length_km = 0.0;
};

struct Transformer {
    std::string id, hv_node, lv_node;
    double s_rated_mva = 0.0;
    double uk_percent = 0.0;  // short-circuit voltage
    double ur_percent = 0.0;  // ohmic part
    int tap_pos = 0;
    double tap_step_percent = 0.0;
};

struct Load {
    std::string node;
    double p_mw = 0.0, q_mvar = 0.0;
};

struct DerPlant {
    std::string id, node;
    double installed_power_mw = 0.0;  // P_DER inst
    double rated_power_mw = 0.0;      // P_r
    double operating_power_mw = 0.0;  // current P feed-in
    DerKind model_kind = DerKind::WfFrc;
    DerControlParams control_params;
    std::optional<Pt2Params> pt2_params;  // set when model_kind == Pt2
    QuCharacteristic characteristic;
};

/// Static AC network; immutable after construction, safe for shared reads.
struct GridModel {
    double base_mva = 100.0;
    std::vector<Node> nodes;
    std::vector<Branch> branches;
    std::vector<Transformer> transformers;
    std::vector<Load> loads;
    std::vector<DerPlant> ders;
    std::optional<double> total_branch_length_km;

    int node_index(const std::string& id) const;  // -1 when absent
    int slack_index() const;
    double total_length_km() const;  // explicit value or sum over branches
    double sum_installed_mw() const;

    /// Checks all structural invariants; throws ValidationError.
    void validate() const;
};

GridModel load_grid(const nlohmann::json& doc);
GridModel load_grid_file(const std::string& path);
nlohmann::json grid_to_json(const GridModel& grid);
void save_grid_file(const GridModel& grid, const std::string& path);

/// DER penetration: installed power per branch length, kW/km.
double penetration_factor(const GridModel& grid);

}  // namespace qucert

#endif
