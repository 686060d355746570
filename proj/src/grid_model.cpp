#include "qucert/grid_model.hpp"

#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace qucert {

namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw SchemaError(ctx + ": expected an object");
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw SchemaError(ctx + ": unknown key \"" + it.key() + "\"");
}

const json& require(const json& obj, const std::string& key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(ctx + ": missing key \"" + key + "\"");
    return *it;
}

double get_number(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_number()) throw SchemaError(ctx + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const std::string& key, double fallback, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw SchemaError(ctx + ": \"" + key + "\" must be a number");
    return it->get<double>();
}

int get_integer(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_number_integer()) throw SchemaError(ctx + ": \"" + key + "\" must be an integer");
    return v.get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_string()) throw SchemaError(ctx + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
}

DerControlParams parse_control_params(const json& obj, DerKind kind, const std::string& ctx) {
    reject_unknown(obj, {"t_u", "va_order", "t_dq", "k_q", "t_q", "t_l", "t_g"}, ctx);
    DerControlParams p = default_control_params(kind);
    p.t_u = get_number_or(obj, "t_u", p.t_u, ctx);
    p.t_dq = get_number_or(obj, "t_dq", p.t_dq, ctx);
    p.k_q = get_number_or(obj, "k_q", p.k_q, ctx);
    p.t_q = get_number_or(obj, "t_q", p.t_q, ctx);
    p.t_l = get_number_or(obj, "t_l", p.t_l, ctx);
    p.t_g = get_number_or(obj, "t_g", p.t_g, ctx);
    if (obj.contains("va_order")) p.va_order = get_integer(obj, "va_order", ctx);
    return p;
}

Pt2Params parse_pt2_params(const json& obj, const std::string& ctx) {
    reject_unknown(obj, {"kappa", "damping", "t"}, ctx);
    Pt2Params p;
    p.gain = get_number(obj, "kappa", ctx);
    p.damping = get_number(obj, "damping", ctx);
    p.time_constant = get_number(obj, "t", ctx);
    return p;
}

}  // namespace

int GridModel::node_index(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
}

int GridModel::slack_index() const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].kind == NodeKind::Slack) return static_cast<int>(i);
    return -1;
}

double GridModel::total_length_km() const {
    if (total_branch_length_km) return *total_branch_length_km;
    double sum = 0.0;
    for (const auto& b : branches) sum += b.length_km;
    return sum;
}

double GridModel::sum_installed_mw() const {
    double sum = 0.0;
    for (const auto& d : ders) sum += d.installed_power_mw;
    return sum;
}

void GridModel::validate() const {
    if (base_mva <= 0.0) throw ValidationError("base power must be positive");
    if (nodes.empty()) throw ValidationError("grid has no nodes");

    std::unordered_set<std::string> seen;
    int slack_count = 0;
    for (const auto& n : nodes) {
        if (!seen.insert(n.id).second) throw ValidationError("duplicate node id \"" + n.id + "\"");
        if (n.vn_kv <= 0.0) throw ValidationError("node \"" + n.id + "\": nominal voltage must be positive");
        if (n.u_set_pu && (*n.u_set_pu < 0.8 || *n.u_set_pu > 1.2))
            throw ValidationError("node \"" + n.id + "\": u_set outside [0.8, 1.2]");
        if (n.kind == NodeKind::Slack) ++slack_count;
    }
    if (slack_count != 1)
        throw ValidationError("grid must have exactly one slack node, found " + std::to_string(slack_count));

    auto resolve = [this](const std::string& id, const std::string& what) {
        if (node_index(id) < 0)
            throw ValidationError(what + " references unknown node \"" + id + "\"");
    };

    std::unordered_set<std::string> edge_ids;
    for (const auto& b : branches) {
        if (!edge_ids.insert(b.id).second) throw ValidationError("duplicate branch id \"" + b.id + "\"");
        resolve(b.from, "branch \"" + b.id + "\"");
        resolve(b.to, "branch \"" + b.id + "\"");
        if (b.r_ohm == 0.0 && b.x_ohm == 0.0)
            throw ValidationError("branch \"" + b.id + "\": zero impedance");
        if (b.length_km < 0.0) throw ValidationError("branch \"" + b.id + "\": negative length");
    }
    std::unordered_set<std::string> trafo_ids;
    for (const auto& t : transformers) {
        if (!trafo_ids.insert(t.id).second) throw ValidationError("duplicate transformer id \"" + t.id + "\"");
        resolve(t.hv_node, "transformer \"" + t.id + "\"");
        resolve(t.lv_node, "transformer \"" + t.id + "\"");
        if (t.s_rated_mva <= 0.0) throw ValidationError("transformer \"" + t.id + "\": rated power must be positive");
        if (t.ur_percent <= 0.0 || t.ur_percent > t.uk_percent)
            throw ValidationError("transformer \"" + t.id + "\": need 0 < ur <= uk");
    }
    for (const auto& l : loads) resolve(l.node, "load");
    std::unordered_set<std::string> der_ids;
    for (const auto& d : ders) {
        if (!der_ids.insert(d.id).second) throw ValidationError("duplicate DER id \"" + d.id + "\"");
        resolve(d.node, "DER \"" + d.id + "\"");
        if (d.rated_power_mw <= 0.0) throw ValidationError("DER \"" + d.id + "\": rated power must be positive");
        if (d.operating_power_mw < 0.0 || d.operating_power_mw > d.installed_power_mw)
            throw ValidationError("DER \"" + d.id + "\": operating power outside [0, installed]");
        const auto& q = d.characteristic;
        if (q.slope < 0.0 || q.deadband < 0.0 || q.q_limit_share <= 0.0 || q.q_limit_share > 1.0)
            throw ValidationError("DER \"" + d.id + "\": invalid Q(U) characteristic");
        if (d.model_kind == DerKind::Pt2 && !d.pt2_params)
            throw ValidationError("DER \"" + d.id + "\": pt2 model without parameters");
    }

    // Connectivity over branches and transformers.
    std::vector<std::vector<int>> adj(nodes.size());
    auto link = [&](const std::string& a, const std::string& b) {
        const int ia = node_index(a), ib = node_index(b);
        adj[ia].push_back(ib);
        adj[ib].push_back(ia);
    };
    for (const auto& b : branches) link(b.from, b.to);
    for (const auto& t : transformers) link(t.hv_node, t.lv_node);
    std::vector<bool> visited(nodes.size(), false);
    std::queue<int> q;
    q.push(0);
    visited[0] = true;
    std::size_t reached = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (!visited[v]) {
                visited[v] = true;
                ++reached;
                q.push(v);
            }
    }
    if (reached != nodes.size()) throw ValidationError("grid graph is not connected");
}

GridModel load_grid(const json& doc) {
    expect_object(doc, "grid document");
    reject_unknown(doc, {"base_mva", "nodes", "branches", "transformers", "loads", "ders"},
                   "grid document");

    GridModel g;
    g.base_mva = get_number(doc, "base_mva", "grid document");

    const json& nodes = require(doc, "nodes", "grid document");
    if (!nodes.is_array()) throw SchemaError("\"nodes\" must be an array");
    for (const auto& jn : nodes) {
        const std::string ctx = "node";
        expect_object(jn, ctx);
        reject_unknown(jn, {"id", "vn_kv", "kind", "u_set_pu"}, ctx);
        Node n;
        n.id = get_string(jn, "id", ctx);
        n.vn_kv = get_number(jn, "vn_kv", ctx);
        const std::string kind = get_string(jn, "kind", ctx);
        if (kind == "slack")
            n.kind = NodeKind::Slack;
        else if (kind == "pq")
            n.kind = NodeKind::Pq;
        else
            throw SchemaError("node \"" + n.id + "\": kind must be \"slack\" or \"pq\"");
        if (jn.contains("u_set_pu")) n.u_set_pu = get_number(jn, "u_set_pu", ctx);
        if (n.kind == NodeKind::Slack && !n.u_set_pu) n.u_set_pu = 1.0;
        g.nodes.push_back(std::move(n));
    }

    if (doc.contains("branches")) {
        for (const auto& jb : doc["branches"]) {
            const std::string ctx = "branch";
            expect_object(jb, ctx);
            reject_unknown(jb, {"id", "from", "to", "r_ohm", "x_ohm", "b_us", "length_km"}, ctx);
            Branch b;
            b.id = get_string(jb, "id", ctx);
            b.from = get_string(jb, "from", ctx);
            b.to = get_string(jb, "to", ctx);
            b.r_ohm = get_number(jb, "r_ohm", ctx);
            b.x_ohm = get_number(jb, "x_ohm", ctx);
            b.b_us = get_number(jb, "b_us", ctx);
            b.length_km = get_number(jb, "length_km", ctx);
            g.branches.push_back(std::move(b));
        }
    }

    if (doc.contains("transformers")) {
        for (const auto& jt : doc["transformers"]) {
            const std::string ctx = "transformer";
            expect_object(jt, ctx);
            reject_unknown(jt,
                           {"id", "hv_node", "lv_node", "s_rated_mva", "uk_percent", "ur_percent",
                            "tap_pos", "tap_step_percent"},
                           ctx);
            Transformer t;
            t.id = get_string(jt, "id", ctx);
            t.hv_node = get_string(jt, "hv_node", ctx);
            t.lv_node = get_string(jt, "lv_node", ctx);
            t.s_rated_mva = get_number(jt, "s_rated_mva", ctx);
            t.uk_percent = get_number(jt, "uk_percent", ctx);
            t.ur_percent = get_number(jt, "ur_percent", ctx);
            t.tap_pos = get_integer(jt, "tap_pos", ctx);
            t.tap_step_percent = get_number(jt, "tap_step_percent", ctx);
            g.transformers.push_back(std::move(t));
        }
    }

    if (doc.contains("loads")) {
        for (const auto& jl : doc["loads"]) {
            const std::string ctx = "load";
            expect_object(jl, ctx);
            reject_unknown(jl, {"node", "p_mw", "q_mvar"}, ctx);
            Load l;
            l.node = get_string(jl, "node", ctx);
            l.p_mw = get_number(jl, "p_mw", ctx);
            l.q_mvar = get_number(jl, "q_mvar", ctx);
            g.loads.push_back(std::move(l));
        }
    }

    if (doc.contains("ders")) {
        for (const auto& jd : doc["ders"]) {
            const std::string ctx = "der";
            expect_object(jd, ctx);
            reject_unknown(jd, {"id", "node", "p_inst_mw", "p_r_mw", "p_op_mw", "model", "params", "qu"},
                           ctx);
            DerPlant d;
            d.id = get_string(jd, "id", ctx);
            d.node = get_string(jd, "node", ctx);
            d.installed_power_mw = get_number(jd, "p_inst_mw", ctx);
            d.rated_power_mw = get_number(jd, "p_r_mw", ctx);
            d.operating_power_mw = get_number(jd, "p_op_mw", ctx);
            d.model_kind = der_kind_from_string(get_string(jd, "model", ctx));
            const std::string pctx = "der \"" + d.id + "\" params";
            if (d.model_kind == DerKind::Pt2) {
                d.pt2_params = parse_pt2_params(require(jd, "params", ctx), pctx);
            } else if (jd.contains("params")) {
                d.control_params = parse_control_params(jd["params"], d.model_kind, pctx);
            } else {
                d.control_params = default_control_params(d.model_kind);
            }
            const json& jq = require(jd, "qu", ctx);
            const std::string qctx = "der \"" + d.id + "\" qu";
            expect_object(jq, qctx);
            reject_unknown(jq, {"u_ref_pu", "slope_percent_per_pu", "deadband_pu", "q_limit_share"},
                           qctx);
            d.characteristic.u_ref = get_number(jq, "u_ref_pu", qctx);
            d.characteristic.slope = get_number(jq, "slope_percent_per_pu", qctx);
            d.characteristic.deadband = get_number_or(jq, "deadband_pu", 0.0, qctx);
            d.characteristic.q_limit_share = get_number_or(jq, "q_limit_share", 0.33, qctx);
            d.characteristic.rated_power = d.rated_power_mw;
            g.ders.push_back(std::move(d));
        }
    }

    g.validate();
    return g;
}

GridModel load_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("grid file not found: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw SchemaError("grid file " + path + ": " + e.what());
    }
    return load_grid(doc);
}

json grid_to_json(const GridModel& grid) {
    json doc;
    doc["base_mva"] = grid.base_mva;
    doc["nodes"] = json::array();
    for (const auto& n : grid.nodes) {
        json jn{{"id", n.id}, {"vn_kv", n.vn_kv}, {"kind", n.kind == NodeKind::Slack ? "slack" : "pq"}};
        if (n.u_set_pu) jn["u_set_pu"] = *n.u_set_pu;
        doc["nodes"].push_back(std::move(jn));
    }
    doc["branches"] = json::array();
    for (const auto& b : grid.branches)
        doc["branches"].push_back({{"id", b.id},
                                   {"from", b.from},
                                   {"to", b.to},
                                   {"r_ohm", b.r_ohm},
                                   {"x_ohm", b.x_ohm},
                                   {"b_us", b.b_us},
                                   {"length_km", b.length_km}});
    doc["transformers"] = json::array();
    for (const auto& t : grid.transformers)
        doc["transformers"].push_back({{"id", t.id},
                                       {"hv_node", t.hv_node},
                                       {"lv_node", t.lv_node},
                                       {"s_rated_mva", t.s_rated_mva},
                                       {"uk_percent", t.uk_percent},
                                       {"ur_percent", t.ur_percent},
                                       {"tap_pos", t.tap_pos},
                                       {"tap_step_percent", t.tap_step_percent}});
    doc["loads"] = json::array();
    for (const auto& l : grid.loads)
        doc["loads"].push_back({{"node", l.node}, {"p_mw", l.p_mw}, {"q_mvar", l.q_mvar}});
    doc["ders"] = json::array();
    for (const auto& d : grid.ders) {
        json jp;
        if (d.model_kind == DerKind::Pt2) {
            jp = {{"kappa", d.pt2_params->gain},
                  {"damping", d.pt2_params->damping},
                  {"t", d.pt2_params->time_constant}};
        } else {
            const auto& p = d.control_params;
            jp = {{"t_u", p.t_u},   {"va_order", p.va_order}, {"t_dq", p.t_dq}, {"k_q", p.k_q},
                  {"t_q", p.t_q},   {"t_l", p.t_l},           {"t_g", p.t_g}};
        }
        doc["ders"].push_back({{"id", d.id},
                               {"node", d.node},
                               {"p_inst_mw", d.installed_power_mw},
                               {"p_r_mw", d.rated_power_mw},
                               {"p_op_mw", d.operating_power_mw},
                               {"model", to_string(d.model_kind)},
                               {"params", std::move(jp)},
                               {"qu",
                                {{"u_ref_pu", d.characteristic.u_ref},
                                 {"slope_percent_per_pu", d.characteristic.slope},
                                 {"deadband_pu", d.characteristic.deadband},
                                 {"q_limit_share", d.characteristic.q_limit_share}}}});
    }
    return doc;
}

void save_grid_file(const GridModel& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ComputationError("cannot write grid file: " + path);
    out << grid_to_json(grid).dump(2) << "\n";
}

double penetration_factor(const GridModel& grid) {
    const double installed = grid.sum_installed_mw();
    if (installed == 0.0) return 0.0;
    const double length = grid.total_length_km();
    if (length <= 0.0)
        throw ComputationError("penetration_factor: total branch length is zero or unknown");
    return installed * 1000.0 / length;
}

}  // namespace qucert
