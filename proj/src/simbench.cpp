#include "qucert/simbench.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

namespace qucert {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

CsvTable parse_csv(const std::string& text, const std::string& what) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    char sep = ',';
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (first) sep = line.find(';') != std::string::npos ? ';' : ',';
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, sep)) cells.push_back(trim(cell));
        if (!line.empty() && line.back() == sep) cells.push_back("");
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size())
                throw SchemaError(what + ": row has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

int require_column(const CsvTable& t, const std::string& name, const std::string& what) {
    const int c = t.column(name);
    if (c < 0) throw SchemaError(what + ": missing mandatory column \"" + name + "\"");
    return c;
}

double to_number(const std::string& cell, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw SchemaError(what + ": cannot parse number \"" + cell + "\"");
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

GridModel import_simbench(const SimbenchTables& tables) {
    GridModel g;

    const CsvTable nodes = parse_csv(tables.nodes, "node table");
    if (nodes.rows.empty()) throw SchemaError("node table: no rows");
    const int n_id = require_column(nodes, "id", "node table");
    const int n_vm = require_column(nodes, "vmR", "node table");
    const int n_type = nodes.column("type");
    const int n_setp = nodes.column("vmSetp");
    bool slack_marked = false;
    for (const auto& row : nodes.rows) {
        Node n;
        n.id = row[n_id];
        n.vn_kv = to_number(row[n_vm], "node table vmR");
        if (n.vn_kv <= 0.0) throw SchemaError("node table: vmR must be positive (unit inconsistency?)");
        if (n_type >= 0 && lower(row[n_type]) == "slack") {
            n.kind = NodeKind::Slack;
            slack_marked = true;
            n.u_set_pu = n_setp >= 0 && !row[n_setp].empty() ? to_number(row[n_setp], "vmSetp") : 1.0;
        }
        g.nodes.push_back(std::move(n));
    }
    if (!slack_marked) {
        g.nodes.front().kind = NodeKind::Slack;
        g.nodes.front().u_set_pu = 1.0;
    }

    if (!trim(tables.lines).empty()) {
        const CsvTable lines = parse_csv(tables.lines, "line table");
        const int a = require_column(lines, "nodeA", "line table");
        const int b = require_column(lines, "nodeB", "line table");
        const int len = require_column(lines, "length", "line table");
        const int r = require_column(lines, "r", "line table");
        const int x = require_column(lines, "x", "line table");
        const int bc = lines.column("b");
        const int id = lines.column("id");
        int counter = 0;
        for (const auto& row : lines.rows) {
            Branch br;
            br.id = id >= 0 ? row[id] : "line" + std::to_string(counter);
            br.from = row[a];
            br.to = row[b];
            br.length_km = to_number(row[len], "line length");
            if (br.length_km < 0.0) throw SchemaError("line table: negative length");
            // r, x in ohm/km and b in uS/km, scaled by length.
            br.r_ohm = to_number(row[r], "line r") * br.length_km;
            br.x_ohm = to_number(row[x], "line x") * br.length_km;
            br.b_us = bc >= 0 ? to_number(row[bc], "line b") * br.length_km : 0.0;
            g.branches.push_back(std::move(br));
            ++counter;
        }
    }

    if (!trim(tables.trafos).empty()) {
        const CsvTable trafos = parse_csv(tables.trafos, "trafo table");
        const int hv = require_column(trafos, "nodeHV", "trafo table");
        const int lv = require_column(trafos, "nodeLV", "trafo table");
        const int sr = require_column(trafos, "sR", "trafo table");
        const int uk = require_column(trafos, "vmImp", "trafo table");
        const int pcu = trafos.column("pCu");
        const int id = trafos.column("id");
        int counter = 0;
        for (const auto& row : trafos.rows) {
            Transformer t;
            t.id = id >= 0 ? row[id] : "trafo" + std::to_string(counter);
            t.hv_node = row[hv];
            t.lv_node = row[lv];
            t.s_rated_mva = to_number(row[sr], "trafo sR");
            t.uk_percent = to_number(row[uk], "trafo vmImp");
            if (t.s_rated_mva <= 0.0) throw SchemaError("trafo table: sR must be positive");
            // Copper losses in kW give the ohmic part; fall back to a generic value.
            t.ur_percent = pcu >= 0 ? to_number(row[pcu], "trafo pCu") / (10.0 * t.s_rated_mva)
                                    : std::min(0.5, 0.5 * t.uk_percent);
            g.transformers.push_back(std::move(t));
            ++counter;
        }
    }

    if (!trim(tables.loads).empty()) {
        const CsvTable loads = parse_csv(tables.loads, "load table");
        const int node = require_column(loads, "node", "load table");
        const int p = require_column(loads, "pLoad", "load table");
        const int q = loads.column("qLoad");
        for (const auto& row : loads.rows) {
            Load l;
            l.node = row[node];
            l.p_mw = to_number(row[p], "load pLoad");
            l.q_mvar = q >= 0 ? to_number(row[q], "load qLoad") : 0.0;
            g.loads.push_back(std::move(l));
        }
    }

    if (!trim(tables.res).empty()) {
        const CsvTable res = parse_csv(tables.res, "RES table");
        const int node = require_column(res, "node", "RES table");
        const int p = require_column(res, "pRES", "RES table");
        const int id = res.column("id");
        int counter = 0;
        for (const auto& row : res.rows) {
            DerPlant d;
            d.id = id >= 0 ? row[id] : "res" + std::to_string(counter);
            d.node = row[node];
            d.installed_power_mw = to_number(row[p], "RES pRES");
            if (d.installed_power_mw < 0.0) throw SchemaError("RES table: negative pRES");
            if (d.installed_power_mw == 0.0) continue;  // no plant behind a zero row
            d.rated_power_mw = d.installed_power_mw;
            d.operating_power_mw = d.installed_power_mw;
            d.model_kind = DerKind::WfFrc;
            d.control_params = default_control_params(DerKind::WfFrc);
            d.characteristic.rated_power = d.rated_power_mw;
            g.ders.push_back(std::move(d));
            ++counter;
        }
    }

    g.validate();
    return g;
}

}  // namespace qucert
