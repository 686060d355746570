#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
namespace test = qucert::test;
using nlohmann::json;

namespace {

const std::string cli = QUCERT_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "qucert_cli_out.txt";
    const std::string cmd = cli + " " + args + " > " + tmp.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(tmp);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    fs::remove(tmp);
    return {WEXITSTATUS(status), std::move(text)};
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_CASE("missing grid file exits with a usage error") {
    const RunResult r = run("powerflow --grid /nonexistent/grid.json");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("not found") != std::string::npos);
}

TEST_CASE("missing required flag exits with a usage error") {
    CHECK(run("assess").exit_code == 2);
    CHECK(run("simulate --grid " + test::fixture("single_der.json")).exit_code == 2);
}

TEST_CASE("powerflow runs on the toy feeder") {
    const RunResult r = run("powerflow --grid " + test::fixture("toy_feeder.json"));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("converged") != std::string::npos);
}

TEST_CASE("fit-pt2 emits the guideline parameters") {
    const RunResult r = run("fit-pt2 --mode tar");
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(r.output);
    CHECK(doc["kappa"].get<double>() == 1.0);
    CHECK(std::abs(doc["d"].get<double>() - 0.517) / 0.517 < 0.05);
    CHECK(std::abs(doc["t"].get<double>() - 2.335) / 2.335 < 0.05);
    CHECK(doc["mode"] == "tar");
}

TEST_CASE("assess writes a stable report") {
    const fs::path report = temp_file("qucert_report.json");
    const std::string cmd = "assess --grid " + test::fixture("single_der.json") +
                            " --representation pt2-tar --m-cap 20000 --tolerance 2 --out " +
                            report.string();
    const RunResult r = run(cmd);
    REQUIRE(r.exit_code == 0);
    json first = json::parse(std::ifstream(report));
    CHECK(first["grid_id"] == "single_der");
    CHECK(first["representation"] == "pt2-tar");
    CHECK(first["criterion"] == "circle");
    CHECK(first["limit_found"].get<bool>());
    CHECK(first["m_max_percent_per_pu"].get<double>() == doctest::Approx(1971).epsilon(0.01));
    CHECK(first["tar_recommendation_band"] == json::array({6.0, 20.0}));
    CHECK(first["verdict_trace"].size() > 3);
    CHECK(first["penetration_kw_per_km"].get<double>() == doctest::Approx(80000.0 / 60.0));

    // reruns are identical apart from the timestamp
    REQUIRE(run(cmd).exit_code == 0);
    json second = json::parse(std::ifstream(report));
    first.erase("timestamp");
    second.erase("timestamp");
    CHECK(first.dump() == second.dump());
    fs::remove(report);
}

TEST_CASE("computation failure exits with code 1") {
    // infeasible transfer: the Newton iteration cannot converge
    const fs::path bad = temp_file("qucert_bad_grid.json");
    std::ofstream(bad) << R"({
        "base_mva": 100.0,
        "nodes": [
            {"id": "a", "vn_kv": 110.0, "kind": "slack", "u_set_pu": 1.0},
            {"id": "b", "vn_kv": 110.0, "kind": "pq"}
        ],
        "branches": [
            {"id": "l1", "from": "a", "to": "b", "r_ohm": 0.0, "x_ohm": 12.1, "b_us": 0.0, "length_km": 10.0}
        ],
        "loads": [{"node": "b", "p_mw": 70000.0, "q_mvar": 0.0}]
    })";
    const RunResult r = run("powerflow --grid " + bad.string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("power flow") != std::string::npos);
    fs::remove(bad);
}

TEST_CASE("assess over all representations keeps the conservatism order") {
    const fs::path report = temp_file("qucert_report_all.json");
    const RunResult r = run("assess --grid " + test::fixture("single_der.json") +
                            " --representation all --m-cap 20000 --tolerance 5 --out " +
                            report.string());
    REQUIRE(r.exit_code == 0);
    const json docs = json::parse(std::ifstream(report));
    REQUIRE(docs.is_array());
    REQUIRE(docs.size() == 3);
    const double m_orig = docs[0]["m_max_percent_per_pu"].get<double>();
    const double m_der = docs[1]["m_max_percent_per_pu"].get<double>();
    const double m_tar = docs[2]["m_max_percent_per_pu"].get<double>();
    CHECK(docs[0]["representation"] == "orig");
    CHECK(m_tar <= m_der + 5.0);
    CHECK(m_der <= m_orig + 5.0);
    fs::remove(report);
}

TEST_CASE("simulate classifies and rejects bad steps") {
    const RunResult ok =
        run("simulate --grid " + test::fixture("single_der.json") + " --slope 0 --horizon 17");
    REQUIRE(ok.exit_code == 0);
    CHECK(json::parse(ok.output)["verdict"] == "asymptotically_stable");

    const RunResult bad =
        run("simulate --grid " + test::fixture("single_der.json") + " --slope 0 --dt 0");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("import-simbench round trip") {
    const fs::path out = temp_file("qucert_import.json");
    const std::string dir = test::fixture("simbench_excerpt");
    const RunResult r = run("import-simbench --nodes " + dir + "/Node.csv --lines " + dir +
                            "/Line.csv --trafos " + dir + "/Transformer.csv --loads " + dir +
                            "/Load.csv --res " + dir + "/RES.csv --out " + out.string());
    REQUIRE(r.exit_code == 0);
    const json doc = json::parse(std::ifstream(out));
    CHECK(doc["nodes"].size() == 6);
    CHECK(doc["branches"].size() == 4);
    CHECK(doc["ders"].size() == 2);
    const RunResult pf = run("powerflow --grid " + out.string());
    CHECK(pf.exit_code == 0);
    fs::remove(out);
}

TEST_CASE("responses emits plot-ready data") {
    const fs::path prefix = temp_file("qucert_resp");
    const RunResult r = run("responses --model wf-frc --horizon 40 --out " + prefix.string());
    REQUIRE(r.exit_code == 0);
    const fs::path step = prefix.string() + "_step.csv";
    const fs::path freq = prefix.string() + "_freq.csv";
    REQUIRE(fs::exists(step));
    REQUIRE(fs::exists(freq));

    std::ifstream sf(step);
    std::string line;
    std::getline(sf, line);
    CHECK(line == "time_s,orig,pt2_der,pt2_tar");
    // static gains: last row of all three close to 1; TAR peak near 1.15
    double t = 0, o = 0, d = 0, tar = 0, tar_peak = 0;
    char comma;
    while (std::getline(sf, line)) {
        std::istringstream ls(line);
        ls >> t >> comma >> o >> comma >> d >> comma >> tar;
        tar_peak = std::max(tar_peak, tar);
    }
    CHECK(o == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(d == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(tar == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(tar_peak == doctest::Approx(1.15).epsilon(0.01));

    // dominant-lag kink: |G(j0.5)| of the detailed model near 1/sqrt(2)
    std::ifstream ff(freq);
    std::getline(ff, line);
    double best_w = 0, best_mag = 0;
    while (std::getline(ff, line)) {
        std::istringstream ls(line);
        double w, mo;
        ls >> w >> comma >> mo;
        if (std::abs(w - 0.5) < std::abs(best_w - 0.5)) {
            best_w = w;
            best_mag = mo;
        }
    }
    CHECK(best_mag == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.02));
    fs::remove(step);
    fs::remove(freq);
}
