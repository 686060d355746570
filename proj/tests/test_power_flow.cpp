#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "qucert/power_flow.hpp"
#include "test_util.hpp"

using namespace qucert;

namespace {

// Two-node grid with a chosen p.u. reactance (on 110 kV, 100 MVA base).
GridModel two_bus(double x_pu, double r_pu, double load_mw) {
    GridModel g;
    g.base_mva = 100.0;
    const double z_base = 110.0 * 110.0 / 100.0;
    g.nodes = {{"s", 110.0, NodeKind::Slack, 1.0}, {"m", 110.0, NodeKind::Pq, {}}};
    g.branches = {{"l1", "s", "m", r_pu * z_base, x_pu * z_base, 0.0, 10.0}};
    if (load_mw != 0.0) g.loads = {{"m", load_mw, 0.0}};
    g.validate();
    return g;
}

DerPlant plant_at(const std::string& node, double p_mw, double p_op) {
    DerPlant d;
    d.id = "der_" + node;
    d.node = node;
    d.installed_power_mw = p_mw;
    d.rated_power_mw = p_mw;
    d.operating_power_mw = p_op;
    d.characteristic.rated_power = p_mw;
    return d;
}

// Gauss-Seidel oracle, independent of the Newton solver.
Eigen::VectorXcd gauss_seidel(const Eigen::MatrixXcd& y, const GridModel& g, int sweeps) {
    const int n = static_cast<int>(g.nodes.size());
    Eigen::VectorXcd s_spec = Eigen::VectorXcd::Zero(n);
    for (const auto& l : g.loads)
        s_spec(g.node_index(l.node)) -= Complex(l.p_mw, l.q_mvar) / g.base_mva;
    for (const auto& d : g.ders)
        s_spec(g.node_index(d.node)) += Complex(d.operating_power_mw, 0.0) / g.base_mva;
    const int slack = g.slack_index();
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n);
    v(slack) = g.nodes[slack].u_set_pu.value_or(1.0);
    for (int it = 0; it < sweeps; ++it) {
        for (int i = 0; i < n; ++i) {
            if (i == slack) continue;
            Complex acc = std::conj(s_spec(i) / v(i));
            for (int k = 0; k < n; ++k)
                if (k != i) acc -= y(i, k) * v(k);
            v(i) = acc / y(i, i);
        }
    }
    return v;
}

}  // namespace

TEST_CASE("build_admittance") {
    SUBCASE("single branch, x = 0.1 p.u.") {
        const GridModel g = two_bus(0.1, 0.0, 0.0);
        const Eigen::MatrixXcd y = build_admittance(g);
        CHECK(std::abs(y(0, 1) - Complex(0.0, 10.0)) < 1e-9);
        CHECK(std::abs(y(1, 0) - Complex(0.0, 10.0)) < 1e-9);
        CHECK(std::abs(y(0, 0) - Complex(0.0, -10.0)) < 1e-9);
    }
    SUBCASE("two parallel branches double the off-diagonal") {
        GridModel g = two_bus(0.1, 0.0, 0.0);
        Branch b2 = g.branches[0];
        b2.id = "l2";
        g.branches.push_back(b2);
        const Eigen::MatrixXcd y = build_admittance(g);
        CHECK(std::abs(y(0, 1) - Complex(0.0, 20.0)) < 1e-9);
    }
    SUBCASE("toy feeder matches a hand-assembled matrix") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        const Eigen::MatrixXcd got = build_admittance(g);
        const int n = static_cast<int>(g.nodes.size());
        Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(n, n);
        for (const auto& br : g.branches) {
            const int f = g.node_index(br.from), t = g.node_index(br.to);
            const double zb = 110.0 * 110.0 / 100.0;
            const Complex ys = 1.0 / Complex(br.r_ohm / zb, br.x_ohm / zb);
            const Complex sh(0.0, 0.5 * br.b_us * 1e-6 * zb);
            ref(f, f) += ys + sh;
            ref(t, t) += ys + sh;
            ref(f, t) -= ys;
            ref(t, f) -= ys;
        }
        CHECK((got - ref).norm() < 1e-12);
    }
    SUBCASE("row sums equal the total shunt at each node") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        const Eigen::MatrixXcd y = build_admittance(g);
        for (int i = 0; i < y.rows(); ++i) {
            double shunt = 0.0;
            const double zb = 110.0 * 110.0 / 100.0;
            for (const auto& br : g.branches)
                if (g.node_index(br.from) == i || g.node_index(br.to) == i)
                    shunt += 0.5 * br.b_us * 1e-6 * zb;
            CHECK(std::abs(y.row(i).sum() - Complex(0.0, shunt)) < 1e-12);
        }
    }
}

TEST_CASE("power flow solve") {
    SUBCASE("flat case without injections") {
        GridModel g;
        g.base_mva = 100.0;
        g.nodes = {{"a", 110.0, NodeKind::Slack, 1.03},
                   {"b", 110.0, NodeKind::Pq, {}},
                   {"c", 110.0, NodeKind::Pq, {}}};
        g.branches = {{"l1", "a", "b", 1.0, 8.0, 0.0, 10.0}, {"l2", "b", "c", 1.0, 8.0, 0.0, 10.0}};
        g.validate();
        const PowerFlowSolution sol = solve_power_flow(g);
        for (int i = 0; i < 3; ++i) {
            CHECK(sol.v_mag(i) == doctest::Approx(1.03).epsilon(1e-10));
            CHECK(sol.v_angle(i) == doctest::Approx(0.0).epsilon(1e-10));
        }
        CHECK(sol.iterations <= 1);
    }
    SUBCASE("two-bus analytic receiving-end voltage") {
        // lossless: V2^2 = (V1^2 + sqrt(V1^4 - 4 P^2 x^2)) / 2
        const GridModel g = two_bus(0.1, 0.0, 50.0);
        const PowerFlowSolution sol = solve_power_flow(g);
        const double expected = std::sqrt((1.0 + std::sqrt(1.0 - 4.0 * 0.25 * 0.01)) / 2.0);
        CHECK(sol.v_mag(1) == doctest::Approx(expected).epsilon(1e-8));
    }
    SUBCASE("matches a Gauss-Seidel oracle") {
        GridModel g = two_bus(0.12, 0.03, 35.0);
        g.ders.push_back(plant_at("m", 20.0, 12.0));
        g.validate();
        const PowerFlowSolution sol = solve_power_flow(g);
        const Eigen::VectorXcd v = gauss_seidel(build_admittance(g), g, 400);
        CHECK(sol.v_mag(1) == doctest::Approx(std::abs(v(1))).epsilon(1e-7));
        CHECK(sol.v_angle(1) == doctest::Approx(std::arg(v(1))).epsilon(1e-6));
    }
    SUBCASE("slack balances load plus losses on the toy feeder") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        const PowerFlowSolution sol = solve_power_flow(g);
        // independent loss evaluation from branch currents
        double loss_pu = 0.0;
        const double zb = 110.0 * 110.0 / 100.0;
        for (const auto& br : g.branches) {
            const int f = g.node_index(br.from), t = g.node_index(br.to);
            const Complex vf = std::polar(sol.v_mag(f), sol.v_angle(f));
            const Complex vt = std::polar(sol.v_mag(t), sol.v_angle(t));
            const Complex i = (vf - vt) / Complex(br.r_ohm / zb, br.x_ohm / zb);
            loss_pu += std::norm(i) * br.r_ohm / zb;
        }
        CHECK(sol.p_injection.sum() == doctest::Approx(loss_pu).epsilon(1e-6));
        CHECK(sol.iterations <= 10);
    }
    SUBCASE("diverges on an infeasible transfer") {
        const GridModel g = two_bus(0.1, 0.0, 700.0);
        CHECK_THROWS_AS(solve_power_flow(g), ComputationError);
    }
    SUBCASE("warm start from the converged point") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        const PowerFlowSolution first = solve_power_flow(g);
        const PowerFlowSolution again = solve_power_flow(g, {}, nullptr, &first);
        CHECK(again.iterations <= 2);
    }
    SUBCASE("injection overrides shift the operating point") {
        GridModel g = two_bus(0.1, 0.0, 0.0);
        g.ders.push_back(plant_at("m", 50.0, 0.0));
        g.validate();
        InjectionOverride inj;
        inj.der_p_mw = Eigen::VectorXd::Constant(1, 0.0);
        inj.der_q_mvar = Eigen::VectorXd::Constant(1, 20.0);
        const PowerFlowSolution sol = solve_power_flow(g, {}, &inj);
        CHECK(sol.v_mag(1) > 1.0);  // capacitive injection raises the voltage
    }
}

TEST_CASE("sensitivity") {
    SUBCASE("two-bus light load is close to the line reactance") {
        GridModel g = two_bus(0.1, 0.0, 1.0);
        g.ders.push_back(plant_at("m", 10.0, 0.5));
        g.validate();
        const PowerFlowSolution sol = solve_power_flow(g);
        const SensitivityMatrix k = sensitivity(g, sol);
        REQUIRE(k.entries.rows() == 1);
        CHECK(k.entries(0, 0) == doctest::Approx(0.1).epsilon(0.02));
    }
    SUBCASE("single DER gives a 1x1 matrix") {
        GridModel g = two_bus(0.1, 0.0, 5.0);
        g.ders.push_back(plant_at("m", 10.0, 5.0));
        g.validate();
        const SensitivityMatrix k = sensitivity(g, solve_power_flow(g));
        CHECK(k.entries.rows() == 1);
        CHECK(k.entries.cols() == 1);
        CHECK(k.der_order == std::vector<std::string>{"der_m"});
    }
    SUBCASE("finite-difference consistency on the toy feeder") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        PowerFlowOptions tight;
        tight.tolerance = 1e-12;
        const PowerFlowSolution sol = solve_power_flow(g, tight);
        const SensitivityMatrix k = sensitivity(g, sol);
        const double h = 1e-4;  // p.u. on the system base
        const int nd = static_cast<int>(g.ders.size());
        for (int j = 0; j < nd; ++j) {
            InjectionOverride up, dn;
            up.der_q_mvar = Eigen::VectorXd::Zero(nd);
            dn.der_q_mvar = Eigen::VectorXd::Zero(nd);
            up.der_q_mvar(j) = h * g.base_mva;
            dn.der_q_mvar(j) = -h * g.base_mva;
            const PowerFlowSolution sp = solve_power_flow(g, tight, &up);
            const PowerFlowSolution sm = solve_power_flow(g, tight, &dn);
            for (int i = 0; i < nd; ++i) {
                const int node = g.node_index(g.ders[i].node);
                const double fd = (sp.v_mag(node) - sm.v_mag(node)) / (2.0 * h);
                CHECK(std::abs(k.entries(i, j) - fd) < 1e-4);
                CHECK(std::abs(k.entries(i, j) - fd) / std::abs(fd) < 1e-4);
            }
        }
    }
    SUBCASE("radial reactive grids have non-negative entries") {
        std::mt19937 rng(97);
        std::uniform_real_distribution<double> xr(4.0, 20.0), pw(2.0, 25.0);
        for (int trial = 0; trial < 10; ++trial) {
            GridModel g;
            g.base_mva = 100.0;
            const int n = 4;
            g.nodes.push_back({"n0", 110.0, NodeKind::Slack, 1.0});
            for (int i = 1; i <= n; ++i) {
                g.nodes.push_back({"n" + std::to_string(i), 110.0, NodeKind::Pq, {}});
                g.branches.push_back({"b" + std::to_string(i), "n" + std::to_string(i - 1),
                                      "n" + std::to_string(i), 0.5, xr(rng), 0.0, 10.0});
            }
            g.loads.push_back({"n2", pw(rng), 2.0});
            g.ders.push_back(plant_at("n1", pw(rng), 4.0));
            g.ders.push_back(plant_at("n" + std::to_string(n), pw(rng), 4.0));
            g.validate();
            const SensitivityMatrix k = sensitivity(g, solve_power_flow(g));
            CHECK((k.entries.array() >= 0.0).all());
        }
    }
    SUBCASE("active-power block reacts along the feeder") {
        const GridModel g = load_grid_file(test::fixture("toy_feeder.json"));
        const PowerFlowSolution sol = solve_power_flow(g);
        const Eigen::MatrixXd kp = sensitivity_p(g, sol);
        CHECK(kp.rows() == 2);
        CHECK((kp.array() > 0.0).all());  // feeding in more P raises feeder voltages
    }
}
