#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "qucert/der_models.hpp"

using namespace qucert;

namespace {

QuCharacteristic make_qu(double slope, double deadband, double p_r, double limit = 0.33) {
    QuCharacteristic ch;
    ch.u_ref = 1.0;
    ch.slope = slope;
    ch.deadband = deadband;
    ch.q_limit_share = limit;
    ch.rated_power = p_r;
    return ch;
}

}  // namespace

TEST_CASE("qu_evaluate") {
    SUBCASE("zero at the reference voltage") {
        CHECK(qu_evaluate(make_qu(20.0, 0.0, 100.0), 1.0, 100.0) == 0.0);
    }
    SUBCASE("slope arithmetic: 20 %/p.u. at e = 0.05") {
        CHECK(qu_evaluate(make_qu(20.0, 0.0, 100.0), 1.05, 100.0) == doctest::Approx(0.01));
        CHECK(qu_evaluate(make_qu(20.0, 0.0, 100.0), 0.95, 100.0) == doctest::Approx(-0.01));
    }
    SUBCASE("saturation at the limit share") {
        const QuCharacteristic ch = make_qu(400.0, 0.0, 50.0);
        CHECK(qu_evaluate(ch, 1.2, 100.0) == doctest::Approx(0.33 * 0.5));
        CHECK(qu_evaluate(ch, 0.8, 100.0) == doctest::Approx(-0.33 * 0.5));
    }
    SUBCASE("dead band") {
        const QuCharacteristic ch = make_qu(20.0, 0.01, 100.0);
        CHECK(qu_evaluate(ch, 1.009, 100.0) == 0.0);
        CHECK(qu_evaluate(ch, 1.011, 100.0) ==
              doctest::Approx(0.2 * (0.011 - 0.01)).epsilon(1e-12));
    }
    SUBCASE("rejects non-positive voltage") {
        CHECK_THROWS_AS(qu_evaluate(make_qu(20.0, 0.0, 100.0), 0.0, 100.0), SchemaError);
    }
}

TEST_CASE("sector_bound") {
    CHECK(sector_bound(make_qu(0.0, 0.0, 100.0), 100.0) == 0.0);
    CHECK(sector_bound(make_qu(20.0, 0.0, 100.0), 100.0) == doctest::Approx(0.2));
    // the dead band does not change the bound
    CHECK(sector_bound(make_qu(20.0, 0.01, 100.0), 100.0) ==
          sector_bound(make_qu(20.0, 0.0, 100.0), 100.0));
}

TEST_CASE("sector containment and symmetry over random samples") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> slope(0.0, 400.0), db(0.0, 0.02), pr(1.0, 200.0),
        lim(0.05, 1.0), dev(1e-6, 0.25);
    int checked = 0;
    for (int i = 0; i < 1000000; ++i) {
        const QuCharacteristic ch = make_qu(slope(rng), db(rng), pr(rng), lim(rng));
        const double e = dev(rng);
        const double beta = sector_bound(ch, 100.0);
        const double q = qu_evaluate(ch, 1.0 + e, 100.0);
        const double ratio = q / e;
        if (ratio < -1e-15 || ratio > beta * (1.0 + 1e-12)) {
            ++checked;  // count violations, assert once below
        }
        // odd symmetry
        if (std::abs(q + qu_evaluate(ch, 1.0 - e, 100.0)) > 1e-15) ++checked;
    }
    CHECK(checked == 0);
}

TEST_CASE("qu_evaluate is nondecreasing") {
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> slope(0.0, 300.0), db(0.0, 0.02), dev(-0.3, 0.3);
    for (int i = 0; i < 20000; ++i) {
        const QuCharacteristic ch = make_qu(slope(rng), db(rng), 80.0);
        double e1 = dev(rng), e2 = dev(rng);
        if (e1 > e2) std::swap(e1, e2);
        CHECK(qu_evaluate(ch, 1.0 + e1, 100.0) <= qu_evaluate(ch, 1.0 + e2, 100.0) + 1e-15);
    }
}

TEST_CASE("build_control_loop") {
    SUBCASE("degenerate chain approaches static gain 1") {
        DerControlParams p;
        p.t_u = 0.0;
        p.t_dq = 0.0;
        p.t_q = 0.0;
        p.t_l = 0.0;
        p.t_g = 0.0;
        const DelayedTransfer g = build_control_loop(DerKind::WfFrc, p);
        CHECK(g.static_gain() == doctest::Approx(1.0));
        CHECK(std::abs(g.response(3.0) - Complex(1.0, 0.0)) < 1e-12);
    }
    SUBCASE("reference wind farm: unit static gain, dominant pole at -1/T_dQ") {
        const DelayedTransfer g = build_control_loop(DerKind::WfFrc, {});
        CHECK(std::abs(g.response(1e-9)) == doctest::Approx(1.0).epsilon(1e-6));
        const Eigen::VectorXcd poles = eigenvalues(g.realization(3).A);
        double slowest = -1e9;
        for (Eigen::Index i = 0; i < poles.size(); ++i)
            slowest = std::max(slowest, poles(i).real());
        CHECK(slowest == doctest::Approx(-0.5).epsilon(1e-9));
    }
    SUBCASE("photovoltaic farm parameters") {
        const DerControlParams p = default_control_params(DerKind::Pvf);
        CHECK(p.va_order == 3);
        CHECK(p.t_l == doctest::Approx(0.0033));
        CHECK(p.t_g == doctest::Approx(0.1));
        const DelayedTransfer g = build_control_loop(DerKind::Pvf, p);
        CHECK(std::abs(g.response(1e-9)) == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("all table parameter sets give strictly proper stable unit-gain loops") {
        for (DerKind kind : {DerKind::WfFrc, DerKind::WfDfig, DerKind::Pvf}) {
            const DelayedTransfer g = build_control_loop(kind, default_control_params(kind));
            CHECK(g.tf.degree_num() < g.tf.degree_den());
            CHECK(g.static_gain() == doctest::Approx(1.0));
            const Eigen::VectorXcd poles = eigenvalues(g.realization(3).A);
            CHECK(poles.real().maxCoeff() < 0.0);
        }
    }
    SUBCASE("rejects invalid parameters") {
        DerControlParams p;
        p.k_q = 0.0;
        CHECK_THROWS_AS(build_control_loop(DerKind::WfFrc, p), SchemaError);
        p = {};
        p.t_dq = -1.0;
        CHECK_THROWS_AS(build_control_loop(DerKind::WfFrc, p), SchemaError);
        CHECK_THROWS_AS(build_control_loop(DerKind::Pt2, {}), SchemaError);
    }
}

TEST_CASE("build_pt2") {
    SUBCASE("guideline fit parameters") {
        const RationalTransfer g = build_pt2({1.0, 0.517, 2.335});
        CHECK(g.num == std::vector<double>{1.0});
        REQUIRE(g.den.size() == 3);
        CHECK(g.den[1] == doctest::Approx(2.0 * 0.517 * 2.335));
        CHECK(g.den[2] == doctest::Approx(2.335 * 2.335));
    }
    SUBCASE("critical damping gives a repeated pole") {
        const Eigen::VectorXcd poles = eigenvalues(realize(build_pt2({1.0, 1.0, 1.0})).A);
        CHECK(poles(0).real() == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(poles(1).real() == doctest::Approx(-1.0).epsilon(1e-6));
        CHECK(std::abs(poles(0).imag()) < 1e-6);
    }
    SUBCASE("rejects invalid parameters") {
        CHECK_THROWS_AS(build_pt2({0.0, 0.5, 1.0}), SchemaError);
        CHECK_THROWS_AS(build_pt2({1.0, -0.5, 1.0}), SchemaError);
    }
}
