#include "qucert/power_flow.hpp"

#include <cmath>

namespace qucert {

namespace {

struct NodePowers {
    Eigen::VectorXd p, q;  // computed injections, p.u.
};

NodePowers injections(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm,
                      const Eigen::VectorXd& va) {
    const int n = static_cast<int>(vm.size());
    NodePowers out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (int i = 0; i < n; ++i) {
        double pi = 0.0, qi = 0.0;
        for (int k = 0; k < n; ++k) {
            const double g = y(i, k).real(), b = y(i, k).imag();
            const double th = va(i) - va(k);
            pi += vm(k) * (g * std::cos(th) + b * std::sin(th));
            qi += vm(k) * (g * std::sin(th) - b * std::cos(th));
        }
        out.p(i) = vm(i) * pi;
        out.q(i) = vm(i) * qi;
    }
    return out;
}

// Standard polar-form blocks, unknowns [theta(pq); v(pq)], mismatches [P(pq); Q(pq)].
Eigen::MatrixXd jacobian(const Eigen::MatrixXcd& y, const Eigen::VectorXd& vm,
                         const Eigen::VectorXd& va, const NodePowers& calc,
                         const std::vector<int>& pq) {
    const int m = static_cast<int>(pq.size());
    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (int r = 0; r < m; ++r) {
        const int i = pq[r];
        for (int c = 0; c < m; ++c) {
            const int j = pq[c];
            const double g = y(i, j).real(), b = y(i, j).imag();
            if (i == j) {
                jac(r, c) = -calc.q(i) - b * vm(i) * vm(i);
                jac(r, m + c) = calc.p(i) / vm(i) + g * vm(i);
                jac(m + r, c) = calc.p(i) - g * vm(i) * vm(i);
                jac(m + r, m + c) = calc.q(i) / vm(i) - b * vm(i);
            } else {
                const double th = va(i) - va(j);
                const double gc = g * std::cos(th) + b * std::sin(th);
                const double gs = g * std::sin(th) - b * std::cos(th);
                jac(r, c) = vm(i) * vm(j) * gs;
                jac(r, m + c) = vm(i) * gc;
                jac(m + r, c) = -vm(i) * vm(j) * gc;
                jac(m + r, m + c) = vm(i) * gs;
            }
        }
    }
    return jac;
}

Eigen::VectorXd specified_power(const GridModel& grid, const InjectionOverride* inject, bool reactive) {
    const int n = static_cast<int>(grid.nodes.size());
    Eigen::VectorXd spec = Eigen::VectorXd::Zero(n);
    for (const auto& l : grid.loads)
        spec(grid.node_index(l.node)) -= (reactive ? l.q_mvar : l.p_mw) / grid.base_mva;
    for (std::size_t d = 0; d < grid.ders.size(); ++d) {
        double value = reactive ? 0.0 : grid.ders[d].operating_power_mw;
        if (inject) {
            const auto& v = reactive ? inject->der_q_mvar : inject->der_p_mw;
            if (v.size() == static_cast<Eigen::Index>(grid.ders.size()) && std::isfinite(v(d)))
                value = v(d);
        }
        spec(grid.node_index(grid.ders[d].node)) += value / grid.base_mva;
    }
    return spec;
}

std::vector<int> pq_indices(const GridModel& grid) {
    std::vector<int> pq;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i)
        if (grid.nodes[i].kind != NodeKind::Slack) pq.push_back(static_cast<int>(i));
    return pq;
}

}  // namespace

Eigen::MatrixXcd build_admittance(const GridModel& grid) {
    const int n = static_cast<int>(grid.nodes.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);

    for (const auto& br : grid.branches) {
        const int f = grid.node_index(br.from), t = grid.node_index(br.to);
        if (br.r_ohm == 0.0 && br.x_ohm == 0.0)
            throw ComputationError("branch \"" + br.id + "\": zero impedance");
        // Absolute impedances on the from-node voltage base.
        const double z_base = grid.nodes[f].vn_kv * grid.nodes[f].vn_kv / grid.base_mva;
        const Complex z(br.r_ohm / z_base, br.x_ohm / z_base);
        const Complex ys = 1.0 / z;
        const Complex shunt(0.0, 0.5 * br.b_us * 1e-6 * z_base);
        y(f, f) += ys + shunt;
        y(t, t) += ys + shunt;
        y(f, t) -= ys;
        y(t, f) -= ys;
    }

    for (const auto& tr : grid.transformers) {
        const int h = grid.node_index(tr.hv_node), l = grid.node_index(tr.lv_node);
        const double uk = tr.uk_percent / 100.0, ur = tr.ur_percent / 100.0;
        const double ux = std::sqrt(std::max(uk * uk - ur * ur, 0.0));
        if (uk == 0.0) throw ComputationError("transformer \"" + tr.id + "\": zero impedance");
        const Complex z = Complex(ur, ux) * (grid.base_mva / tr.s_rated_mva);
        const Complex ys = 1.0 / z;
        const double ratio = 1.0 + tr.tap_pos * tr.tap_step_percent / 100.0;  // tap on HV side
        y(h, h) += ys / (ratio * ratio);
        y(l, l) += ys;
        y(h, l) -= ys / ratio;
        y(l, h) -= ys / ratio;
    }
    return y;
}

PowerFlowSolution solve_power_flow(const GridModel& grid, const PowerFlowOptions& options,
                                   const InjectionOverride* inject,
                                   const PowerFlowSolution* warm_start) {
    const int n = static_cast<int>(grid.nodes.size());
    const Eigen::MatrixXcd y = build_admittance(grid);
    const std::vector<int> pq = pq_indices(grid);
    const int m = static_cast<int>(pq.size());
    const int slack = grid.slack_index();

    const Eigen::VectorXd p_spec = specified_power(grid, inject, false);
    const Eigen::VectorXd q_spec = specified_power(grid, inject, true);

    Eigen::VectorXd vm =
        Eigen::VectorXd::Constant(n, grid.nodes[slack].u_set_pu.value_or(1.0));
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
    if (warm_start) {
        vm = warm_start->v_mag;
        va = warm_start->v_angle;
    }
    vm(slack) = grid.nodes[slack].u_set_pu.value_or(1.0);
    va(slack) = 0.0;

    PowerFlowSolution sol;
    for (int iter = 0;; ++iter) {
        const NodePowers calc = injections(y, vm, va);
        Eigen::VectorXd f(2 * m);
        for (int r = 0; r < m; ++r) {
            f(r) = calc.p(pq[r]) - p_spec(pq[r]);
            f(m + r) = calc.q(pq[r]) - q_spec(pq[r]);
        }
        sol.max_mismatch = m > 0 ? f.cwiseAbs().maxCoeff() : 0.0;
        if (sol.max_mismatch < options.tolerance) {
            sol.v_mag = vm;
            sol.v_angle = va;
            sol.p_injection = calc.p;
            sol.q_injection = calc.q;
            sol.iterations = iter;
            return sol;
        }
        if (iter >= options.max_iterations)
            throw ComputationError("power flow did not converge in " +
                                   std::to_string(options.max_iterations) + " iterations (mismatch " +
                                   std::to_string(sol.max_mismatch) + " p.u.)");

        const Eigen::MatrixXd jac = jacobian(y, vm, va, calc, pq);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) throw ComputationError("power flow Jacobian is singular");
        const Eigen::VectorXd dx = lu.solve(-f);
        for (int r = 0; r < m; ++r) {
            va(pq[r]) += dx(r);
            vm(pq[r]) += dx(m + r);
            if (vm(pq[r]) <= 0.0)
                throw ComputationError("power flow produced a non-positive voltage magnitude");
        }
    }
}

namespace {

Eigen::MatrixXd inverse_jacobian(const GridModel& grid, const PowerFlowSolution& solution) {
    const Eigen::MatrixXcd y = build_admittance(grid);
    const std::vector<int> pq = pq_indices(grid);
    const NodePowers calc = injections(y, solution.v_mag, solution.v_angle);
    const Eigen::MatrixXd jac = jacobian(y, solution.v_mag, solution.v_angle, calc, pq);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw ComputationError("sensitivity: Jacobian is singular");
    return lu.inverse();
}

// dU(der rows) / d{P or Q}(der cols) of the inverse Jacobian.
Eigen::MatrixXd voltage_block(const GridModel& grid, const PowerFlowSolution& solution,
                              bool reactive) {
    const std::vector<int> pq = pq_indices(grid);
    const int m = static_cast<int>(pq.size());
    std::vector<int> pos(grid.nodes.size(), -1);
    for (int r = 0; r < m; ++r) pos[pq[r]] = r;

    const Eigen::MatrixXd inv = inverse_jacobian(grid, solution);
    const int nd = static_cast<int>(grid.ders.size());
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nd, nd);
    for (int i = 0; i < nd; ++i) {
        const int ri = pos[grid.node_index(grid.ders[i].node)];
        if (ri < 0) continue;  // DER at the slack node: voltage is held there
        for (int j = 0; j < nd; ++j) {
            const int cj = pos[grid.node_index(grid.ders[j].node)];
            if (cj < 0) continue;
            block(i, j) = inv(m + ri, reactive ? m + cj : cj);
        }
    }
    return block;
}

}  // namespace

SensitivityMatrix sensitivity(const GridModel& grid, const PowerFlowSolution& solution) {
    SensitivityMatrix k;
    k.entries = voltage_block(grid, solution, true);
    for (const auto& d : grid.ders) k.der_order.push_back(d.id);
    if (!k.entries.allFinite()) throw ComputationError("sensitivity: non-finite entries");
    return k;
}

Eigen::MatrixXd sensitivity_p(const GridModel& grid, const PowerFlowSolution& solution) {
    return voltage_block(grid, solution, false);
}

}  // namespace qucert
