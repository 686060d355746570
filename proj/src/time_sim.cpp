#include "qucert/time_sim.hpp"

#include <cmath>
#include <fstream>

namespace qucert {

namespace {

// Controller state block of one DER: voltage-averaging cascade, setpoint lag,
// PI integrator and current-control lag. The dead time lives in a sample
// buffer outside the ODE states.
struct DerStates {
    Eigen::VectorXd va;     // averaging cascade outputs
    double setpoint = 0.0;  // PT1(T_dQ) output
    double integ = 0.0;     // PI integral of the tracking error
    double q_out = 0.0;     // current-control lag output = injected Q, p.u.
};

struct DerBlock {
    DerControlParams p;
    QuCharacteristic qu;
    int delay_steps = 0;
    std::vector<double> buffer;  // setpoint history ring
    int head = 0;

    double delayed_setpoint() const {
        return buffer.empty() ? 0.0 : buffer[head];
    }
    void push(double value) {
        if (buffer.empty()) return;
        buffer[head] = value;
        head = (head + 1) % static_cast<int>(buffer.size());
    }
};

// Derivatives with the terminal voltage and the delayed setpoint held.
void derivatives(const DerBlock& blk, const DerStates& s, double u_terminal, double delayed_sp,
                 double base_mva, DerStates& ds) {
    const auto& p = blk.p;
    ds.va.resize(s.va.size());
    double stage_in = u_terminal;
    for (Eigen::Index k = 0; k < s.va.size(); ++k) {
        ds.va(k) = (stage_in - s.va(k)) / p.t_u;
        stage_in = s.va(k);
    }
    const double u_filtered = s.va.size() > 0 ? s.va(s.va.size() - 1) : u_terminal;

    // Positive-slope characteristic inside the negative feedback loop.
    const double q_cmd = -qu_evaluate(blk.qu, u_filtered, base_mva);
    ds.setpoint = p.t_dq > 0.0 ? (q_cmd - s.setpoint) / p.t_dq : 0.0;

    const double err = delayed_sp - s.q_out;
    ds.integ = err;
    const double pi_out = p.k_q * err + p.k_q / p.t_q * s.integ;
    ds.q_out = (pi_out - s.q_out) / p.t_l;
}

double setpoint_value(const DerBlock& blk, const DerStates& s, double u_terminal,
                      double base_mva) {
    if (blk.p.t_dq > 0.0) return s.setpoint;
    const double u_filtered = s.va.size() > 0 ? s.va(s.va.size() - 1) : u_terminal;
    return -qu_evaluate(blk.qu, u_filtered, base_mva);
}

}  // namespace

std::string to_string(StabilityClassification::Verdict v) {
    switch (v) {
        case StabilityClassification::Verdict::AsymptoticallyStable: return "asymptotically_stable";
        case StabilityClassification::Verdict::NotDecayed: return "not_decayed";
        case StabilityClassification::Verdict::Diverged: return "diverged";
    }
    return "unknown";
}

SimTrace simulate(const GridModel& grid, const SimScenario& sc) {
    if (sc.dt_s <= 0.0) throw SchemaError("simulate: dt must be positive");
    if (sc.horizon_s <= sc.ramp.start_s + sc.ramp.duration_s + 10.0)
        throw SchemaError("simulate: horizon must exceed ramp end plus the 10 s window");
    if (sc.ramp.p_initial_share < 0.0 || sc.ramp.p_initial_share > sc.ramp.p_final_share ||
        sc.ramp.p_final_share > 1.0)
        throw SchemaError("simulate: ramp shares must satisfy 0 <= initial <= final <= 1");
    const int nd = static_cast<int>(grid.ders.size());
    if (nd == 0) throw SchemaError("simulate: grid has no DER plants");

    // Initial operating point: ramped-down feed-in, zero reactive power.
    InjectionOverride inject;
    inject.der_p_mw.resize(nd);
    inject.der_q_mvar = Eigen::VectorXd::Zero(nd);
    for (int i = 0; i < nd; ++i)
        inject.der_p_mw(i) = sc.ramp.p_initial_share * grid.ders[i].installed_power_mw;
    PowerFlowSolution base = solve_power_flow(grid, {}, &inject);

    Eigen::VectorXd u0(nd), p0(nd);
    for (int i = 0; i < nd; ++i) {
        u0(i) = base.v_mag(grid.node_index(grid.ders[i].node));
        p0(i) = inject.der_p_mw(i) / grid.base_mva;
    }
    const Eigen::MatrixXd kq = sensitivity(grid, base).entries;
    const Eigen::MatrixXd kp = sensitivity_p(grid, base);

    std::vector<DerBlock> blocks(nd);
    std::vector<DerStates> states(nd);
    for (int i = 0; i < nd; ++i) {
        auto& blk = blocks[i];
        blk.p = grid.ders[i].control_params;
        if (grid.ders[i].model_kind == DerKind::Pt2)
            throw SchemaError("simulate: pt2 plants have no simulatable control chain");
        if (blk.p.t_q <= 0.0 || blk.p.t_l <= 0.0 || blk.p.t_u <= 0.0)
            throw SchemaError("simulate: t_u, t_q, t_l must be positive");
        blk.qu = grid.ders[i].characteristic;
        blk.qu.slope = sc.slope;
        if (sc.uref_from_initial) blk.qu.u_ref = u0(i);
        blk.delay_steps = static_cast<int>(std::llround(blk.p.t_g / sc.dt_s));
        blk.buffer.assign(std::max(blk.delay_steps, 0), 0.0);
        states[i].va = Eigen::VectorXd::Constant(blk.p.va_order, u0(i));
    }

    const int steps = static_cast<int>(std::llround(sc.horizon_s / sc.dt_s));
    SimTrace tr;
    tr.time.reserve(steps + 1);
    tr.voltages.resize(steps + 1, nd);
    tr.reactive_power.resize(steps + 1, nd);
    for (const auto& d : grid.ders) tr.der_ids.push_back(d.id);

    Eigen::VectorXd u = u0;
    PowerFlowSolution last_pf = base;
    for (int k = 0; k <= steps; ++k) {
        const double t = k * sc.dt_s;
        const double ramp_pos =
            std::clamp((t - sc.ramp.start_s) / std::max(sc.ramp.duration_s, 1e-12), 0.0, 1.0);
        const double share =
            sc.ramp.p_initial_share + (sc.ramp.p_final_share - sc.ramp.p_initial_share) * ramp_pos;

        Eigen::VectorXd q(nd), p(nd);
        for (int i = 0; i < nd; ++i) {
            q(i) = states[i].q_out;
            p(i) = share * grid.ders[i].installed_power_mw / grid.base_mva;
        }

        // Algebraic grid update with the current injections.
        if (sc.coupling == Coupling::Linearized) {
            u = u0 + kq * q + kp * (p - p0);
        } else {
            InjectionOverride step_inject;
            step_inject.der_p_mw = p * grid.base_mva;
            step_inject.der_q_mvar = q * grid.base_mva;
            try {
                last_pf = solve_power_flow(grid, {}, &step_inject, &last_pf);
            } catch (const ComputationError&) {
                tr.truncated = true;
                tr.time.resize(k);
                tr.voltages.conservativeResize(k, nd);
                tr.reactive_power.conservativeResize(k, nd);
                return tr;
            }
            for (int i = 0; i < nd; ++i)
                u(i) = last_pf.v_mag(grid.node_index(grid.ders[i].node));
        }

        tr.time.push_back(t);
        for (int i = 0; i < nd; ++i) {
            tr.voltages(k, i) = u(i);
            tr.reactive_power(k, i) = q(i);
        }
        if (k == steps) break;

        // RK4 over the controller states; voltage and delayed setpoint held.
        for (int i = 0; i < nd; ++i) {
            auto& s = states[i];
            // Read the value from delay_steps samples ago, then record the
            // current one, so the transport delay is exactly delay_steps * dt.
            double delayed = setpoint_value(blocks[i], s, u(i), grid.base_mva);
            if (blocks[i].delay_steps > 0) {
                const double current = delayed;
                delayed = blocks[i].delayed_setpoint();
                blocks[i].push(current);
            }
            DerStates k1, k2, k3, k4, tmp;
            auto advance = [&](const DerStates& from, const DerStates& deriv, double h,
                               DerStates& out) {
                out.va = from.va + h * deriv.va;
                out.setpoint = from.setpoint + h * deriv.setpoint;
                out.integ = from.integ + h * deriv.integ;
                out.q_out = from.q_out + h * deriv.q_out;
            };
            derivatives(blocks[i], s, u(i), delayed, grid.base_mva, k1);
            advance(s, k1, 0.5 * sc.dt_s, tmp);
            derivatives(blocks[i], tmp, u(i), delayed, grid.base_mva, k2);
            advance(s, k2, 0.5 * sc.dt_s, tmp);
            derivatives(blocks[i], tmp, u(i), delayed, grid.base_mva, k3);
            advance(s, k3, sc.dt_s, tmp);
            derivatives(blocks[i], tmp, u(i), delayed, grid.base_mva, k4);
            s.va += sc.dt_s / 6.0 * (k1.va + 2.0 * k2.va + 2.0 * k3.va + k4.va);
            s.setpoint += sc.dt_s / 6.0 *
                          (k1.setpoint + 2.0 * k2.setpoint + 2.0 * k3.setpoint + k4.setpoint);
            s.integ += sc.dt_s / 6.0 * (k1.integ + 2.0 * k2.integ + 2.0 * k3.integ + k4.integ);
            s.q_out += sc.dt_s / 6.0 * (k1.q_out + 2.0 * k2.q_out + 2.0 * k3.q_out + k4.q_out);
        }
    }
    return tr;
}

StabilityClassification classify(const SimTrace& trace, double ramp_end_s, double decay_threshold,
                                 double divergence_guard) {
    constexpr double window_s = 5.0;  // split halves of the 10 s decay window
    StabilityClassification cls;
    cls.window = {ramp_end_s, ramp_end_s + 2.0 * window_s};
    if (trace.time.empty() || trace.time.back() < ramp_end_s + 2.0 * window_s)
        throw SchemaError("classify: trace does not cover the classification window");

    const int nd = static_cast<int>(trace.voltages.cols());
    for (Eigen::Index k = 0; k < trace.voltages.rows(); ++k)
        for (int i = 0; i < nd; ++i) {
            const double v = trace.voltages(k, i);
            if (!std::isfinite(v) || std::abs(v - 1.0) > divergence_guard) {
                cls.verdict = StabilityClassification::Verdict::Diverged;
                cls.decay_ratio = std::numeric_limits<double>::infinity();
                return cls;
            }
        }

    auto peak_to_peak = [&](double t0, double t1, int col) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t k = 0; k < trace.time.size(); ++k) {
            if (trace.time[k] < t0 || trace.time[k] > t1) continue;
            lo = std::min(lo, trace.voltages(static_cast<Eigen::Index>(k), col));
            hi = std::max(hi, trace.voltages(static_cast<Eigen::Index>(k), col));
        }
        return hi - lo;
    };

    double worst = 0.0;
    for (int i = 0; i < nd; ++i) {
        const double first = peak_to_peak(ramp_end_s, ramp_end_s + window_s, i);
        const double second = peak_to_peak(ramp_end_s + window_s, ramp_end_s + 2.0 * window_s, i);
        if (first < 1e-12) continue;  // flat channel, nothing to decay
        worst = std::max(worst, second / first);
    }
    cls.decay_ratio = worst;
    cls.verdict = worst < decay_threshold ? StabilityClassification::Verdict::AsymptoticallyStable
                                          : StabilityClassification::Verdict::NotDecayed;
    return cls;
}

SimThresholdResult find_sim_threshold(const GridModel& grid, const SimScenario& base,
                                      const SimSearchOptions& search) {
    if (search.m_start <= 0.0 || search.m_cap <= search.m_start || search.tolerance <= 0.0)
        throw SchemaError("find_sim_threshold: need 0 < m_start < m_cap and positive tolerance");

    SimThresholdResult res;
    const double ramp_end = base.ramp.start_s + base.ramp.duration_s;
    auto stable_at = [&](double m) {
        SimScenario sc = base;
        sc.slope = m;
        const SimTrace tr = simulate(grid, sc);
        ++res.evaluations;
        if (tr.truncated) return false;
        return classify(tr, ramp_end).verdict ==
               StabilityClassification::Verdict::AsymptoticallyStable;
    };

    if (!stable_at(search.m_start))
        throw ComputationError("find_sim_threshold: unstable already at the starting slope");

    std::vector<double> ladder;
    for (double m = 2.0 * search.m_start; m < search.m_cap; m *= 2.0) ladder.push_back(m);
    ladder.push_back(search.m_cap);

    double lo = search.m_start, hi = -1.0;
    for (double m : ladder) {
        if (stable_at(m)) {
            lo = m;
        } else {
            hi = m;
            break;
        }
    }
    if (hi < 0.0) {
        res.threshold = search.m_cap;
        res.limit_found = false;
        return res;
    }
    while (hi - lo > search.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (stable_at(mid))
            lo = mid;
        else
            hi = mid;
    }
    res.threshold = lo;
    res.limit_found = true;
    return res;
}

void write_trace_csv(const SimTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ComputationError("cannot write trace file: " + path);
    out << "time_s";
    for (const auto& id : trace.der_ids) out << ",u_" << id << "_pu";
    for (const auto& id : trace.der_ids) out << ",q_" << id << "_pu";
    out << "\n";
    out.precision(10);
    for (std::size_t k = 0; k < trace.time.size(); ++k) {
        out << trace.time[k];
        for (Eigen::Index i = 0; i < trace.voltages.cols(); ++i)
            out << "," << trace.voltages(static_cast<Eigen::Index>(k), i);
        for (Eigen::Index i = 0; i < trace.reactive_power.cols(); ++i)
            out << "," << trace.reactive_power(static_cast<Eigen::Index>(k), i);
        out << "\n";
    }
}

}  // namespace qucert
