#include "qucert/der_models.hpp"

#include <algorithm>
#include <cmath>

namespace qucert {

DerKind der_kind_from_string(const std::string& s) {
    if (s == "wf-frc") return DerKind::WfFrc;
    if (s == "wf-dfig") return DerKind::WfDfig;
    if (s == "pvf") return DerKind::Pvf;
    if (s == "pt2") return DerKind::Pt2;
    throw SchemaError("unknown DER model kind: " + s);
}

std::string to_string(DerKind kind) {
    switch (kind) {
        case DerKind::WfFrc: return "wf-frc";
        case DerKind::WfDfig: return "wf-dfig";
        case DerKind::Pvf: return "pvf";
        case DerKind::Pt2: return "pt2";
    }
    throw SchemaError("invalid DER kind");
}

DerControlParams default_control_params(DerKind kind) {
    DerControlParams p;
    switch (kind) {
        case DerKind::WfFrc:
        case DerKind::WfDfig:
            // WF-DFIG defaults are placeholders; the reference parameter set
            // matches the fully rated converter farm.
            break;
        case DerKind::Pvf:
            p.t_u = 0.004;
            p.va_order = 3;
            p.t_l = 0.0033;
            p.t_g = 0.1;
            break;
        case DerKind::Pt2:
            throw SchemaError("pt2 models carry explicit parameters, not a control chain");
    }
    return p;
}

double qu_evaluate(const QuCharacteristic& ch, double u, double base_mva) {
    if (u <= 0.0) throw SchemaError("qu_evaluate: voltage must be positive");
    if (base_mva <= 0.0) throw SchemaError("qu_evaluate: base power must be positive");
    const double e = u - ch.u_ref;
    if (std::abs(e) <= ch.deadband) return 0.0;
    const double slope_pu = ch.slope / 100.0 * ch.rated_power / base_mva;
    const double q = slope_pu * (e - std::copysign(ch.deadband, e));
    const double limit = ch.q_limit_share * ch.rated_power / base_mva;
    return std::clamp(q, -limit, limit);
}

double sector_bound(const QuCharacteristic& ch, double base_mva) {
    if (base_mva <= 0.0) throw SchemaError("sector_bound: base power must be positive");
    return ch.slope / 100.0 * ch.rated_power / base_mva;
}

DelayedTransfer build_control_loop(DerKind kind, const DerControlParams& p) {
    if (kind == DerKind::Pt2)
        throw SchemaError("build_control_loop: pt2 kind has no control chain");
    if (p.t_u < 0.0 || p.t_dq < 0.0 || p.t_q < 0.0 || p.t_l < 0.0 || p.t_g < 0.0)
        throw SchemaError("build_control_loop: time constants must be non-negative");
    if (p.k_q <= 0.0) throw SchemaError("build_control_loop: k_q must be positive");
    if (p.va_order < 1 || p.va_order > 5)
        throw SchemaError("build_control_loop: va_order must be in [1,5]");

    RationalTransfer va = RationalTransfer::first_order_lag(p.t_u);
    for (int i = 1; i < p.va_order; ++i)
        va = series(va, RationalTransfer::first_order_lag(p.t_u));

    // Unit/inverter loop: PI tracks the delayed setpoint against the
    // current-control lag output, closed locally (no dead time inside).
    RationalTransfer inner = RationalTransfer::constant(1.0);
    if (p.t_q > 0.0) {
        inner = feedback_unity(
            series(RationalTransfer::pi(p.k_q, p.t_q), RationalTransfer::first_order_lag(p.t_l)));
    }

    DelayedTransfer g;
    const RationalTransfer lag = RationalTransfer::first_order_lag(p.t_dq);
    g.tf = series(series(va, lag), inner);
    g.dead_time = p.t_g;
    g.factors = {va, lag, inner};
    return g;
}

RationalTransfer build_pt2(const Pt2Params& p) {
    if (p.gain <= 0.0 || p.damping <= 0.0 || p.time_constant <= 0.0)
        throw SchemaError("build_pt2: gain, damping, time constant must be positive");
    return {{p.gain},
            {1.0, 2.0 * p.damping * p.time_constant, p.time_constant * p.time_constant}};
}

}  // namespace qucert
