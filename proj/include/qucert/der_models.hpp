#ifndef QUCERT_DER_MODELS_HPP
#define QUCERT_DER_MODELS_HPP

#include <string>

#include "qucert/lti.hpp"

namespace qucert {

enum class DerKind { WfFrc, WfDfig, Pvf, Pt2 };

DerKind der_kind_from_string(const std::string& s);
std::string to_string(DerKind kind);

/// Reactive power control chain parameters (voltage averaging, setpoint lag,
/// PI setpoint tracking, farm communication dead time, unit current control).
struct DerControlParams {
    double t_u = 0.02;   // voltage averaging time constant, s
    int va_order = 1;    // cascade order of the averaging filter
    double t_dq = 2.0;   // dominant setpoint lag, s
    double k_q = 0.5;    // PI gain
    double t_q = 0.2;    // PI integral time, s
    double t_l = 0.1;    // unit current-control lag, s
    double t_g = 0.2;    // farm communication dead time, s
};

DerControlParams default_control_params(DerKind kind);

struct Pt2Params {
    double gain = 1.0;
    double damping = 1.0;
    double time_constant = 1.0;
};

/// Piecewise-linear Q(U) droop: dead band around u_ref, constant slope outside,
/// saturation at a share of rated power. Stored positive-slope; the loop
/// assembly applies the negative feedback sign.
struct QuCharacteristic {
    double u_ref = 1.0;           // p.u.
    double slope = 0.0;           // %/p.u.
    double deadband = 0.0;        // p.u. half-width
    double q_limit_share = 0.33;  // Q saturation as share of rated power
    double rated_power = 0.0;     // MW
};

/// Reactive power output in p.u. on the system base for terminal voltage u.
double qu_evaluate(const QuCharacteristic& ch, double u, double base_mva);

/// Upper sector slope beta in p.u./p.u.; the dead band never raises it.
double sector_bound(const QuCharacteristic& ch, double base_mva);

/// Linear control chain G_i: voltage averaging, setpoint lag, communication
/// dead time, then the local unity-feedback loop of PI and current-control lag.
DelayedTransfer build_control_loop(DerKind kind, const DerControlParams& p);

/// kappa / (1 + 2 D T s + T^2 s^2)
RationalTransfer build_pt2(const Pt2Params& p);

}  // namespace qucert

#endif
