#ifndef QUCERT_TIME_SIM_HPP
#define QUCERT_TIME_SIM_HPP

#include "qucert/power_flow.hpp"

namespace qucert {

enum class Coupling { Linearized, FullPowerFlow };

/// Ramp-like increase of DER feed-in power, shares of installed power.
struct RampDisturbance {
    double start_s = 1.0;
    double duration_s = 5.0;
    double p_initial_share = 0.1;
    double p_final_share = 1.0;
};

struct SimScenario {
    double slope = 0.0;  // uniform Q(U) slope, %/p.u.
    RampDisturbance ramp;
    double horizon_s = 20.0;
    double dt_s = 1e-3;
    Coupling coupling = Coupling::Linearized;
    // Reference each Q(U) characteristic to the initial steady-state voltage
    // so the pre-ramp state is an exact equilibrium.
    bool uref_from_initial = true;
};

struct SimTrace {
    std::vector<double> time;
    Eigen::MatrixXd voltages;        // rows: steps, cols: DER nodes, p.u.
    Eigen::MatrixXd reactive_power;  // p.u. on system base
    std::vector<std::string> der_ids;
    bool truncated = false;  // power flow diverged mid-run
};

struct StabilityClassification {
    enum class Verdict { AsymptoticallyStable, NotDecayed, Diverged };
    Verdict verdict = Verdict::NotDecayed;
    double decay_ratio = 0.0;
    std::pair<double, double> window{0.0, 0.0};
};

std::string to_string(StabilityClassification::Verdict v);

/// Quasi-static phasor run: controller states integrate with RK4 and an exact
/// sample-delay buffer for the farm dead time; the grid is algebraic per step.
SimTrace simulate(const GridModel& grid, const SimScenario& scenario);

/// Significant-decay rule over the 10 s window after full feed-in: the
/// peak-to-peak voltage deviation of the second 5 s halves against the first.
StabilityClassification classify(const SimTrace& trace, double ramp_end_s,
                                 double decay_threshold = 0.5, double divergence_guard = 0.3);

struct SimSearchOptions {
    double m_start = 1.0;
    double m_cap = 1000.0;
    double tolerance = 0.5;  // %/p.u.
};

struct SimThresholdResult {
    double threshold = 0.0;  // largest slope classified stable
    bool limit_found = false;
    int evaluations = 0;
};

SimThresholdResult find_sim_threshold(const GridModel& grid, const SimScenario& base,
                                      const SimSearchOptions& search = {});

/// Trace export: time_s, then u_<derid>_pu and q_<derid>_pu columns.
void write_trace_csv(const SimTrace& trace, const std::string& path);

}  // namespace qucert

#endif
