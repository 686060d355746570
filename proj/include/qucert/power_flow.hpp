#ifndef QUCERT_POWER_FLOW_HPP
#define QUCERT_POWER_FLOW_HPP

#include <optional>

#include "qucert/grid_model.hpp"

namespace qucert {

struct PowerFlowOptions {
    double tolerance = 1e-8;  // p.u. mismatch
    int max_iterations = 50;
};

struct PowerFlowSolution {
    Eigen::VectorXd v_mag;      // p.u., per node
    Eigen::VectorXd v_angle;    // rad
    Eigen::VectorXd p_injection;  // p.u. on system base
    Eigen::VectorXd q_injection;
    int iterations = 0;
    double max_mismatch = 0.0;
};

/// Per-DER injection overrides in the order of grid.ders; NaN keeps the default
/// (operating power, zero reactive power).
struct InjectionOverride {
    Eigen::VectorXd der_p_mw;
    Eigen::VectorXd der_q_mvar;
};

/// Nodal voltage/reactive-power sensitivities at DER nodes, row/column order
/// fixed by der_order.
struct SensitivityMatrix {
    Eigen::MatrixXd entries;  // dU_i/dQ_j, p.u./p.u.
    std::vector<std::string> der_order;
};

/// Complex nodal admittance matrix in p.u. on the system base.
Eigen::MatrixXcd build_admittance(const GridModel& grid);

/// Polar Newton-Raphson. Throws ComputationError on divergence or a singular
/// Jacobian. An optional warm start resumes from a previous solution.
PowerFlowSolution solve_power_flow(const GridModel& grid, const PowerFlowOptions& options = {},
                                   const InjectionOverride* inject = nullptr,
                                   const PowerFlowSolution* warm_start = nullptr);

/// dU/dQ block of the inverse converged Jacobian at DER nodes.
SensitivityMatrix sensitivity(const GridModel& grid, const PowerFlowSolution& solution);

/// dU/dP block, same ordering; the disturbance path of the simulator.
Eigen::MatrixXd sensitivity_p(const GridModel& grid, const PowerFlowSolution& solution);

}  // namespace qucert

#endif
