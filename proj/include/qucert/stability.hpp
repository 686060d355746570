#ifndef QUCERT_STABILITY_HPP
#define QUCERT_STABILITY_HPP

#include "qucert/power_flow.hpp"
#include "qucert/pt2_fit.hpp"

namespace qucert {

/// Sector [0, beta] of the decoupled Q(U) nonlinearities; the lower bound is
/// the x-axis, so only beta is stored.
struct SectorBounds {
    Eigen::VectorXd beta;  // p.u./p.u., one entry per DER
};

struct SprVerdict {
    bool is_spr = false;
    bool hurwitz_ok = false;
    bool n_matrix_ok = false;
    double min_abs_real_eig_n = 0.0;
    double max_real_eig_a = 0.0;
    double delta = 0.0;
};

/// Omega(s) = I + M_beta Gtilde(s): keeps A and B, scales C, shifts D by I.
StateSpaceModel build_omega(const StateSpaceModel& gtilde, const SectorBounds& bounds);

/// Eigenvalue SPR test: A Hurwitz and the associated Hamiltonian-type matrix
/// N free of eigenvalues within delta of the imaginary axis. Requires
/// Q = D + D^T positive definite; the singular-feedthrough transformation for
/// Q = 0 is not implemented and raises ComputationError.
SprVerdict spr_eigen_test(const StateSpaceModel& omega, double delta = 1e-8);

struct SweepVerdict {
    bool is_spr = false;
    bool hurwitz_ok = false;
    double min_eig = 0.0;      // min over the grid of lambda_min(Omega + Omega^H)
    double argmin_omega = 0.0;
};

/// Frequency-sweep oracle: minimum Hermitian-part eigenvalue over a grid.
/// Independent of the eigenvalue test; exact dead times are usable here.
SweepVerdict spr_sweep_test(const std::function<Eigen::MatrixXcd(double)>& omega_response,
                            bool hurwitz_ok, std::span<const double> grid, double margin = 1e-8,
                            ExecPolicy policy = ExecPolicy::Parallel);
SweepVerdict spr_sweep_test(const StateSpaceModel& omega, std::span<const double> grid,
                            double margin = 1e-8, ExecPolicy policy = ExecPolicy::Parallel);

/// Log grid covering [1e-3, 1e3] rad/s with 4000 points.
std::vector<double> default_sweep_grid();

enum class Representation { Orig, Pt2Der, Pt2Tar };
Representation representation_from_string(const std::string& s);
std::string to_string(Representation r);

struct AssessOptions {
    int pade_order = 3;
    double delta = 1e-8;
    FitConfig fit;    // band and weights for the PT2 fits
    TarStepSpec tar;  // generic step specification for the TAR fallback
};

/// Per-DER linear chain under the chosen representation. pt2-der fits the
/// plant's own detailed loop; pt2-tar fits the guideline step envelope.
DelayedTransfer der_transfer(const DerPlant& plant, Representation repr,
                             const AssessOptions& opts = {});

/// Gtilde = diag(G_i) * K_Q realized in state space (dead times via Pade).
StateSpaceModel compose_gtilde(const GridModel& grid, const SensitivityMatrix& kq,
                               Representation repr, const AssessOptions& opts = {});

/// Uniform sector bounds for slope m %/p.u. applied to every DER.
SectorBounds uniform_sector(const GridModel& grid, double slope_percent);

/// Circle-criterion verdict for one uniform slope.
SprVerdict assess_slope(const GridModel& grid, const SensitivityMatrix& kq, Representation repr,
                        double slope_percent, const AssessOptions& opts = {});

struct SearchOptions {
    double m_start = 1.0;      // %/p.u.
    double m_cap = 1000.0;     // %/p.u.
    double tolerance = 0.1;    // bracket width, %/p.u.
};

struct SlopeSearchResult {
    double m_max = 0.0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    int evaluations = 0;
    bool limit_found = false;  // false: certified up to the cap, no limit below it
    std::vector<std::pair<double, bool>> per_step;  // (slope, SPR pass)
};

/// Doubling bracket from m_start, then bisection; the largest certified slope.
SlopeSearchResult max_slope_search(const GridModel& grid, const SensitivityMatrix& kq,
                                   Representation repr, const SearchOptions& search = {},
                                   const AssessOptions& opts = {});

}  // namespace qucert

#endif
