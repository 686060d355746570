#include "qucert/stability.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qucert {

StateSpaceModel build_omega(const StateSpaceModel& gtilde, const SectorBounds& bounds) {
    if (gtilde.inputs() != gtilde.outputs())
        throw SchemaError("build_omega: Gtilde must be square");
    if (bounds.beta.size() != gtilde.outputs())
        throw SchemaError("build_omega: sector dimension mismatch");
    if ((bounds.beta.array() < 0.0).any())
        throw SchemaError("build_omega: sector bounds must be non-negative");

    StateSpaceModel omega;
    omega.A = gtilde.A;
    omega.B = gtilde.B;
    omega.C = bounds.beta.asDiagonal() * gtilde.C;
    omega.D = Eigen::MatrixXd::Identity(gtilde.outputs(), gtilde.inputs()) +
              bounds.beta.asDiagonal() * gtilde.D;
    return omega;
}

SprVerdict spr_eigen_test(const StateSpaceModel& omega, double delta) {
    SprVerdict v;
    v.delta = delta;

    const Eigen::MatrixXd q = omega.D + omega.D.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    bool q_pd = llt.info() == Eigen::Success;
    if (q_pd) {
        const Eigen::MatrixXd l = llt.matrixL();
        for (int i = 0; i < l.rows(); ++i)
            if (l(i, i) * l(i, i) <= 1e-12) q_pd = false;
    }
    if (!q_pd)
        throw ComputationError(
            "spr_eigen_test: singular feedthrough, Q = D + D^T is not positive definite; "
            "the rank-deficient transformation is not implemented");

    if (omega.order() == 0) {
        v.hurwitz_ok = true;
        v.n_matrix_ok = true;
        v.max_real_eig_a = -std::numeric_limits<double>::infinity();
        v.min_abs_real_eig_n = std::numeric_limits<double>::infinity();
        v.is_spr = true;
        return v;
    }

    v.max_real_eig_a = eigenvalues(omega.A).real().maxCoeff();
    v.hurwitz_ok = v.max_real_eig_a < 0.0;

    const int n = omega.order();
    const Eigen::MatrixXd bq = llt.solve(omega.B.transpose()).transpose();  // B Q^-1
    const Eigen::MatrixXd cq = llt.solve(omega.C);                          // Q^-1 C
    Eigen::MatrixXd nmat(2 * n, 2 * n);
    nmat.topLeftCorner(n, n) = -omega.A + bq * omega.C;
    nmat.topRightCorner(n, n) = bq * omega.B.transpose();
    nmat.bottomLeftCorner(n, n) = -omega.C.transpose() * cq;
    nmat.bottomRightCorner(n, n) = omega.A.transpose() - omega.C.transpose() * bq.transpose();

    v.min_abs_real_eig_n = eigenvalues(nmat).real().cwiseAbs().minCoeff();
    v.n_matrix_ok = v.min_abs_real_eig_n > delta;
    v.is_spr = v.hurwitz_ok && v.n_matrix_ok;
    return v;
}

namespace {

// Shared sweep core; the evaluator writes the response into a per-thread
// buffer so the scan stays allocation-free.
template <typename Eval>
SweepVerdict sweep_core(const Eval& eval, bool hurwitz_ok, std::span<const double> grid,
                        double margin, ExecPolicy policy) {
    if (grid.size() < 2) throw SchemaError("spr_sweep_test: need at least two grid points");

    const auto count = static_cast<std::ptrdiff_t>(grid.size());
    double min_eig = std::numeric_limits<double>::infinity();
    std::ptrdiff_t min_idx = 0;

    struct ThreadState {
        FrequencyEvaluator::Scratch scratch;
        Eigen::MatrixXcd response, hermitian;
    };
    auto eval_one = [&eval](double w, ThreadState& ts) {
        eval(w, ts.scratch, ts.response);
        if (ts.response.rows() == 1 && ts.response.cols() == 1)
            return 2.0 * ts.response(0, 0).real();
        ts.hermitian = ts.response + ts.response.adjoint();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(ts.hermitian, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };

    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel
        {
            ThreadState ts;
            double local_min = std::numeric_limits<double>::infinity();
            std::ptrdiff_t local_idx = 0;
#pragma omp for schedule(static) nowait
            for (std::ptrdiff_t i = 0; i < count; ++i) {
                const double v = eval_one(grid[i], ts);
                if (v < local_min || (v == local_min && i < local_idx)) {
                    local_min = v;
                    local_idx = i;
                }
            }
#pragma omp critical
            {
                if (local_min < min_eig || (local_min == min_eig && local_idx < min_idx)) {
                    min_eig = local_min;
                    min_idx = local_idx;
                }
            }
        }
    } else {
        ThreadState ts;
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const double v = eval_one(grid[i], ts);
            if (v < min_eig) {
                min_eig = v;
                min_idx = i;
            }
        }
    }

    SweepVerdict v;
    v.hurwitz_ok = hurwitz_ok;
    v.min_eig = min_eig;
    v.argmin_omega = grid[min_idx];
    v.is_spr = hurwitz_ok && min_eig > margin;
    return v;
}

}  // namespace

SweepVerdict spr_sweep_test(const std::function<Eigen::MatrixXcd(double)>& omega_response,
                            bool hurwitz_ok, std::span<const double> grid, double margin,
                            ExecPolicy policy) {
    return sweep_core(
        [&omega_response](double w, FrequencyEvaluator::Scratch&, Eigen::MatrixXcd& target) {
            target = omega_response(w);
        },
        hurwitz_ok, grid, margin, policy);
}

SweepVerdict spr_sweep_test(const StateSpaceModel& omega, std::span<const double> grid,
                            double margin, ExecPolicy policy) {
    const bool hurwitz =
        omega.order() == 0 || eigenvalues(omega.A).real().maxCoeff() < 0.0;
    const FrequencyEvaluator eval(omega);
    return sweep_core(
        [&eval](double w, FrequencyEvaluator::Scratch& s, Eigen::MatrixXcd& target) {
            eval.eval_into(w, s, target);
        },
        hurwitz, grid, margin, policy);
}

std::vector<double> default_sweep_grid() { return log_grid(1e-3, 1e3, 4000); }

Representation representation_from_string(const std::string& s) {
    if (s == "orig") return Representation::Orig;
    if (s == "pt2-der") return Representation::Pt2Der;
    if (s == "pt2-tar") return Representation::Pt2Tar;
    throw SchemaError("unknown representation: " + s);
}

std::string to_string(Representation r) {
    switch (r) {
        case Representation::Orig: return "orig";
        case Representation::Pt2Der: return "pt2-der";
        case Representation::Pt2Tar: return "pt2-tar";
    }
    throw SchemaError("invalid representation");
}

DelayedTransfer der_transfer(const DerPlant& plant, Representation repr,
                             const AssessOptions& opts) {
    switch (repr) {
        case Representation::Orig:
            if (plant.model_kind == DerKind::Pt2) return {build_pt2(*plant.pt2_params), 0.0, {}};
            return build_control_loop(plant.model_kind, plant.control_params);
        case Representation::Pt2Der: {
            if (plant.model_kind == DerKind::Pt2) return {build_pt2(*plant.pt2_params), 0.0, {}};
            const DelayedTransfer detailed =
                build_control_loop(plant.model_kind, plant.control_params);
            return {build_pt2(fit_der(detailed, opts.fit).params), 0.0, {}};
        }
        case Representation::Pt2Tar:
            return {build_pt2(fit_tar(opts.tar, opts.fit).params), 0.0, {}};
    }
    throw SchemaError("invalid representation");
}

StateSpaceModel compose_gtilde(const GridModel& grid, const SensitivityMatrix& kq,
                               Representation repr, const AssessOptions& opts) {
    const int nd = static_cast<int>(grid.ders.size());
    if (nd == 0) throw SchemaError("compose_gtilde: grid has no DER plants");
    if (kq.entries.rows() != nd || kq.entries.cols() != nd)
        throw SchemaError("compose_gtilde: sensitivity dimension mismatch");

    std::vector<StateSpaceModel> blocks;
    blocks.reserve(grid.ders.size());
    for (const auto& plant : grid.ders)
        blocks.push_back(der_transfer(plant, repr, opts).realization(opts.pade_order));
    return compose_blocks(blocks, kq.entries);
}

SectorBounds uniform_sector(const GridModel& grid, double slope_percent) {
    SectorBounds b;
    b.beta.resize(static_cast<Eigen::Index>(grid.ders.size()));
    for (std::size_t i = 0; i < grid.ders.size(); ++i) {
        QuCharacteristic ch = grid.ders[i].characteristic;
        ch.slope = slope_percent;
        b.beta(static_cast<Eigen::Index>(i)) = sector_bound(ch, grid.base_mva);
    }
    return b;
}

namespace {

SprVerdict assess_prebuilt(const GridModel& grid, const StateSpaceModel& gtilde,
                           double slope_percent, const AssessOptions& opts) {
    return spr_eigen_test(build_omega(gtilde, uniform_sector(grid, slope_percent)), opts.delta);
}

}  // namespace

SprVerdict assess_slope(const GridModel& grid, const SensitivityMatrix& kq, Representation repr,
                        double slope_percent, const AssessOptions& opts) {
    if (slope_percent < 0.0) throw SchemaError("assess_slope: slope must be non-negative");
    const StateSpaceModel gtilde = compose_gtilde(grid, kq, repr, opts);
    return assess_prebuilt(grid, gtilde, slope_percent, opts);
}

SlopeSearchResult max_slope_search(const GridModel& grid, const SensitivityMatrix& kq,
                                   Representation repr, const SearchOptions& search,
                                   const AssessOptions& opts) {
    if (search.m_start <= 0.0 || search.m_cap <= search.m_start || search.tolerance <= 0.0)
        throw SchemaError("max_slope_search: need 0 < m_start < m_cap and positive tolerance");

    const StateSpaceModel gtilde = compose_gtilde(grid, kq, repr, opts);
    SlopeSearchResult res;
    auto assess = [&](double m) {
        const bool pass = assess_prebuilt(grid, gtilde, m, opts).is_spr;
        res.per_step.emplace_back(m, pass);
        ++res.evaluations;
        return pass;
    };

    if (!assess(search.m_start))
        throw ComputationError("max_slope_search: not certifiable at the starting slope " +
                               std::to_string(search.m_start));

    // Doubling ladder up to the cap; candidates are independent of each other.
    std::vector<double> ladder;
    for (double m = 2.0 * search.m_start; m < search.m_cap; m *= 2.0) ladder.push_back(m);
    ladder.push_back(search.m_cap);
    std::vector<char> pass(ladder.size(), 0);
    const auto lcount = static_cast<std::ptrdiff_t>(ladder.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < lcount; ++i)
        pass[i] = assess_prebuilt(grid, gtilde, ladder[i], opts).is_spr ? 1 : 0;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        res.per_step.emplace_back(ladder[i], pass[i] != 0);
        ++res.evaluations;
    }

    double lo = search.m_start;
    double hi = -1.0;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (pass[i]) {
            lo = ladder[i];
        } else {
            hi = ladder[i];
            break;
        }
    }
    if (hi < 0.0) {
        // Certified everywhere below the cap.
        res.m_max = search.m_cap;
        res.bracket_low = search.m_cap;
        res.bracket_high = search.m_cap;
        res.limit_found = false;
        return res;
    }

    while (hi - lo > search.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (assess(mid))
            lo = mid;
        else
            hi = mid;
    }
    res.m_max = lo;
    res.bracket_low = lo;
    res.bracket_high = hi;
    res.limit_found = true;
    return res;
}

}  // namespace qucert
