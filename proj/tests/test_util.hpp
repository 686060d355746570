#ifndef QUCERT_TEST_UTIL_HPP
#define QUCERT_TEST_UTIL_HPP

#include <random>
#include <string>

#include "qucert/stability.hpp"

namespace qucert::test {

inline std::string fixture(const std::string& name) {
    return std::string(QUCERT_DATA_DIR) + "/" + name;
}

/// Random stable strictly-proper Lur'e loop: PT2 blocks behind a random gain
/// matrix with random sector bounds. Systems within 1e-4 of the SPR boundary
/// are resampled; knife-edge cases are covered by the analytic flip tests.
inline StateSpaceModel random_lure_omega(std::mt19937& rng) {
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_real_distribution<double> damp(0.4, 1.5), tc(0.3, 3.0), gain(0.02, 0.4),
        sector(0.0, 4.0);
    for (;;) {
        const int nd = count(rng);
        TransferMatrix tm;
        tm.right_factor.resize(nd, nd);
        for (int i = 0; i < nd; ++i) {
            tm.diagonal_blocks.push_back(build_pt2({1.0, damp(rng), tc(rng)}));
            for (int j = 0; j < nd; ++j)
                tm.right_factor(i, j) = gain(rng) / (1.0 + std::abs(i - j));
        }
        SectorBounds bounds;
        bounds.beta.resize(nd);
        for (int i = 0; i < nd; ++i) bounds.beta(i) = sector(rng) / tm.right_factor(i, i);
        const StateSpaceModel omega = build_omega(compose_mimo(tm), bounds);
        const std::vector<double> grid = log_grid(1e-3, 1e3, 1500);
        const SweepVerdict probe = spr_sweep_test(omega, grid);
        if (std::abs(probe.min_eig) > 1e-4) return omega;
    }
}

}  // namespace qucert::test

#endif
