// Timings of the frequency-sweep kernels: serial reference vs OpenMP.
#include <chrono>
#include <cstdio>
#include <random>

#include "qucert/stability.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qucert;

namespace {

// Random stable MIMO system: block-diagonal second-order sections coupled
// through a random gain matrix, the same structure the certification sees.
StateSpaceModel random_system(int blocks, std::mt19937& rng) {
    std::uniform_real_distribution<double> damp(0.35, 1.2), tc(0.2, 3.0), gain(0.0, 0.15);
    TransferMatrix tm;
    tm.right_factor.resize(blocks, blocks);
    for (int i = 0; i < blocks; ++i) {
        tm.diagonal_blocks.push_back(build_pt2({1.0, damp(rng), tc(rng)}));
        for (int j = 0; j < blocks; ++j) tm.right_factor(i, j) = gain(rng) / (1 + std::abs(i - j));
    }
    StateSpaceModel g = compose_mimo(tm);
    SectorBounds b;
    b.beta = Eigen::VectorXd::Constant(blocks, 1.0);
    return build_omega(g, b);
}

template <typename F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not enabled, parallel path runs serially\n");
#endif

    std::mt19937 rng(7);
    const std::vector<double> grid = log_grid(1e-3, 1e3, 20000);

    std::printf("%-28s %12s %12s %9s\n", "kernel", "serial [ms]", "parallel [ms]", "speedup");
    for (int blocks : {4, 8, 16}) {
        const StateSpaceModel omega = random_system(blocks, rng);
        SweepVerdict vs, vp;
        const double ts = time_ms([&] { vs = spr_sweep_test(omega, grid, 1e-8, ExecPolicy::Serial); });
        const double tp = time_ms([&] { vp = spr_sweep_test(omega, grid, 1e-8, ExecPolicy::Parallel); });
        if (vs.min_eig != vp.min_eig) {
            std::printf("mismatch between serial and parallel sweep!\n");
            return 1;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "spr_sweep %2dx%-2d n=%d", blocks, blocks, omega.order());
        std::printf("%-28s %12.1f %12.1f %8.2fx\n", name, ts, tp, ts / tp);
    }

    for (int blocks : {8, 16}) {
        const StateSpaceModel omega = random_system(blocks, rng);
        std::vector<Eigen::MatrixXcd> rs, rp;
        const double ts =
            time_ms([&] { rs = freq_response_grid(omega, grid, ExecPolicy::Serial); });
        const double tp =
            time_ms([&] { rp = freq_response_grid(omega, grid, ExecPolicy::Parallel); });
        double diff = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) diff += (rs[i] - rp[i]).norm();
        if (diff != 0.0) {
            std::printf("mismatch between serial and parallel response grid!\n");
            return 1;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "freq_response_grid %2dx%-2d", blocks, blocks);
        std::printf("%-28s %12.1f %12.1f %8.2fx\n", name, ts, tp, ts / tp);
    }
    return 0;
}
