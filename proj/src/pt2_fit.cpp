#include "qucert/pt2_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qucert {

namespace {

// Compact Nelder-Mead descent; deterministic, derivative-free, two unknowns.
std::pair<std::array<double, 2>, double> nelder_mead(
    const std::function<double(double, double)>& f, std::array<double, 2> start,
    double scale, int max_iter = 2000, double xatol = 1e-9) {
    struct Vertex {
        std::array<double, 2> x;
        double v;
    };
    std::array<Vertex, 3> s;
    s[0] = {start, f(start[0], start[1])};
    s[1] = {{start[0] + scale, start[1]}, 0.0};
    s[2] = {{start[0], start[1] + scale * start[1]}, 0.0};
    s[1].v = f(s[1].x[0], s[1].x[1]);
    s[2].v = f(s[2].x[0], s[2].x[1]);

    for (int it = 0; it < max_iter; ++it) {
        std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
        const double size = std::max(
            std::hypot(s[1].x[0] - s[0].x[0], s[1].x[1] - s[0].x[1]),
            std::hypot(s[2].x[0] - s[0].x[0], s[2].x[1] - s[0].x[1]));
        if (size < xatol) break;

        const std::array<double, 2> centroid{(s[0].x[0] + s[1].x[0]) / 2.0,
                                             (s[0].x[1] + s[1].x[1]) / 2.0};
        auto point = [&](double t) -> std::array<double, 2> {
            return {centroid[0] + t * (centroid[0] - s[2].x[0]),
                    centroid[1] + t * (centroid[1] - s[2].x[1])};
        };
        const auto xr = point(1.0);
        const double vr = f(xr[0], xr[1]);
        if (vr < s[0].v) {
            const auto xe = point(2.0);
            const double ve = f(xe[0], xe[1]);
            s[2] = ve < vr ? Vertex{xe, ve} : Vertex{xr, vr};
        } else if (vr < s[1].v) {
            s[2] = {xr, vr};
        } else {
            const auto xc = point(vr < s[2].v ? 0.5 : -0.5);
            const double vc = f(xc[0], xc[1]);
            if (vc < std::min(vr, s[2].v)) {
                s[2] = {xc, vc};
            } else {
                for (int i = 1; i < 3; ++i) {
                    s[i].x = {(s[i].x[0] + s[0].x[0]) / 2.0, (s[i].x[1] + s[0].x[1]) / 2.0};
                    s[i].v = f(s[i].x[0], s[i].x[1]);
                }
            }
        }
    }
    std::sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.v < b.v; });
    return {s[0].x, s[0].v};
}

void unwrap(std::vector<double>& phase) {
    for (std::size_t k = 1; k < phase.size(); ++k) {
        double d = phase[k] - phase[k - 1];
        while (d > std::numbers::pi) {
            phase[k] -= 2.0 * std::numbers::pi;
            d = phase[k] - phase[k - 1];
        }
        while (d < -std::numbers::pi) {
            phase[k] += 2.0 * std::numbers::pi;
            d = phase[k] - phase[k - 1];
        }
    }
}

}  // namespace

StepMetrics step_metrics(std::span<const double> times, std::span<const double> values,
                         double static_gain, double settle_band) {
    if (times.size() != values.size() || times.size() < 2)
        throw SchemaError("step_metrics: trace too short or inconsistent");
    if (static_gain <= 0.0) throw SchemaError("step_metrics: static gain must be positive");

    StepMetrics m;
    const double peak = *std::max_element(values.begin(), values.end());
    m.overshoot = std::max(0.0, (peak - static_gain) / static_gain);

    const double rise_level = 0.9 * static_gain;
    bool crossed = false;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] >= rise_level) {
            if (k == 0) {
                m.rise_time_90 = times[0];
            } else {
                const double f = (rise_level - values[k - 1]) / (values[k] - values[k - 1]);
                m.rise_time_90 = times[k - 1] + f * (times[k] - times[k - 1]);
            }
            crossed = true;
            break;
        }
    }
    if (!crossed) throw ComputationError("step_metrics: trace never reaches 90% of static gain");

    const double band = settle_band * static_gain;
    std::ptrdiff_t last_out = -1;
    for (std::size_t k = 0; k < values.size(); ++k)
        if (std::abs(values[k] - static_gain) > band) last_out = static_cast<std::ptrdiff_t>(k);
    if (last_out < 0)
        m.settling_time = 0.0;
    else if (last_out + 1 < static_cast<std::ptrdiff_t>(times.size()))
        m.settling_time = times[last_out + 1];
    else
        m.settling_time = times.back();
    return m;
}

Pt2Fit fit_tar(const TarStepSpec& spec, const FitConfig& cfg) {
    if (spec.overshoot < 0.0 || spec.overshoot >= 1.0)
        throw SchemaError("fit_tar: overshoot must be in [0, 1)");
    if (spec.rise_time_90 <= 0.0 || spec.rise_time_90 >= spec.settling_time)
        throw SchemaError("fit_tar: need 0 < rise time < settling time");

    const double os_scale = std::max(spec.overshoot, 0.05);
    auto objective = [&](double d, double t) {
        if (d < 0.02 || t < 0.02) return 1e12;
        const double dt = std::min(t, 1.0) / 200.0;
        const double horizon = std::max(12.0 * t, 3.0 * spec.settling_time);
        const StepResponse tr = step_response(build_pt2({1.0, d, t}), horizon, dt);
        StepMetrics m;
        try {
            m = step_metrics(tr.time, tr.value, 1.0, spec.settle_band);
        } catch (const ComputationError&) {
            return 1e12;
        }
        const double e_os = (m.overshoot - spec.overshoot) / os_scale;
        const double e_90 = (m.rise_time_90 - spec.rise_time_90) / spec.rise_time_90;
        const double e_stl = (m.settling_time - spec.settling_time) / spec.settling_time;
        return cfg.weights[0] * e_os * e_os + cfg.weights[1] * e_90 * e_90 +
               cfg.weights[2] * e_stl * e_stl;
    };

    // Deterministic coarse scan, then simplex descent from the best cell.
    double best = std::numeric_limits<double>::infinity();
    std::array<double, 2> start{0.7, spec.rise_time_90 / 3.0};
    for (int i = 0; i < 12; ++i) {
        const double d = 0.15 + (2.0 - 0.15) * i / 11.0;
        for (int j = 0; j < 10; ++j) {
            const double t = spec.rise_time_90 / 8.0 + (spec.rise_time_90 - spec.rise_time_90 / 8.0) * j / 9.0;
            const double v = objective(d, t);
            if (v < best) {
                best = v;
                start = {d, t};
            }
        }
    }
    auto [x, v] = nelder_mead(objective, start, 0.05);
    if (!std::isfinite(v) || v >= 1e12)
        throw ComputationError("fit_tar: optimizer did not converge");
    return {{1.0, x[0], x[1]}, v};
}

Pt2Fit fit_der(const std::function<Complex(double)>& model, const FitConfig& cfg) {
    if (cfg.band_low <= 0.0 || cfg.band_low >= cfg.band_high || cfg.grid_points < 50)
        throw SchemaError("fit_der: invalid frequency band or grid");
    const double g0 = std::abs(model(cfg.band_low * 1e-3));
    if (std::abs(g0 - 1.0) > 1e-2)
        throw ComputationError("fit_der: model static gain must be 1, got " + std::to_string(g0));

    const std::vector<double> grid = log_grid(cfg.band_low, cfg.band_high, cfg.grid_points);
    std::vector<double> target_mag(grid.size()), target_ph(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Complex g = model(grid[k]);
        target_mag[k] = std::log(std::abs(g));
        target_ph[k] = std::arg(g);
    }
    unwrap(target_ph);

    auto objective = [&](double d, double t) {
        if (d < 0.02 || t < 1e-4) return 1e12;
        const RationalTransfer pt2 = build_pt2({1.0, d, t});
        std::vector<double> ph(grid.size());
        double mag_err = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const Complex p = pt2.evaluate(Complex(0.0, grid[k]));
            const double dm = std::log(std::abs(p)) - target_mag[k];
            mag_err += dm * dm;
            ph[k] = std::arg(p);
        }
        unwrap(ph);
        double ph_err = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double dp = ph[k] - target_ph[k];
            ph_err += dp * dp;
        }
        return mag_err + ph_err;
    };

    const double w_mid = std::sqrt(cfg.band_low * cfg.band_high);
    double best = std::numeric_limits<double>::infinity();
    std::array<double, 2> start{0.7, 1.0 / w_mid};
    for (int i = 0; i < 25; ++i) {
        const double d = 0.15 + (3.0 - 0.15) * i / 24.0;
        for (int j = 0; j < 25; ++j) {
            const double t = 0.5 / cfg.band_high * std::pow(4.0 * cfg.band_high / cfg.band_low, j / 24.0);
            const double v = objective(d, t);
            if (v < best) {
                best = v;
                start = {d, t};
            }
        }
    }
    auto [x, v] = nelder_mead(objective, start, 0.05);
    if (!std::isfinite(v) || v >= 1e12)
        throw ComputationError("fit_der: optimizer did not converge");
    return {{1.0, x[0], x[1]}, v};
}

Pt2Fit fit_der(const DelayedTransfer& model, const FitConfig& cfg) {
    return fit_der([&model](double w) { return model.response(w); }, cfg);
}

}  // namespace qucert
