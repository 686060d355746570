#ifndef QUCERT_PT2_FIT_HPP
#define QUCERT_PT2_FIT_HPP

#include <array>
#include <functional>

#include "qucert/der_models.hpp"

namespace qucert {

/// Step-response envelope required by the connection rules: overshoot,
/// 90%-rise time and settling time into a tolerance band.
struct TarStepSpec {
    double overshoot = 0.15;     // fraction of static gain
    double rise_time_90 = 5.0;   // s
    double settling_time = 8.0;  // s
    double settle_band = 0.05;   // band half-width, fraction of static gain
};

struct StepMetrics {
    double overshoot = 0.0;
    double rise_time_90 = 0.0;
    double settling_time = 0.0;
};

struct FitConfig {
    double band_low = 1e-2;   // rad/s
    double band_high = 1e2;   // rad/s
    int grid_points = 200;
    // Relative-error weights for (overshoot, rise time, settling time) in TAR
    // mode; overshoot and rise time dominate, settling time is a tiebreaker.
    std::array<double, 3> weights{100.0, 100.0, 1.0};
};

struct Pt2Fit {
    Pt2Params params;
    double residual = 0.0;
};

/// Measures overshoot, 90%-rise and settling time of a step trace.
/// Throws ComputationError when the trace never reaches 90% of the gain.
StepMetrics step_metrics(std::span<const double> times, std::span<const double> values,
                         double static_gain, double settle_band = 0.05);

/// Least-squares PT2 fit (kappa = 1) to a generic step specification.
Pt2Fit fit_tar(const TarStepSpec& spec, const FitConfig& cfg = {});

/// Least-squares PT2 fit (kappa = 1) to a frequency response: log-magnitude
/// plus unwrapped phase over a log-spaced band. The model's dead time enters
/// exactly; the model must have unit static gain.
Pt2Fit fit_der(const std::function<Complex(double)>& model, const FitConfig& cfg = {});
Pt2Fit fit_der(const DelayedTransfer& model, const FitConfig& cfg = {});

}  // namespace qucert

#endif
