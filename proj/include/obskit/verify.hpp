#pragma once

#include <functional>
#include <vector>

#include "obskit/observers.hpp"
#include "obskit/plants.hpp"
#include "obskit/trace.hpp"

namespace obskit {

/// Halton radical-inverse sequence value for 1-based index i.
double halton(std::uint64_t i, unsigned base);

/// Quasi-random sample points (rows) inside the given box, one column per
/// axis, using the first dim prime bases.
Mat halton_points(int count, const std::vector<std::pair<double, double>>& box);

enum class PdeMode { general, affine_split };

struct PdeCheckReport {
    double max_residual = 0.0;
    /// Residual relative to the magnitude of the identity's terms at the same
    /// sample; the meaningful figure when finite-difference Jacobians meet
    /// fields of size 1e5.
    double max_residual_rel = 0.0;
    Vec worst_x;
    Vec worst_u;
    int samples = 0;
    PdeMode mode = PdeMode::general;
    bool finite = true;  // false when a residual evaluated non-finite
    // affine_split mode: worst residuals of the drift and input equations
    double max_residual_drift = 0.0;
    double max_residual_gain = 0.0;
};

/// Sup-norm of r(x,u) = grad(phi)^T f - P^T Lambda P phi - B(h(x),u) over
/// quasi-random samples of (x, u). In affine_split mode the drift and input
/// equations are checked separately (requires the plant's affine split and
/// the design's B split, and an input-independent Lambda).
PdeCheckReport pde_residual(const PlantModel& plant, const DesignTriple& d,
                            int n_samples,
                            const std::vector<std::pair<double, double>>& box,
                            std::pair<double, double> u_range,
                            PdeMode mode = PdeMode::general);

/// Convenience overload sampling over the plant's own box and input range.
PdeCheckReport pde_residual(const PlantModel& plant, const DesignTriple& d,
                            int n_samples = 1000,
                            PdeMode mode = PdeMode::general);

struct ManifoldTrace {
    std::vector<double> t;
    std::vector<Vec> d_M;
    std::vector<double> norms;
    bool decayed = false;  // norm at the end < norm at 10% of the horizon
};

/// Off-manifold coordinate d_M(t) = beta(y(t), chi(t)) - phi(x(t)) computed
/// pointwise from a recorded trace (simulation-only diagnostic; requires true
/// states in the trace).
ManifoldTrace manifold_monitor(
    const SimTrace& trace,
    const std::function<Vec(const Vec& y, const Vec& chi)>& beta,
    const std::function<Vec(const Vec& x)>& phi);

/// Overload reading beta from the observer's registered manifold map.
ManifoldTrace manifold_monitor(const SimTrace& trace, const Observer& obs,
                               const std::function<Vec(const Vec& x)>& phi);

struct EquivalenceResult {
    double max_deviation = 0.0;  // sup over t of |chi_iio - chi_kpo|_inf
    double horizon = 0.0;
    int steps = 0;
};

/// Runs the combined observer and its manifold-observer instantiation (beta =
/// xi + theta-lift with the estimator advanced once as a shared signal, Q = 0)
/// side by side on the same noiseless closed loop and reports the worst
/// trajectory deviation. The design must not carry a mixing matrix P.
EquivalenceResult equivalence_check(
    const PlantModel& plant,
    const std::function<double(double t, const Vec& x)>& control,
    const DesignTriple& design, const RegressorBuilder& reg, const Vec& gain,
    const Vec& x0, double horizon, double dt);

struct PeCheckResult {
    bool satisfied = false;
    double min_window_eig = 0.0;  // smallest window Gramian eigenvalue
    int windows = 0;
};

/// Sliding-window persistency-of-excitation check: trapezoidal integral of
/// b b^T over every window of length T must have min eigenvalue >= delta.
PeCheckResult pe_check(const std::vector<double>& t,
                       const std::vector<Vec>& b_trace, double T, double delta);

}  // namespace obskit
