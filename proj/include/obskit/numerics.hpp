#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "obskit/errors.hpp"

namespace obskit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Right-hand side of an ODE: (t, x) -> xdot. Inputs are baked into the
/// closure by the caller.
using OdeField = std::function<Vec(double t, const Vec& x)>;

bool all_finite(const Vec& v);

/// One classical 4-stage Runge-Kutta step. Throws IntegrationError if the
/// result is non-finite.
Vec rk4_step(const OdeField& field, const Vec& x, double t, double dt);

/// In-place RK4 over a raw state buffer; used by the simulation loop so the
/// plant and every observer share one clock and see stage-consistent signals.
/// `field(t, z, dz)` fills dz. Workspace vectors are caller-provided to keep
/// the inner loop allocation-free.
struct Rk4Workspace {
    Vec k1, k2, k3, k4, tmp;
    void resize(Eigen::Index n) {
        k1.resize(n); k2.resize(n); k3.resize(n); k4.resize(n); tmp.resize(n);
    }
};
void rk4_step_inplace(const std::function<void(double, const Vec&, Vec&)>& field,
                      Vec& z, double t, double dt, Rk4Workspace& ws);

/// First-order LTI filter F(p) = alpha/(p+alpha), state z driven by u_in:
///   zdot = alpha (u_in - z),  F-output = z.
/// The dirty-derivative filter W(p) = alpha p/(p+alpha) shares the same state:
///   W-output = alpha (u_in - z).
struct FilterState {
    double alpha = 1.0;  // [1/s], > 0
    double z = 0.0;

    FilterState() = default;
    FilterState(double a, double z0) : alpha(a), z(z0) {
        if (!(a > 0.0)) throw ConfigError("FilterState: alpha must be > 0");
    }

    double f_output() const { return z; }
    double w_output(double u_in) const { return alpha * (u_in - z); }
};

/// Advance the filter one RK4 step with u_in held over the step.
/// Returns the updated state and the F-output at the new time.
std::pair<FilterState, double> filter_F_step(FilterState fs, double u_in, double dt);

/// Advance the shared state and return the W-output at the new time.
std::pair<FilterState, double> filter_W_step(FilterState fs, double u_in, double dt);

/// Gradient parameter estimator state for the regression Y = M theta:
///   theta_hat_dot = Gamma M^T (Y - M theta_hat),
/// with Gamma a positive diagonal gain.
struct GradientEstimatorState {
    Vec theta_hat;
    Vec gain;  // diagonal of Gamma, entries > 0

    GradientEstimatorState() = default;
    GradientEstimatorState(Vec theta0, Vec g);
};

/// One RK4 step of the gradient flow with (M, Y) held over the step.
GradientEstimatorState gradient_step(const GradientEstimatorState& ge,
                                     const Mat& M, const Vec& Y, double dt);

/// Central-difference Jacobian of g at x, entry (i,j) = dg_i/dx_j.
/// Step per axis: max(h, h*|x_j|).
Mat fd_jacobian(const std::function<Vec(const Vec&)>& g, const Vec& x,
                double h = 1e-6);

/// Uniform measurement noise, zero-order held between samples. Values are a
/// pure function of (seed, sample index, channel), so queries are
/// reproducible and random-access.
struct NoiseSpec {
    Vec amplitude;          // per-channel half width, >= 0
    double sample_period = 1e-4;  // [s], > 0
    std::uint64_t seed = 0;

    NoiseSpec() = default;
    NoiseSpec(Vec amp, double period, std::uint64_t s);

    bool enabled() const { return amplitude.size() > 0 && amplitude.maxCoeff() > 0.0; }

    /// Sample at time t (t >= 0), dimension = amplitude dimension.
    Vec sample(double t) const;
};

/// SplitMix64 mix function; the building block for the noise stream.
std::uint64_t splitmix64(std::uint64_t z);

}  // namespace obskit
